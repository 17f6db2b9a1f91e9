#include "xlprime/transformer.hpp"

#include <cmath>
#include <vector>

#include "xlprime/error.hpp"
#include "xlprime/rng.hpp"

namespace xlp {

namespace {

template <typename T>
using Mat = Matrix<T>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstRowMap = Eigen::Map<const RowVec<T>>;
template <typename T>
using RowMap = Eigen::Map<RowVec<T>>;

constexpr double kLayerNormEps = 1e-5;

template <typename T>
ConstMatMap<T> matrix(const Tensor<T>& t) {
  return ConstMatMap<T>(t.data(), static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1]));
}
template <typename T>
MatMap<T> matrix(Tensor<T>& t) {
  return MatMap<T>(t.data(), static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1]));
}
template <typename T>
ConstRowMap<T> row(const Tensor<T>& t) {
  return ConstRowMap<T>(t.data(), static_cast<Eigen::Index>(t.size()));
}
template <typename T>
RowMap<T> row(Tensor<T>& t) {
  return RowMap<T>(t.data(), static_cast<Eigen::Index>(t.size()));
}

template <typename T>
struct LayerNormCache {
  Mat<T> xhat;
  std::vector<T> rstd;
};

template <typename T>
Mat<T> layer_norm(const Mat<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, LayerNormCache<T>* cache) {
  const auto rows = x.rows();
  const auto cols = x.cols();
  Mat<T> xhat(rows, cols);
  std::vector<T> rstd(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const T mean = x.row(r).mean();
    const T var = (x.row(r).array() - mean).square().mean();
    const T rs = T(1) / std::sqrt(var + T(kLayerNormEps));
    xhat.row(r) = (x.row(r).array() - mean) * rs;
    rstd[static_cast<std::size_t>(r)] = rs;
  }
  Mat<T> y = (xhat.array().rowwise() * row(gain).array()).rowwise() + row(bias).array();
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const Tensor<T>& gain, const LayerNormCache<T>& cache,
                           Tensor<T>& dgain, Tensor<T>& dbias) {
  row(dgain) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  row(dbias) += dy.colwise().sum();
  const Mat<T> dxhat = dy.array().rowwise() * row(gain).array();
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T mean_d = dxhat.row(r).mean();
    const T mean_dx = (dxhat.row(r).array() * cache.xhat.row(r).array()).mean();
    dx.row(r) = cache.rstd[static_cast<std::size_t>(r)] *
                (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx);
  }
  return dx;
}

// GELU, tanh approximation.
template <typename T>
constexpr T kGeluC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
template <typename T>
constexpr T kGeluA = static_cast<T>(0.044715);

template <typename T>
Mat<T> gelu(const Mat<T>& u) {
  return u.unaryExpr([](T x) { return T(0.5) * x * (T(1) + std::tanh(kGeluC<T> * (x + kGeluA<T> * x * x * x))); });
}

template <typename T>
Mat<T> gelu_grad(const Mat<T>& u) {
  return u.unaryExpr([](T x) {
    const T th = std::tanh(kGeluC<T> * (x + kGeluA<T> * x * x * x));
    return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * kGeluC<T> * (T(1) + T(3) * kGeluA<T> * x * x);
  });
}

// Counter-based masks: a pure function of (key, site, element).
template <typename T>
Mat<T> dropout_mask(const DropoutKey& key, std::uint64_t site, Eigen::Index rows, Eigen::Index cols, double rate) {
  Mat<T> mask(rows, cols);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  const std::uint64_t base = splitmix64(key.seed ^ splitmix64(key.step ^ splitmix64(key.sequence ^ splitmix64(site))));
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const double u = static_cast<double>(splitmix64(base + static_cast<std::uint64_t>(i)) >> 11) * 0x1.0p-53;
    mask.data()[i] = u < rate ? T(0) : keep_scale;
  }
  return mask;
}

template <typename T>
struct LayerCache {
  LayerNormCache<T> ln1;
  Mat<T> h1;
  Mat<T> qkv;
  std::vector<Mat<T>> probs;
  Mat<T> attn;
  Mat<T> mask_attn;
  LayerNormCache<T> ln2;
  Mat<T> h2;
  Mat<T> u;
  Mat<T> f;
  Mat<T> mask_mlp;
};

template <typename T>
struct ForwardCache {
  std::vector<LayerCache<T>> layers;
  Mat<T> mask_embed;
  LayerNormCache<T> lnf;
  Mat<T> xf;
};

void check_tokens(const ModelConfig& config, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw DataError("lm: empty token sequence");
  if (tokens.size() > config.seq_len) {
    throw DataError("lm: sequence of " + std::to_string(tokens.size()) + " tokens exceeds seq_len " +
                    std::to_string(config.seq_len));
  }
  for (auto id : tokens) {
    if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
      throw DataError("lm: token id " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(config.vocab_size));
    }
  }
}

// Returns the final layer-normalized hidden states (positions x d_model).
template <typename T>
Mat<T> forward_hidden(const Parameters<T>& p, std::span<const TokenId> tokens, ForwardCache<T>* cache,
                      const DropoutKey* dropout) {
  const auto& cfg = p.config;
  const auto t = static_cast<Eigen::Index>(tokens.size());
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto dh = static_cast<Eigen::Index>(cfg.head_dim());
  const auto n_heads = static_cast<Eigen::Index>(cfg.n_heads);
  const bool use_dropout = dropout != nullptr && cfg.dropout > 0.0;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  const auto wte = matrix(p.wte());
  const auto wpe = matrix(p.wpe());
  Mat<T> x(t, d);
  for (Eigen::Index i = 0; i < t; ++i) x.row(i) = wte.row(tokens[static_cast<std::size_t>(i)]) + wpe.row(i);
  if (use_dropout) {
    Mat<T> mask = dropout_mask<T>(*dropout, 0, t, d, cfg.dropout);
    x.array() *= mask.array();
    if (cache) cache->mask_embed = std::move(mask);
  }
  if (cache) cache->layers.resize(cfg.n_layers);

  using S = typename Parameters<T>::LayerSlot;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    LayerCache<T>* lc = cache ? &cache->layers[l] : nullptr;

    Mat<T> h1 = layer_norm(x, p.layer(l, S::ln1_g), p.layer(l, S::ln1_b), lc ? &lc->ln1 : nullptr);
    Mat<T> qkv = h1 * matrix(p.layer(l, S::w_qkv));
    qkv.rowwise() += row(p.layer(l, S::b_qkv));
    Mat<T> attn(t, d);
    if (lc) lc->probs.resize(static_cast<std::size_t>(n_heads));
    for (Eigen::Index h = 0; h < n_heads; ++h) {
      const auto q = qkv.block(0, h * dh, t, dh);
      const auto k = qkv.block(0, d + h * dh, t, dh);
      const auto v = qkv.block(0, 2 * d + h * dh, t, dh);
      Mat<T> probs = (q * k.transpose()) * scale;
      for (Eigen::Index i = 0; i < t; ++i) {
        auto r = probs.row(i);
        const T mx = r.head(i + 1).maxCoeff();
        r.head(i + 1) = (r.head(i + 1).array() - mx).exp();
        r.head(i + 1) /= r.head(i + 1).sum();
        if (i + 1 < t) r.tail(t - i - 1).setZero();
      }
      attn.block(0, h * dh, t, dh).noalias() = probs * v;
      if (lc) lc->probs[static_cast<std::size_t>(h)] = std::move(probs);
    }
    Mat<T> o = attn * matrix(p.layer(l, S::w_o));
    o.rowwise() += row(p.layer(l, S::b_o));
    if (use_dropout) {
      Mat<T> mask = dropout_mask<T>(*dropout, 1 + 2 * l, t, d, cfg.dropout);
      o.array() *= mask.array();
      if (lc) lc->mask_attn = std::move(mask);
    }
    x += o;

    Mat<T> h2 = layer_norm(x, p.layer(l, S::ln2_g), p.layer(l, S::ln2_b), lc ? &lc->ln2 : nullptr);
    Mat<T> u = h2 * matrix(p.layer(l, S::w_fc));
    u.rowwise() += row(p.layer(l, S::b_fc));
    Mat<T> f = gelu(u);
    Mat<T> m = f * matrix(p.layer(l, S::w_proj));
    m.rowwise() += row(p.layer(l, S::b_proj));
    if (use_dropout) {
      Mat<T> mask = dropout_mask<T>(*dropout, 2 + 2 * l, t, d, cfg.dropout);
      m.array() *= mask.array();
      if (lc) lc->mask_mlp = std::move(mask);
    }
    x += m;

    if (lc) {
      lc->h1 = std::move(h1);
      lc->qkv = std::move(qkv);
      lc->attn = std::move(attn);
      lc->h2 = std::move(h2);
      lc->u = std::move(u);
      lc->f = std::move(f);
    }
  }
  return layer_norm(x, p.lnf_g(), p.lnf_b(), cache ? &cache->lnf : nullptr);
}

template <typename T>
void log_softmax_rows(Mat<T>& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row_r = logits.row(r);
    const T mx = row_r.maxCoeff();
    const T lse = mx + std::log((row_r.array() - mx).exp().sum());
    row_r.array() -= lse;
  }
}

}  // namespace

template <typename T>
Matrix<T> forward_logprobs(const Parameters<T>& params, std::span<const TokenId> tokens) {
  check_tokens(params.config, tokens);
  const Mat<T> xf = forward_hidden<T>(params, tokens, nullptr, nullptr);
  Mat<T> logits = xf * matrix(params.lm_head()).transpose();
  log_softmax_rows(logits);
  return logits;
}

template <typename T>
double accumulate_gradients(const Parameters<T>& p, std::span<const TokenId> tokens, double loss_scale,
                            Parameters<T>& g, const DropoutKey* dropout) {
  const auto& cfg = p.config;
  check_tokens(cfg, tokens);
  if (tokens.size() < 2) throw DataError("lm: training sequences need at least 2 tokens");
  const auto t = static_cast<Eigen::Index>(tokens.size());
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto dh = static_cast<Eigen::Index>(cfg.head_dim());
  const auto n_heads = static_cast<Eigen::Index>(cfg.n_heads);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const T s = static_cast<T>(loss_scale);

  ForwardCache<T> cache;
  const Mat<T> xf = forward_hidden<T>(p, tokens, &cache, dropout);

  // Output layer over the positions that have a next token.
  const Eigen::Index n = t - 1;
  const auto head = matrix(p.lm_head());
  Mat<T> logp = xf.topRows(n) * head.transpose();
  log_softmax_rows(logp);
  double loss = 0.0;
  Mat<T> dlogits = logp.array().exp() * s;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto target = tokens[static_cast<std::size_t>(i + 1)];
    loss -= static_cast<double>(logp(i, target));
    dlogits(i, target) -= s;
  }
  matrix(g.lm_head()).noalias() += dlogits.transpose() * xf.topRows(n);
  Mat<T> dxf = Mat<T>::Zero(t, d);
  dxf.topRows(n).noalias() = dlogits * head;

  Mat<T> dx = layer_norm_backward(dxf, p.lnf_g(), cache.lnf, g.lnf_g(), g.lnf_b());

  using S = typename Parameters<T>::LayerSlot;
  for (std::size_t li = cfg.n_layers; li-- > 0;) {
    auto& lc = cache.layers[li];

    // Feed-forward branch.
    Mat<T> dm = dx;
    if (lc.mask_mlp.size() != 0) dm.array() *= lc.mask_mlp.array();
    matrix(g.layer(li, S::w_proj)).noalias() += lc.f.transpose() * dm;
    row(g.layer(li, S::b_proj)) += dm.colwise().sum();
    Mat<T> du = (dm * matrix(p.layer(li, S::w_proj)).transpose()).cwiseProduct(gelu_grad(lc.u));
    matrix(g.layer(li, S::w_fc)).noalias() += lc.h2.transpose() * du;
    row(g.layer(li, S::b_fc)) += du.colwise().sum();
    const Mat<T> dh2 = du * matrix(p.layer(li, S::w_fc)).transpose();
    dx += layer_norm_backward(dh2, p.layer(li, S::ln2_g), lc.ln2, g.layer(li, S::ln2_g), g.layer(li, S::ln2_b));

    // Attention branch.
    Mat<T> dout = dx;
    if (lc.mask_attn.size() != 0) dout.array() *= lc.mask_attn.array();
    matrix(g.layer(li, S::w_o)).noalias() += lc.attn.transpose() * dout;
    row(g.layer(li, S::b_o)) += dout.colwise().sum();
    const Mat<T> dattn = dout * matrix(p.layer(li, S::w_o)).transpose();
    Mat<T> dqkv(t, 3 * d);
    for (Eigen::Index h = 0; h < n_heads; ++h) {
      const auto& probs = lc.probs[static_cast<std::size_t>(h)];
      const auto q = lc.qkv.block(0, h * dh, t, dh);
      const auto k = lc.qkv.block(0, d + h * dh, t, dh);
      const auto v = lc.qkv.block(0, 2 * d + h * dh, t, dh);
      const auto dO = dattn.block(0, h * dh, t, dh);
      const Mat<T> dprobs = dO * v.transpose();
      dqkv.block(0, 2 * d + h * dh, t, dh).noalias() = probs.transpose() * dO;
      Mat<T> dscores = probs.cwiseProduct(dprobs);
      const Eigen::Matrix<T, Eigen::Dynamic, 1> rowdot = dscores.rowwise().sum();
      dscores -= probs.cwiseProduct(rowdot.replicate(1, t));
      dscores *= scale;
      dqkv.block(0, h * dh, t, dh).noalias() = dscores * k;
      dqkv.block(0, d + h * dh, t, dh).noalias() = dscores.transpose() * q;
    }
    matrix(g.layer(li, S::w_qkv)).noalias() += lc.h1.transpose() * dqkv;
    row(g.layer(li, S::b_qkv)) += dqkv.colwise().sum();
    const Mat<T> dh1 = dqkv * matrix(p.layer(li, S::w_qkv)).transpose();
    dx += layer_norm_backward(dh1, p.layer(li, S::ln1_g), lc.ln1, g.layer(li, S::ln1_g), g.layer(li, S::ln1_b));
  }

  if (cache.mask_embed.size() != 0) dx.array() *= cache.mask_embed.array();
  auto dwte = matrix(g.wte());
  auto dwpe = matrix(g.wpe());
  for (Eigen::Index i = 0; i < t; ++i) {
    dwte.row(tokens[static_cast<std::size_t>(i)]) += dx.row(i);
    dwpe.row(i) += dx.row(i);
  }
  return loss;
}

template <typename T>
double score_continuation(const Parameters<T>& params, std::span<const TokenId> context,
                          std::span<const TokenId> target) {
  if (target.empty()) throw DataError("score_continuation: target must be non-empty");
  if (context.empty()) throw DataError("score_continuation: context must be non-empty");
  const std::size_t total = context.size() + target.size();
  if (total > params.config.seq_len) {
    throw DataError("score_continuation: context (" + std::to_string(context.size()) + ") + target (" +
                    std::to_string(target.size()) + ") tokens exceed seq_len " +
                    std::to_string(params.config.seq_len));
  }
  std::vector<TokenId> tokens(context.begin(), context.end());
  tokens.insert(tokens.end(), target.begin(), target.end());
  const auto logp = forward_logprobs(params, tokens);
  double sum = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    const auto pos = static_cast<Eigen::Index>(context.size() + k - 1);
    sum += static_cast<double>(logp(pos, target[k]));
  }
  return sum;
}

template Matrix<float> forward_logprobs<float>(const Parameters<float>&, std::span<const TokenId>);
template Matrix<double> forward_logprobs<double>(const Parameters<double>&, std::span<const TokenId>);
template double accumulate_gradients<float>(const Parameters<float>&, std::span<const TokenId>, double,
                                            Parameters<float>&, const DropoutKey*);
template double accumulate_gradients<double>(const Parameters<double>&, std::span<const TokenId>, double,
                                             Parameters<double>&, const DropoutKey*);
template double score_continuation<float>(const Parameters<float>&, std::span<const TokenId>,
                                          std::span<const TokenId>);
template double score_continuation<double>(const Parameters<double>&, std::span<const TokenId>,
                                           std::span<const TokenId>);

}  // namespace xlp
