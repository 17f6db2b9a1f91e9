#include "xlprime/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "xlprime/error.hpp"
#include "xlprime/rng.hpp"
#include "xlprime/transformer.hpp"

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

namespace xlp {

const char* to_string(LrSchedule schedule) noexcept {
  return schedule == LrSchedule::cosine ? "cosine" : "constant";
}

LrSchedule parse_lr_schedule(const std::string& text) {
  if (text == "constant") return LrSchedule::constant;
  if (text == "cosine") return LrSchedule::cosine;
  throw ConfigError("unknown learning-rate schedule '" + text + "' (expected constant or cosine)");
}

double learning_rate_at(const AdamConfig& c, std::uint64_t step) {
  if (c.warmup_steps > 0 && step < c.warmup_steps) {
    return c.learning_rate * static_cast<double>(step + 1) / static_cast<double>(c.warmup_steps);
  }
  if (c.schedule == LrSchedule::constant || c.total_steps <= c.warmup_steps) return c.learning_rate;
  const double span = static_cast<double>(c.total_steps - c.warmup_steps);
  const double progress = std::min(1.0, static_cast<double>(step - c.warmup_steps) / span);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return c.learning_rate * (c.min_lr_ratio + (1.0 - c.min_lr_ratio) * cosine);
}

template <typename T>
OptimizerState<T> init_optimizer(const Parameters<T>& params, const AdamConfig& config) {
  OptimizerState<T> s;
  s.config = config;
  for (const auto& t : params.tensors) {
    s.m.emplace_back(t.size(), T(0));
    s.v.emplace_back(t.size(), T(0));
  }
  return s;
}

namespace {

// Flushes subnormals to zero for the duration of a training step. Once the second language
// enters, subnormal intermediates otherwise slow float32 steps by about half.
class FlushDenormals {
 public:
#if defined(__SSE2__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

template <typename T>
void check_batch(const Parameters<T>& params, std::span<const TokenSequence> batch) {
  if (batch.empty()) throw DataError("train_step: empty batch");
  for (const auto& seq : batch) {
    if (seq.size() != params.config.seq_len) {
      throw DataError("train_step: sequence of length " + std::to_string(seq.size()) + ", expected seq_len " +
                      std::to_string(params.config.seq_len));
    }
  }
}

}  // namespace

template <typename T>
StepResult train_step(Parameters<T>& params, OptimizerState<T>& state, std::span<const TokenSequence> batch) {
  check_batch(params, batch);
  const FlushDenormals ftz;
  const auto& cfg = state.config;
  Parameters<T> grads = params.zeros_like();
  const double positions = static_cast<double>(batch.size() * (params.config.seq_len - 1));
  const std::uint64_t dropout_seed = derive_seed(params.config.seed, "dropout");
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const DropoutKey key{dropout_seed, state.step, b};
    loss_sum += accumulate_gradients(params, batch[b], 1.0 / positions, grads, &key);
  }
  const double loss = loss_sum / positions;

  double sq = 0.0;
  double max_abs = 0.0;
  for (const auto& t : grads.tensors) {
    for (auto g : t.values) {
      const double gd = static_cast<double>(g);
      sq += gd * gd;
      max_abs = std::max(max_abs, std::abs(gd));
    }
  }
  if (!std::isfinite(loss) || !std::isfinite(sq)) {
    throw NumericError("train_step: non-finite loss at step " + std::to_string(state.step) + " (loss " +
                       std::to_string(loss) + ", max |gradient| " + std::to_string(max_abs) + ")");
  }
  const double norm = std::sqrt(sq);
  const double clip = (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) ? cfg.grad_clip / norm : 1.0;

  const double lr = learning_rate_at(cfg, state.step);
  const double t = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T step_size = static_cast<T>(lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(cfg.epsilon);
  const T clip_t = static_cast<T>(clip);
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    auto& p = params.tensors[i];
    const auto& g = grads.tensors[i].values;
    auto& m = state.m[i];
    auto& v = state.v[i];
    const T decay = is_decayed(p.name, p.shape.size()) ? static_cast<T>(lr * cfg.weight_decay) : T(0);
    for (std::size_t k = 0; k < p.values.size(); ++k) {
      const T gk = g[k] * clip_t;
      m[k] = b1 * m[k] + (T(1) - b1) * gk;
      v[k] = b2 * v[k] + (T(1) - b2) * gk * gk;
      p.values[k] -= step_size * m[k] / (std::sqrt(v[k]) * inv_sqrt_bc2 + eps) + decay * p.values[k];
    }
  }
  state.step += 1;
  return StepResult{loss, lr, norm};
}

template <typename T>
double evaluate_loss(const Parameters<T>& params, std::span<const TokenSequence> batch) {
  double loss = 0.0;
  double positions = 0.0;
  for (const auto& seq : batch) {
    const auto logp = forward_logprobs(params, seq);
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      loss -= static_cast<double>(logp(static_cast<Eigen::Index>(i), seq[i + 1]));
    }
    positions += static_cast<double>(seq.size() - 1);
  }
  return loss / positions;
}

template OptimizerState<float> init_optimizer<float>(const Parameters<float>&, const AdamConfig&);
template OptimizerState<double> init_optimizer<double>(const Parameters<double>&, const AdamConfig&);
template StepResult train_step<float>(Parameters<float>&, OptimizerState<float>&, std::span<const TokenSequence>);
template StepResult train_step<double>(Parameters<double>&, OptimizerState<double>&, std::span<const TokenSequence>);
template double evaluate_loss<float>(const Parameters<float>&, std::span<const TokenSequence>);
template double evaluate_loss<double>(const Parameters<double>&, std::span<const TokenSequence>);

}  // namespace xlp
