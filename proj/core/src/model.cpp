#include "xlprime/model.hpp"

#include "xlprime/error.hpp"
#include "xlprime/rng.hpp"

namespace xlp {

void ModelConfig::validate() const {
  std::string problems;
  auto fail = [&problems](const std::string& msg) {
    if (!problems.empty()) problems += "; ";
    problems += msg;
  };
  if (n_layers == 0) fail("n_layers must be positive");
  if (d_model == 0) fail("d_model must be positive");
  if (n_heads == 0) fail("n_heads must be positive");
  else if (d_model % n_heads != 0) fail("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
  if (ff_multiplier == 0) fail("ff_multiplier must be positive");
  if (seq_len < 2) fail("seq_len must be at least 2");
  if (vocab_size < 2) fail("vocab_size must be at least 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(init_std >= 0.0)) fail("init_std must be non-negative");
  if (!problems.empty()) throw ConfigError("model config: " + problems);
}

std::size_t parameter_count(const ModelConfig& c) {
  const std::size_t d = c.d_model;
  const std::size_t f = c.d_ff();
  const std::size_t per_layer = 2 * d                // ln1
                                + d * 3 * d + 3 * d  // qkv
                                + d * d + d          // attention output
                                + 2 * d              // ln2
                                + d * f + f          // fc
                                + f * d + d;         // proj
  return c.vocab_size * d + c.seq_len * d + c.n_layers * per_layer + 2 * d +
         (c.tie_embeddings ? 0 : c.vocab_size * d);
}

bool is_layer_norm(const std::string& name) {
  return name.rfind("lnf.", 0) == 0 || name.find(".ln1.") != std::string::npos ||
         name.find(".ln2.") != std::string::npos;
}

bool is_decayed(const std::string& /*name*/, std::size_t rank) { return rank == 2; }

template <typename T>
std::size_t Parameters<T>::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

template <typename T>
Parameters<T> Parameters<T>::zeros_like() const {
  Parameters out;
  out.config = config;
  out.tensors.reserve(tensors.size());
  for (const auto& t : tensors) out.tensors.push_back(Tensor<T>{t.name, t.shape, Storage<T>(t.size(), T(0))});
  return out;
}

template <typename T>
Parameters<T> allocate_parameters(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.d_model;
  const std::size_t f = config.d_ff();
  Parameters<T> p;
  p.config = config;
  auto add = [&p](std::string name, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    p.tensors.push_back(Tensor<T>{std::move(name), std::move(shape), Storage<T>(n, T(0))});
  };
  add("wte", {config.vocab_size, d});
  add("wpe", {config.seq_len, d});
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::string h = "h" + std::to_string(l) + ".";
    add(h + "ln1.g", {d});
    add(h + "ln1.b", {d});
    add(h + "attn.w_qkv", {d, 3 * d});
    add(h + "attn.b_qkv", {3 * d});
    add(h + "attn.w_o", {d, d});
    add(h + "attn.b_o", {d});
    add(h + "ln2.g", {d});
    add(h + "ln2.b", {d});
    add(h + "mlp.w_fc", {d, f});
    add(h + "mlp.b_fc", {f});
    add(h + "mlp.w_proj", {f, d});
    add(h + "mlp.b_proj", {d});
  }
  add("lnf.g", {d});
  add("lnf.b", {d});
  if (!config.tie_embeddings) add("lm_head", {config.vocab_size, d});
  return p;
}

template <typename T>
Parameters<T> init_parameters(const ModelConfig& config) {
  auto p = allocate_parameters<T>(config);
  Rng rng(config.seed);
  for (auto& t : p.tensors) {
    if (is_layer_norm(t.name)) {
      if (t.name.back() == 'g') std::fill(t.values.begin(), t.values.end(), T(1));
      continue;
    }
    if (t.shape.size() != 2 || config.init_std == 0.0) continue;
    for (auto& v : t.values) v = static_cast<T>(config.init_std * rng.normal());
  }
  return p;
}

template struct Parameters<float>;
template struct Parameters<double>;
template Parameters<float> allocate_parameters<float>(const ModelConfig&);
template Parameters<double> allocate_parameters<double>(const ModelConfig&);
template Parameters<float> init_parameters<float>(const ModelConfig&);
template Parameters<double> init_parameters<double>(const ModelConfig&);

}  // namespace xlp
