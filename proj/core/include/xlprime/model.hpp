#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace xlp {

/// GPT-style decoder: pre-norm blocks, GELU feed-forward, learned absolute positions.
struct ModelConfig {
  std::size_t n_layers = 4;
  std::size_t d_model = 256;
  std::size_t n_heads = 4;
  std::size_t ff_multiplier = 4;
  std::size_t seq_len = 128;
  std::size_t vocab_size = 8192;
  double dropout = 0.0;
  double init_std = 0.02;
  std::uint64_t seed = 0;
  bool tie_embeddings = true;

  /// Throws ConfigError listing every invalid field.
  void validate() const;
  std::size_t d_ff() const { return ff_multiplier * d_model; }
  std::size_t head_dim() const { return d_model / n_heads; }

  bool operator==(const ModelConfig&) const = default;
};

/// Closed-form parameter count.
std::size_t parameter_count(const ModelConfig& config);

/// Parameter storage. Eigen's vectorized kernels peel differently depending on where a
/// buffer starts, so unaligned storage would make results depend on the allocator.
template <typename T>
using Storage = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename T>
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  Storage<T> values;

  std::size_t size() const { return values.size(); }
  T* data() { return values.data(); }
  const T* data() const { return values.data(); }
};

/// Named tensors in a fixed order:
///   wte [V,d], wpe [S,d],
///   per layer: ln1.g, ln1.b, attn.w_qkv [d,3d], attn.b_qkv, attn.w_o [d,d], attn.b_o,
///              ln2.g, ln2.b, mlp.w_fc [d,F], mlp.b_fc, mlp.w_proj [F,d], mlp.b_proj,
///   lnf.g, lnf.b, and lm_head [V,d] when embeddings are untied.
template <typename T>
struct Parameters {
  ModelConfig config;
  std::vector<Tensor<T>> tensors;

  static constexpr std::size_t kPerLayer = 12;
  enum LayerSlot : std::size_t {
    ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o, ln2_g, ln2_b, w_fc, b_fc, w_proj, b_proj
  };

  Tensor<T>& wte() { return tensors[0]; }
  const Tensor<T>& wte() const { return tensors[0]; }
  Tensor<T>& wpe() { return tensors[1]; }
  const Tensor<T>& wpe() const { return tensors[1]; }
  Tensor<T>& layer(std::size_t l, LayerSlot slot) { return tensors[2 + l * kPerLayer + slot]; }
  const Tensor<T>& layer(std::size_t l, LayerSlot slot) const { return tensors[2 + l * kPerLayer + slot]; }
  std::size_t final_index() const { return 2 + config.n_layers * kPerLayer; }
  Tensor<T>& lnf_g() { return tensors[final_index()]; }
  const Tensor<T>& lnf_g() const { return tensors[final_index()]; }
  Tensor<T>& lnf_b() { return tensors[final_index() + 1]; }
  const Tensor<T>& lnf_b() const { return tensors[final_index() + 1]; }
  /// Output projection; the token embedding when tied.
  Tensor<T>& lm_head() { return config.tie_embeddings ? tensors[0] : tensors[final_index() + 2]; }
  const Tensor<T>& lm_head() const { return config.tie_embeddings ? tensors[0] : tensors[final_index() + 2]; }

  std::size_t count() const;
  /// Same shapes and names, every value zero.
  Parameters zeros_like() const;

  template <typename U>
  Parameters<U> cast() const {
    Parameters<U> out;
    out.config = config;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) {
      Tensor<U> u{t.name, t.shape, Storage<U>(t.values.begin(), t.values.end())};
      out.tensors.push_back(std::move(u));
    }
    return out;
  }
};

/// Allocates the named tensors with zero values (layer-norm gains included).
template <typename T>
Parameters<T> allocate_parameters(const ModelConfig& config);

/// Seeded N(0, init_std^2) weights, zero biases, unit layer-norm gains.
template <typename T>
Parameters<T> init_parameters(const ModelConfig& config);

/// True for layer-norm gains and biases.
bool is_layer_norm(const std::string& name);
/// True for tensors that receive decoupled weight decay (matrices and embeddings).
bool is_decayed(const std::string& name, std::size_t rank);

extern template struct Parameters<float>;
extern template struct Parameters<double>;

}  // namespace xlp
