#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gravis/image.hpp"

namespace gravis {

template <typename T>
struct Tensor {
  std::vector<std::size_t> dims;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> d) : dims(std::move(d)) {
    std::size_t n = 1;
    for (std::size_t x : dims) n *= x;
    data.assign(n, T(0));
  }
  std::size_t numel() const { return data.size(); }
};

// Small strided convolutional encoder with a two-layer projection head.
// Stages are 3x3 / stride 2 / pad 1 convolutions with ReLU; a global average
// pool feeds the head, whose output is the embedding.
struct EncoderConfig {
  int input_size = 32;
  int in_channels = 3;
  std::vector<int> stage_channels{16, 32, 64};
  int hidden_dim = 128;
  int embed_dim = 128;

  // Spatial size after each stage.
  std::vector<int> stage_sizes() const;
  bool operator==(const EncoderConfig&) const = default;
};

// Parameter tensors in a fixed order: convK.weight, convK.bias for each
// stage, then fc1.weight, fc1.bias, fc2.weight, fc2.bias.
template <typename T>
struct EncoderParams {
  EncoderConfig config;
  std::vector<Tensor<T>> tensors;

  std::vector<std::string> tensor_names() const;
};

template <typename T>
using ParamGrads = std::vector<Tensor<T>>;

// Everything the backward pass needs from the forward pass.
template <typename T>
struct ActivationCache {
  EncoderConfig config;
  std::size_t num_views = 0;
  // stage_inputs[s]: input of stage s (s = 0 is the normalized image);
  // stage_inputs[stages]: input of the pooling layer.
  std::vector<std::vector<T>> stage_inputs;
  std::vector<std::vector<T>> stage_pre;  // pre-ReLU conv outputs
  std::vector<T> pooled;                  // num_views x C_last
  std::vector<T> fc1_pre;                 // num_views x hidden
  std::vector<T> fc1_post;
};

template <typename T>
struct ForwardResult {
  std::vector<std::vector<double>> embeddings;  // num_views x embed_dim
  ActivationCache<T> cache;
};

template <typename T>
EncoderParams<T> init_encoder_params(const EncoderConfig& cfg,
                                     std::uint64_t seed);

// Pixels are mapped to [0,1] then standardized per channel with fixed
// constants (0.5, 0.5). Throws ShapeMismatch when a view disagrees with the
// configured input size.
template <typename T>
ForwardResult<T> forward(const EncoderParams<T>& params,
                         const std::vector<Image>& views);

// Exact reverse-mode gradients for every parameter. Throws StaleCache when
// the gradient batch does not match the cached forward batch.
template <typename T>
ParamGrads<T> backward(const EncoderParams<T>& params,
                       const ActivationCache<T>& cache,
                       const std::vector<std::vector<double>>& grad_embeddings);

template <typename T>
struct OptimizerState {
  std::vector<Tensor<T>> velocity;  // parallel to EncoderParams::tensors
  double momentum = 0.9;
  double base_lr = 1e-3;
  int epoch_horizon = 240;
  double lr_min = 0.0;
};

template <typename T>
OptimizerState<T> init_optimizer_state(const EncoderParams<T>& params,
                                       double momentum, double base_lr,
                                       int epoch_horizon);

// v <- momentum * v + g;  w <- w - lr * v
template <typename T>
void sgd_momentum_step(EncoderParams<T>& params, const ParamGrads<T>& grads,
                       OptimizerState<T>& state, double lr);

// Cosine annealing from base_lr at epoch 0 down to lr_min at the horizon.
template <typename T>
double cosine_lr(int epoch, const OptimizerState<T>& state);

extern template struct EncoderParams<float>;
extern template struct EncoderParams<double>;

}  // namespace gravis
