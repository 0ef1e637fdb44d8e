#pragma once

#include <cstdint>
#include <span>

#include "gqcnn/tensor.hpp"

namespace gqcnn {

enum class Mode { train, eval };

/// Per-channel batch normalization parameters and running statistics.
/// `scale` and `shift` are trainable; the running vectors are updated as
/// running = momentum * running + (1 - momentum) * batch.
template <typename Scalar>
struct BatchNormState {
  Tensor<Scalar> scale;
  Tensor<Scalar> shift;
  Storage<Scalar> running_mean;
  Storage<Scalar> running_var;
  Scalar momentum = Scalar(0.9);
  Scalar epsilon = Scalar(1e-5);

  static BatchNormState make(Index channels);
  Index channels() const { return running_mean.size(); }
  BatchNormState clone() const;
};

/// Cross-correlation over NCHW input with OIHW kernels (no bias).
/// Output extent: floor((H + 2*padding - kH) / stride) + 1.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernels, int stride,
                      int padding);

/// Max over square windows. The gradient goes to the first maximal element of
/// each window in row-major order.
template <typename Scalar>
Tensor<Scalar> maxpool2d(const Tensor<Scalar>& input, int window, int stride);

/// Train mode normalizes with batch statistics and updates the running
/// statistics in `state`; eval mode uses the running statistics and leaves
/// `state` untouched.
template <typename Scalar>
Tensor<Scalar> batchnorm(const Tensor<Scalar>& input, BatchNormState<Scalar>& state, Mode mode);

/// input[N,D] * weights[D,K] + bias[K]
template <typename Scalar>
Tensor<Scalar> dense(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                     const Tensor<Scalar>& bias);

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input);

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& input);

/// Mean over rows of -log softmax(logits)[label]. logits is [N,2].
template <typename Scalar>
Tensor<Scalar> softmax_cross_entropy(const Tensor<Scalar>& logits,
                                     std::span<const std::uint8_t> labels);

/// Positive-class softmax probability of [N,2] logits, clamped into the open
/// interval (0,1). Not differentiable; used for prediction only.
template <typename Scalar>
Tensor<Scalar> softmax_positive(const Tensor<Scalar>& logits);

/// Concatenates two NCHW tensors along the channel axis.
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& first, const Tensor<Scalar>& second);

/// Broadcasts a length-N vector into an [N, channels, height, width] block.
template <typename Scalar>
Tensor<Scalar> tile_planes(const Tensor<Scalar>& values, Index channels, Index height,
                           Index width);

/// [N, ...] -> [N, rest]
template <typename Scalar>
Tensor<Scalar> flatten(const Tensor<Scalar>& input);

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& input);

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return add(a, b);
}

template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return mul(a, b);
}

}  // namespace gqcnn
