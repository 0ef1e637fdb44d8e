#pragma once

#include <span>
#include <vector>

#include "gqcnn/augment.hpp"
#include "gqcnn/tensor.hpp"

namespace gqcnn::detail {

struct Batch {
  Tensor<float> images;  // [N,1,S,S]
  Tensor<float> depth;   // [N]
  std::vector<std::uint8_t> labels;
};

inline Batch make_batch(std::span<const ModelInput> inputs) {
  const auto n = static_cast<Index>(inputs.size());
  const Index rows = inputs.front().image.rows(), cols = inputs.front().image.cols();
  Storage<float> pixels(n * rows * cols);
  Storage<float> depth(n);
  Batch batch;
  batch.labels.reserve(inputs.size());
  for (Index i = 0; i < n; ++i) {
    const auto& in = inputs[static_cast<std::size_t>(i)];
    if (in.image.rows() != rows || in.image.cols() != cols) {
      throw DimensionError("batch mixes image sizes");
    }
    pixels.segment(i * rows * cols, rows * cols) =
        Eigen::Map<const Storage<float>>(in.image.data(), rows * cols);
    depth[i] = static_cast<float>(in.z);
    batch.labels.push_back(in.label);
  }
  batch.images = Tensor<float>({n, 1, rows, cols}, std::move(pixels));
  batch.depth = Tensor<float>({n}, std::move(depth));
  return batch;
}

}  // namespace gqcnn::detail
