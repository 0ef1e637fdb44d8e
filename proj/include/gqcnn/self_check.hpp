#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gqcnn/model.hpp"

namespace gqcnn {

struct GradCheckResult {
  std::string name;
  double max_error = 0;
};

/// A small network with 2-filter convolutions exercising every layer kind on
/// 4x4 inputs.
ModelConfig tiny_model_config(std::uint64_t init_seed = 0);

/// Double-precision finite-difference checks of each primitive on random
/// shapes and inputs drawn from `seed`: conv2d, maxpool2d, batchnorm (train
/// and eval), dense, relu, sigmoid and softmax cross-entropy. Losses are
/// random linear functionals of the op output.
std::vector<GradCheckResult> check_primitives(std::uint64_t seed, double epsilon = 1e-6);

/// Checks the tiny model's training loss against every parameter tensor and
/// the input images, one result per tensor.
std::vector<GradCheckResult> check_model(std::uint64_t seed, double epsilon = 1e-6);

}  // namespace gqcnn
