#pragma once

#include <Eigen/Core>

namespace gqcnn {

/// Row-major depth image; each pixel is a surface height in meters.
using Heightmap = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Pixel statistics pooled over the training split.
struct NormStats {
  double mean = 0;
  double std = 1;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

}  // namespace gqcnn
