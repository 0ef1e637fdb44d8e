#pragma once

#include <cmath>

#include <Eigen/Core>

namespace gqcnn {

/// Keys' cubic convolution kernel; a = -0.5 is the Catmull-Rom variant.
inline double cubic_kernel(double x, double a = -0.5) {
  x = std::abs(x);
  if (x <= 1) return ((a + 2) * x - (a + 3)) * x * x + 1;
  if (x < 2) return ((a * x - 5 * a) * x + 8 * a) * x - 4 * a;
  return 0;
}

/// Source position of output sample `dst` under the half-pixel convention.
inline double source_coordinate(Eigen::Index dst, Eigen::Index in, Eigen::Index out) {
  return (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
}

/// [out x in] resampling matrix of 1-D cubic convolution. Taps that fall
/// outside [0, in) are clamped to the border sample.
Eigen::MatrixXd bicubic_weights(Eigen::Index in, Eigen::Index out);

/// Separable bicubic resize: R_rows * grid * R_cols^T.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
bicubic_upsample(const Eigen::MatrixBase<Derived>& grid, Eigen::Index out_rows, Eigen::Index out_cols) {
  using Scalar = typename Derived::Scalar;
  const Eigen::MatrixXd rows = bicubic_weights(grid.rows(), out_rows);
  const Eigen::MatrixXd cols = bicubic_weights(grid.cols(), out_cols);
  return (rows * grid.template cast<double>() * cols.transpose()).template cast<Scalar>();
}

}  // namespace gqcnn
