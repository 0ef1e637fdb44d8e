#include "gqcnn/bicubic.hpp"

#include <algorithm>

namespace gqcnn {

Eigen::MatrixXd bicubic_weights(Eigen::Index in, Eigen::Index out) {
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(out, in);
  for (Eigen::Index dst = 0; dst < out; ++dst) {
    const double src = source_coordinate(dst, in, out);
    const auto base = static_cast<Eigen::Index>(std::floor(src));
    const double t = src - static_cast<double>(base);
    for (Eigen::Index tap = -1; tap <= 2; ++tap) {
      const Eigen::Index idx = std::clamp<Eigen::Index>(base + tap, 0, in - 1);
      weights(dst, idx) += cubic_kernel(t - static_cast<double>(tap));
    }
  }
  return weights;
}

}  // namespace gqcnn
