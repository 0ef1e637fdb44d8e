#pragma once

#include <type_traits>

#include <Eigen/Core>

#include "gqcnn/tensor.hpp"

namespace gqcnn::detail {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MatMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstMatMap = Eigen::Map<const RowMatrix<Scalar>>;

// Double precision is the verification precision: its products are summed
// strictly left to right over the inner index, starting from zero, so results
// are reproducible by a plain nested loop. Single precision goes through
// Eigen's blocked GEMM.
template <typename Scalar>
inline constexpr bool kExactOrder = std::is_same_v<Scalar, double>;

/// c = op(a) * op(b), or c += op(a) * op(b) when `accumulate`.
template <typename Scalar>
void gemm(ConstMatMap<Scalar> a, bool trans_a, ConstMatMap<Scalar> b, bool trans_b,
          MatMap<Scalar> c, bool accumulate) {
  if constexpr (kExactOrder<Scalar>) {
    const Index inner = trans_a ? a.rows() : a.cols();
    for (Index i = 0; i < c.rows(); ++i) {
      for (Index j = 0; j < c.cols(); ++j) {
        Scalar acc = accumulate ? c(i, j) : Scalar(0);
        for (Index k = 0; k < inner; ++k) {
          const Scalar lhs = trans_a ? a(k, i) : a(i, k);
          const Scalar rhs = trans_b ? b(j, k) : b(k, j);
          acc += lhs * rhs;
        }
        c(i, j) = acc;
      }
    }
  } else {
    auto run = [&](const auto& lhs, const auto& rhs) {
      if (accumulate) {
        c.noalias() += lhs * rhs;
      } else {
        c.noalias() = lhs * rhs;
      }
    };
    if (trans_a && trans_b) {
      run(a.transpose(), b.transpose());
    } else if (trans_a) {
      run(a.transpose(), b);
    } else if (trans_b) {
      run(a, b.transpose());
    } else {
      run(a, b);
    }
  }
}

struct ConvGeometry {
  Index channels, height, width;
  Index kernel_h, kernel_w;
  Index out_h, out_w;
  int stride, padding;

  Index patch() const { return channels * kernel_h * kernel_w; }
  Index positions() const { return out_h * out_w; }
};

/// Unfolds one CHW image into a row-major [outH*outW, C*kH*kW] matrix: one row
/// per output position, patch entries ordered channel, kernel row, kernel column.
template <typename Scalar>
void im2col(const Scalar* image, const ConvGeometry& g, Scalar* cols) {
  Scalar* dst = cols;
  for (Index oy = 0; oy < g.out_h; ++oy) {
    for (Index ox = 0; ox < g.out_w; ++ox) {
      for (Index c = 0; c < g.channels; ++c) {
        for (Index ky = 0; ky < g.kernel_h; ++ky) {
          const Index y = oy * g.stride - g.padding + ky;
          if (y < 0 || y >= g.height) {
            for (Index kx = 0; kx < g.kernel_w; ++kx) *dst++ = Scalar(0);
            continue;
          }
          const Scalar* src = image + (c * g.height + y) * g.width;
          for (Index kx = 0; kx < g.kernel_w; ++kx) {
            const Index x = ox * g.stride - g.padding + kx;
            *dst++ = (x >= 0 && x < g.width) ? src[x] : Scalar(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters-and-adds a patch matrix back onto a CHW image.
template <typename Scalar>
void col2im_add(const Scalar* cols, const ConvGeometry& g, Scalar* image) {
  const Scalar* src = cols;
  for (Index oy = 0; oy < g.out_h; ++oy) {
    for (Index ox = 0; ox < g.out_w; ++ox) {
      for (Index c = 0; c < g.channels; ++c) {
        for (Index ky = 0; ky < g.kernel_h; ++ky) {
          const Index y = oy * g.stride - g.padding + ky;
          if (y < 0 || y >= g.height) {
            src += g.kernel_w;
            continue;
          }
          Scalar* dst = image + (c * g.height + y) * g.width;
          for (Index kx = 0; kx < g.kernel_w; ++kx, ++src) {
            const Index x = ox * g.stride - g.padding + kx;
            if (x >= 0 && x < g.width) dst[x] += *src;
          }
        }
      }
    }
  }
}

}  // namespace gqcnn::detail
