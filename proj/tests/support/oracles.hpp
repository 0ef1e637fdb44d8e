#pragma once

// Reference implementations written directly from the definitions, sharing no
// code with the library kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

struct Array4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Array4(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_), v(std::size_t(n_) * c_ * h_ * w_) {}
  double& at(int a, int b, int y, int x) { return v[((std::size_t(a) * c + b) * h + y) * w + x]; }
  double at(int a, int b, int y, int x) const { return v[((std::size_t(a) * c + b) * h + y) * w + x]; }
};

// Direct six-loop cross-correlation; the inner sum runs over channel, kernel
// row, kernel column in that order, starting from zero.
inline Array4 conv2d(const Array4& in, const Array4& k, int stride, int pad) {
  const int oh = (in.h + 2 * pad - k.h) / stride + 1;
  const int ow = (in.w + 2 * pad - k.w) / stride + 1;
  Array4 out(in.n, k.n, oh, ow);
  for (int n = 0; n < in.n; ++n)
    for (int o = 0; o < k.n; ++o)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double acc = 0;
          for (int c = 0; c < in.c; ++c)
            for (int ky = 0; ky < k.h; ++ky)
              for (int kx = 0; kx < k.w; ++kx) {
                const int iy = y * stride - pad + ky, ix = x * stride - pad + kx;
                const double v = (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) ? 0.0 : in.at(n, c, iy, ix);
                acc += v * k.at(o, c, ky, kx);
              }
          out.at(n, o, y, x) = acc;
        }
  return out;
}

inline Array4 maxpool2d(const Array4& in, int window, int stride) {
  const int oh = (in.h - window) / stride + 1, ow = (in.w - window) / stride + 1;
  Array4 out(in.n, in.c, oh, ow);
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double best = -INFINITY;
          for (int ky = 0; ky < window; ++ky)
            for (int kx = 0; kx < window; ++kx) best = std::fmax(best, in.at(n, c, y * stride + ky, x * stride + kx));
          out.at(n, c, y, x) = best;
        }
  return out;
}

// out[i][j] = sum_k in[i][k] * w[k][j] + b[j], summed over k from zero, bias last.
inline std::vector<double> dense(const std::vector<double>& in, const std::vector<double>& w,
                                 const std::vector<double>& b, int n, int d, int k) {
  std::vector<double> out(std::size_t(n) * k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      double acc = 0;
      for (int q = 0; q < d; ++q) acc += in[std::size_t(i) * d + q] * w[std::size_t(q) * k + j];
      out[std::size_t(i) * k + j] = acc + b[j];
    }
  return out;
}

// Two-pass population mean and standard deviation.
inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  const double mean = s / double(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / double(xs.size()))};
}

// Catmull-Rom weight (a = -0.5) written from the piecewise polynomial.
inline double catmull_rom(double t) {
  t = std::fabs(t);
  if (t < 1) return 1.5 * t * t * t - 2.5 * t * t + 1;
  if (t < 2) return -0.5 * t * t * t + 2.5 * t * t - 4 * t + 2;
  return 0;
}

// Upsampled value at (row, col) as the explicit double sum over grid samples,
// with half-pixel source coordinates and indices clamped to the border.
inline double bicubic_at(const std::vector<std::vector<double>>& grid, int out_size, int row, int col) {
  const int in = int(grid.size());
  const double scale = double(in) / out_size;
  const double sy = (row + 0.5) * scale - 0.5, sx = (col + 0.5) * scale - 0.5;
  const int fy = int(std::floor(sy)), fx = int(std::floor(sx));
  double acc = 0;
  for (int dy = -1; dy <= 2; ++dy)
    for (int dx = -1; dx <= 2; ++dx) {
      const int gy = std::clamp(fy + dy, 0, in - 1), gx = std::clamp(fx + dx, 0, in - 1);
      acc += catmull_rom(sy - (fy + dy)) * catmull_rom(sx - (fx + dx)) * grid[gy][gx];
    }
  return acc;
}

}  // namespace oracle
