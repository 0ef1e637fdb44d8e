#include "gqcnn/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "gqcnn/parallel.hpp"
#include "kernels.hpp"

namespace gqcnn {

namespace {

using detail::ConstMatMap;
using detail::MatMap;
using detail::RowMatrix;

// Samples per work unit for batched kernels. Fixed so that reductions across
// the batch happen in the same order whatever the thread count.
constexpr Index kChunk = 8;

void require_rank(const Shape& shape, std::size_t rank, const char* op, const char* what) {
  if (shape.size() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                         ", got shape " + to_string(shape));
  }
}

// Per-thread working memory reused across calls. Large fresh allocations are
// page-faulted in on every touch, which costs more than the arithmetic.
template <typename Scalar>
Scalar* scratch(std::size_t slot, Index size) {
  thread_local std::array<std::vector<Scalar>, 3> buffers;
  auto& buffer = buffers.at(slot);
  if (buffer.size() < static_cast<std::size_t>(size)) buffer.resize(static_cast<std::size_t>(size));
  return buffer.data();
}

template <typename Scalar>
void accumulate(detail::Node<Scalar>& node, const Storage<Scalar>& delta) {
  if (node.requires_grad) node.grad_buffer() += delta;
}

}  // namespace

template <typename Scalar>
BatchNormState<Scalar> BatchNormState<Scalar>::make(Index channels) {
  BatchNormState state;
  state.scale = Tensor<Scalar>::full({channels}, Scalar(1), true);
  state.shift = Tensor<Scalar>::full({channels}, Scalar(0), true);
  state.running_mean = Storage<Scalar>::Zero(channels);
  state.running_var = Storage<Scalar>::Ones(channels);
  return state;
}

template <typename Scalar>
BatchNormState<Scalar> BatchNormState<Scalar>::clone() const {
  BatchNormState copy = *this;
  copy.scale = scale.clone(scale.requires_grad());
  copy.shift = shift.clone(shift.requires_grad());
  return copy;
}

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernels, int stride,
                      int padding) {
  require_rank(input.shape(), 4, "conv2d", "input");
  require_rank(kernels.shape(), 4, "conv2d", "kernels");
  if (stride <= 0) throw DimensionError("conv2d: stride must be positive");
  if (padding < 0) throw DimensionError("conv2d: padding must be non-negative");
  const Index batch = input.dim(0);
  detail::ConvGeometry g{input.dim(1), input.dim(2), input.dim(3), kernels.dim(2), kernels.dim(3),
                         0, 0, stride, padding};
  const Index filters = kernels.dim(0);
  if (kernels.dim(1) != g.channels) {
    throw DimensionError("conv2d: input channel axis (1) has extent " + std::to_string(g.channels) +
                         " but kernel channel axis (1) has extent " + std::to_string(kernels.dim(1)));
  }
  if (g.kernel_h > g.height + 2 * padding || g.kernel_w > g.width + 2 * padding) {
    throw DimensionError("conv2d: kernel spatial axes (2,3) " + to_string(kernels.shape()) +
                         " exceed padded input spatial axes (2,3) of " + to_string(input.shape()) +
                         " with padding " + std::to_string(padding));
  }
  g.out_h = (g.height + 2 * padding - g.kernel_h) / stride + 1;
  g.out_w = (g.width + 2 * padding - g.kernel_w) / stride + 1;

  const Index in_plane = g.channels * g.height * g.width;
  const Index positions = g.positions();
  const Index out_plane = filters * positions;
  Storage<Scalar> out(batch * out_plane);
  const Scalar* x = input.data();
  const Scalar* w = kernels.data();
  const std::size_t chunks = static_cast<std::size_t>((batch + kChunk - 1) / kChunk);

  // Samples are unfolded one at a time into a [positions, patch] matrix; the
  // working set then stays in cache.
  parallel_for(chunks, [&](std::size_t chunk) {
    MatMap<Scalar> cols(scratch<Scalar>(0, positions * g.patch()), positions, g.patch());
    MatMap<Scalar> y(scratch<Scalar>(1, positions * filters), positions, filters);
    const Index begin = static_cast<Index>(chunk) * kChunk;
    const Index end = std::min(batch, begin + kChunk);
    for (Index n = begin; n < end; ++n) {
      detail::im2col(x + n * in_plane, g, cols.data());
      detail::gemm<Scalar>(ConstMatMap<Scalar>(cols.data(), positions, g.patch()), false,
                           ConstMatMap<Scalar>(w, filters, g.patch()), true, y, false);
      MatMap<Scalar>(out.data() + n * out_plane, filters, positions) = y.transpose();
    }
  });

  Shape shape{batch, filters, g.out_h, g.out_w};
  return Tensor<Scalar>::from_op(
      shape, std::move(out), {input.node(), kernels.node()},
      [g, batch, filters, in_plane, positions, out_plane, chunks](detail::Node<Scalar>& self) {
        auto& in = *self.inputs[0];
        auto& ker = *self.inputs[1];
        const Scalar* dy = self.grad.data();
        Scalar* dx = in.requires_grad ? in.grad_buffer().data() : nullptr;
        std::vector<RowMatrix<Scalar>> partial(ker.requires_grad ? chunks : 0);

        parallel_for(chunks, [&](std::size_t chunk) {
          MatMap<Scalar> cols(scratch<Scalar>(0, positions * g.patch()), positions, g.patch());
          MatMap<Scalar> dy_rows(scratch<Scalar>(1, positions * filters), positions, filters);
          if (ker.requires_grad) partial[chunk] = RowMatrix<Scalar>::Zero(filters, g.patch());
          const Index begin = static_cast<Index>(chunk) * kChunk;
          const Index end = std::min(batch, begin + kChunk);
          for (Index n = begin; n < end; ++n) {
            dy_rows = ConstMatMap<Scalar>(dy + n * out_plane, filters, positions).transpose();
            if (ker.requires_grad) {
              detail::im2col(in.value.data() + n * in_plane, g, cols.data());
              detail::gemm<Scalar>(ConstMatMap<Scalar>(dy_rows.data(), positions, filters), true,
                                   ConstMatMap<Scalar>(cols.data(), positions, g.patch()), false,
                                   MatMap<Scalar>(partial[chunk].data(), filters, g.patch()), true);
            }
            if (dx) {
              detail::gemm<Scalar>(ConstMatMap<Scalar>(dy_rows.data(), positions, filters), false,
                                   ConstMatMap<Scalar>(ker.value.data(), filters, g.patch()), false, cols,
                                   false);
              detail::col2im_add(cols.data(), g, dx + n * in_plane);
            }
          }
        });

        if (ker.requires_grad) {
          auto& dw = ker.grad_buffer();
          for (const auto& p : partial) {
            dw += Eigen::Map<const Storage<Scalar>>(p.data(), p.size());
          }
        }
      });
}

template <typename Scalar>
Tensor<Scalar> maxpool2d(const Tensor<Scalar>& input, int window, int stride) {
  require_rank(input.shape(), 4, "maxpool2d", "input");
  if (window <= 0 || stride <= 0) throw DimensionError("maxpool2d: window and stride must be positive");
  const Index batch = input.dim(0), channels = input.dim(1), height = input.dim(2),
              width = input.dim(3);
  if (window > height || window > width) {
    throw DimensionError("maxpool2d: window " + std::to_string(window) +
                         " exceeds input spatial axes (2,3) of " + to_string(input.shape()));
  }
  const Index out_h = (height - window) / stride + 1;
  const Index out_w = (width - window) / stride + 1;
  Storage<Scalar> out(batch * channels * out_h * out_w);
  std::vector<Index> argmax(static_cast<std::size_t>(out.size()));
  const Scalar* x = input.data();

  Index o = 0;
  for (Index plane = 0; plane < batch * channels; ++plane) {
    const Scalar* src = x + plane * height * width;
    for (Index oy = 0; oy < out_h; ++oy) {
      for (Index ox = 0; ox < out_w; ++ox, ++o) {
        Index best = (oy * stride) * width + ox * stride;
        for (Index ky = 0; ky < window; ++ky) {
          for (Index kx = 0; kx < window; ++kx) {
            const Index idx = (oy * stride + ky) * width + ox * stride + kx;
            if (src[idx] > src[best]) best = idx;
          }
        }
        out[o] = src[best];
        argmax[static_cast<std::size_t>(o)] = plane * height * width + best;
      }
    }
  }

  return Tensor<Scalar>::from_op(
      {batch, channels, out_h, out_w}, std::move(out), {input.node()},
      [argmax = std::move(argmax)](detail::Node<Scalar>& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        auto& dx = in.grad_buffer();
        for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += self.grad[static_cast<Index>(i)];
      });
}

template <typename Scalar>
Tensor<Scalar> batchnorm(const Tensor<Scalar>& input, BatchNormState<Scalar>& state, Mode mode) {
  require_rank(input.shape(), 4, "batchnorm", "input");
  const Index batch = input.dim(0), channels = input.dim(1);
  const Index plane = input.dim(2) * input.dim(3);
  if (channels != state.channels() || state.scale.size() != channels ||
      state.shift.size() != channels) {
    throw DimensionError("batchnorm: input channel axis (1) has extent " +
                         std::to_string(channels) + " but state has " +
                         std::to_string(state.channels()) + " channels");
  }
  const Index count = batch * plane;
  const Scalar* x = input.data();
  const Scalar* scale = state.scale.data();
  const Scalar* shift = state.shift.data();

  Storage<Scalar> normalized(input.size());
  Storage<Scalar> inv_std(channels);
  Storage<Scalar> out(input.size());

  for (Index c = 0; c < channels; ++c) {
    Scalar mean, var;
    if (mode == Mode::train) {
      double total = 0;
      for (Index n = 0; n < batch; ++n) {
        const Scalar* p = x + (n * channels + c) * plane;
        for (Index i = 0; i < plane; ++i) total += p[i];
      }
      const double batch_mean = total / static_cast<double>(count);
      double squares = 0;
      for (Index n = 0; n < batch; ++n) {
        const Scalar* p = x + (n * channels + c) * plane;
        for (Index i = 0; i < plane; ++i) {
          const double d = p[i] - batch_mean;
          squares += d * d;
        }
      }
      const double batch_var = squares / static_cast<double>(count);
      mean = static_cast<Scalar>(batch_mean);
      var = static_cast<Scalar>(batch_var);
      const double unbiased =
          count > 1 ? batch_var * static_cast<double>(count) / static_cast<double>(count - 1)
                    : batch_var;
      state.running_mean[c] = state.momentum * state.running_mean[c] + (1 - state.momentum) * mean;
      state.running_var[c] = state.momentum * state.running_var[c] +
                             (1 - state.momentum) * static_cast<Scalar>(unbiased);
    } else {
      mean = state.running_mean[c];
      var = state.running_var[c];
    }
    const Scalar istd = Scalar(1) / std::sqrt(var + state.epsilon);
    inv_std[c] = istd;
    for (Index n = 0; n < batch; ++n) {
      const Index base = (n * channels + c) * plane;
      for (Index i = 0; i < plane; ++i) {
        const Scalar xhat = (x[base + i] - mean) * istd;
        normalized[base + i] = xhat;
        out[base + i] = scale[c] * xhat + shift[c];
      }
    }
  }

  return Tensor<Scalar>::from_op(
      input.shape(), std::move(out), {input.node(), state.scale.node(), state.shift.node()},
      [normalized = std::move(normalized), inv_std = std::move(inv_std), batch, channels, plane,
       count, mode](detail::Node<Scalar>& self) {
        auto& in = *self.inputs[0];
        auto& scale_node = *self.inputs[1];
        auto& shift_node = *self.inputs[2];
        const Scalar* dy = self.grad.data();
        Storage<Scalar> dscale = Storage<Scalar>::Zero(channels);
        Storage<Scalar> dshift = Storage<Scalar>::Zero(channels);
        Scalar* dx = in.requires_grad ? in.grad_buffer().data() : nullptr;
        for (Index c = 0; c < channels; ++c) {
          double sum_dy = 0, sum_dy_xhat = 0;
          for (Index n = 0; n < batch; ++n) {
            const Index base = (n * channels + c) * plane;
            for (Index i = 0; i < plane; ++i) {
              sum_dy += dy[base + i];
              sum_dy_xhat += static_cast<double>(dy[base + i]) * normalized[base + i];
            }
          }
          dscale[c] = static_cast<Scalar>(sum_dy_xhat);
          dshift[c] = static_cast<Scalar>(sum_dy);
          if (!dx) continue;
          const Scalar gamma = scale_node.value[c];
          if (mode == Mode::train) {
            // d/dx of gamma * (x - mean(x)) / std(x), with the batch statistics
            // depending on x.
            const Scalar mean_dy = static_cast<Scalar>(sum_dy / static_cast<double>(count));
            const Scalar mean_dy_xhat = static_cast<Scalar>(sum_dy_xhat / static_cast<double>(count));
            const Scalar factor = gamma * inv_std[c];
            for (Index n = 0; n < batch; ++n) {
              const Index base = (n * channels + c) * plane;
              for (Index i = 0; i < plane; ++i) {
                dx[base + i] += factor * (dy[base + i] - mean_dy - normalized[base + i] * mean_dy_xhat);
              }
            }
          } else {
            const Scalar factor = gamma * inv_std[c];
            for (Index n = 0; n < batch; ++n) {
              const Index base = (n * channels + c) * plane;
              for (Index i = 0; i < plane; ++i) dx[base + i] += factor * dy[base + i];
            }
          }
        }
        accumulate(scale_node, dscale);
        accumulate(shift_node, dshift);
      });
}

template <typename Scalar>
Tensor<Scalar> dense(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                     const Tensor<Scalar>& bias) {
  require_rank(input.shape(), 2, "dense", "input");
  require_rank(weights.shape(), 2, "dense", "weights");
  require_rank(bias.shape(), 1, "dense", "bias");
  const Index rows = input.dim(0), inner = input.dim(1), outputs = weights.dim(1);
  if (weights.dim(0) != inner) {
    throw DimensionError("dense: input axis 1 has extent " + std::to_string(inner) +
                         " but weights axis 0 has extent " + std::to_string(weights.dim(0)));
  }
  if (bias.dim(0) != outputs) {
    throw DimensionError("dense: weights axis 1 has extent " + std::to_string(outputs) +
                         " but bias axis 0 has extent " + std::to_string(bias.dim(0)));
  }
  Storage<Scalar> out(rows * outputs);
  MatMap<Scalar> y(out.data(), rows, outputs);
  detail::gemm<Scalar>(ConstMatMap<Scalar>(input.data(), rows, inner), false,
                       ConstMatMap<Scalar>(weights.data(), inner, outputs), false, y, false);
  for (Index r = 0; r < rows; ++r) {
    for (Index k = 0; k < outputs; ++k) y(r, k) += bias[k];
  }

  return Tensor<Scalar>::from_op(
      {rows, outputs}, std::move(out), {input.node(), weights.node(), bias.node()},
      [rows, inner, outputs](detail::Node<Scalar>& self) {
        auto& in = *self.inputs[0];
        auto& w = *self.inputs[1];
        auto& b = *self.inputs[2];
        ConstMatMap<Scalar> dy(self.grad.data(), rows, outputs);
        if (in.requires_grad) {
          detail::gemm<Scalar>(dy, false, ConstMatMap<Scalar>(w.value.data(), inner, outputs), true,
                               MatMap<Scalar>(in.grad_buffer().data(), rows, inner), true);
        }
        if (w.requires_grad) {
          detail::gemm<Scalar>(ConstMatMap<Scalar>(in.value.data(), rows, inner), true, dy, false,
                               MatMap<Scalar>(w.grad_buffer().data(), inner, outputs), true);
        }
        if (b.requires_grad) {
          auto& db = b.grad_buffer();
          for (Index r = 0; r < rows; ++r) {
            for (Index k = 0; k < outputs; ++k) db[k] += dy(r, k);
          }
        }
      });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input) {
  Storage<Scalar> out = input.values().max(Scalar(0));
  return Tensor<Scalar>::from_op(input.shape(), std::move(out), {input.node()},
                                 [](detail::Node<Scalar>& self) {
                                   auto& in = *self.inputs[0];
                                   if (!in.requires_grad) return;
                                   in.grad_buffer() +=
                                       (in.value > Scalar(0)).select(self.grad, Scalar(0));
                                 });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& input) {
  Storage<Scalar> out = (Scalar(1) + (-input.values()).exp()).inverse();
  return Tensor<Scalar>::from_op(input.shape(), std::move(out), {input.node()},
                                 [](detail::Node<Scalar>& self) {
                                   auto& in = *self.inputs[0];
                                   if (!in.requires_grad) return;
                                   in.grad_buffer() +=
                                       self.grad * self.value * (Scalar(1) - self.value);
                                 });
}

template <typename Scalar>
Tensor<Scalar> softmax_cross_entropy(const Tensor<Scalar>& logits,
                                     std::span<const std::uint8_t> labels) {
  require_rank(logits.shape(), 2, "softmax_cross_entropy", "logits");
  if (logits.dim(1) != 2) {
    throw DimensionError("softmax_cross_entropy: logits axis 1 must have extent 2, got " +
                         std::to_string(logits.dim(1)));
  }
  const Index rows = logits.dim(0);
  if (static_cast<Index>(labels.size()) != rows) {
    throw DimensionError("softmax_cross_entropy: logits axis 0 has extent " + std::to_string(rows) +
                         " but " + std::to_string(labels.size()) + " labels were given");
  }
  const Scalar* l = logits.data();
  Storage<Scalar> positive(rows);  // softmax probability of class 1
  double total = 0;
  for (Index r = 0; r < rows; ++r) {
    const Scalar a = l[2 * r], b = l[2 * r + 1];
    const Scalar top = std::max(a, b);
    const Scalar lse = top + std::log(std::exp(a - top) + std::exp(b - top));
    total += lse - (labels[static_cast<std::size_t>(r)] ? b : a);
    positive[r] = std::exp(b - lse);
  }
  Storage<Scalar> out(1);
  out[0] = static_cast<Scalar>(total / static_cast<double>(rows));
  std::vector<std::uint8_t> owned(labels.begin(), labels.end());
  return Tensor<Scalar>::from_op(
      {1}, std::move(out), {logits.node()},
      [positive = std::move(positive), owned = std::move(owned), rows](detail::Node<Scalar>& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        auto& dx = in.grad_buffer();
        const Scalar scale = self.grad[0] / static_cast<Scalar>(rows);
        for (Index r = 0; r < rows; ++r) {
          const Scalar target = owned[static_cast<std::size_t>(r)] ? Scalar(1) : Scalar(0);
          // d/dl1 = p1 - y, d/dl0 = -(p1 - y)
          const Scalar diff = positive[r] - target;
          dx[2 * r] -= scale * diff;
          dx[2 * r + 1] += scale * diff;
        }
      });
}

template <typename Scalar>
Tensor<Scalar> softmax_positive(const Tensor<Scalar>& logits) {
  require_rank(logits.shape(), 2, "softmax_positive", "logits");
  if (logits.dim(1) != 2) {
    throw DimensionError("softmax_positive: logits axis 1 must have extent 2, got " +
                         std::to_string(logits.dim(1)));
  }
  const Index rows = logits.dim(0);
  constexpr Scalar eps = std::numeric_limits<Scalar>::epsilon();
  Storage<Scalar> out(rows);
  for (Index r = 0; r < rows; ++r) {
    const Scalar p = Scalar(1) / (Scalar(1) + std::exp(logits[2 * r] - logits[2 * r + 1]));
    out[r] = std::clamp(p, eps, Scalar(1) - eps);
  }
  return Tensor<Scalar>({rows}, std::move(out));
}

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& first, const Tensor<Scalar>& second) {
  require_rank(first.shape(), 4, "concat_channels", "first");
  require_rank(second.shape(), 4, "concat_channels", "second");
  for (int axis : {0, 2, 3}) {
    if (first.dim(axis) != second.dim(axis)) {
      throw DimensionError("concat_channels: axis " + std::to_string(axis) + " differs: " +
                           to_string(first.shape()) + " vs " + to_string(second.shape()));
    }
  }
  const Index batch = first.dim(0), c1 = first.dim(1), c2 = second.dim(1);
  const Index plane = first.dim(2) * first.dim(3);
  Storage<Scalar> out(batch * (c1 + c2) * plane);
  for (Index n = 0; n < batch; ++n) {
    out.segment(n * (c1 + c2) * plane, c1 * plane) = first.values().segment(n * c1 * plane, c1 * plane);
    out.segment((n * (c1 + c2) + c1) * plane, c2 * plane) =
        second.values().segment(n * c2 * plane, c2 * plane);
  }
  return Tensor<Scalar>::from_op(
      {batch, c1 + c2, first.dim(2), first.dim(3)}, std::move(out), {first.node(), second.node()},
      [batch, c1, c2, plane](detail::Node<Scalar>& self) {
        auto& a = *self.inputs[0];
        auto& b = *self.inputs[1];
        for (Index n = 0; n < batch; ++n) {
          if (a.requires_grad) {
            a.grad_buffer().segment(n * c1 * plane, c1 * plane) +=
                self.grad.segment(n * (c1 + c2) * plane, c1 * plane);
          }
          if (b.requires_grad) {
            b.grad_buffer().segment(n * c2 * plane, c2 * plane) +=
                self.grad.segment((n * (c1 + c2) + c1) * plane, c2 * plane);
          }
        }
      });
}

template <typename Scalar>
Tensor<Scalar> tile_planes(const Tensor<Scalar>& values, Index channels, Index height, Index width) {
  require_rank(values.shape(), 1, "tile_planes", "values");
  const Index batch = values.dim(0);
  const Index block = channels * height * width;
  Storage<Scalar> out(batch * block);
  for (Index n = 0; n < batch; ++n) out.segment(n * block, block).setConstant(values[n]);
  return Tensor<Scalar>::from_op({batch, channels, height, width}, std::move(out), {values.node()},
                                 [batch, block](detail::Node<Scalar>& self) {
                                   auto& in = *self.inputs[0];
                                   if (!in.requires_grad) return;
                                   auto& dz = in.grad_buffer();
                                   for (Index n = 0; n < batch; ++n) {
                                     dz[n] += self.grad.segment(n * block, block).sum();
                                   }
                                 });
}

template <typename Scalar>
Tensor<Scalar> flatten(const Tensor<Scalar>& input) {
  if (input.rank() < 1) throw DimensionError("flatten: input must have a batch axis");
  return input.reshape({input.dim(0), input.size() / input.dim(0)});
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& input) {
  Storage<Scalar> out(1);
  out[0] = input.values().sum();
  return Tensor<Scalar>::from_op({1}, std::move(out), {input.node()},
                                 [](detail::Node<Scalar>& self) {
                                   auto& in = *self.inputs[0];
                                   if (in.requires_grad) in.grad_buffer() += self.grad[0];
                                 });
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shapes differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Storage<Scalar> out = a.values() + b.values();
  return Tensor<Scalar>::from_op(a.shape(), std::move(out), {a.node(), b.node()},
                                 [](detail::Node<Scalar>& self) {
                                   accumulate(*self.inputs[0], self.grad);
                                   accumulate(*self.inputs[1], self.grad);
                                 });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: shapes differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Storage<Scalar> out = a.values() * b.values();
  return Tensor<Scalar>::from_op(a.shape(), std::move(out), {a.node(), b.node()},
                                 [](detail::Node<Scalar>& self) {
                                   auto& lhs = *self.inputs[0];
                                   auto& rhs = *self.inputs[1];
                                   // Same node on both sides (x * x) gets both terms.
                                   if (lhs.requires_grad) lhs.grad_buffer() += self.grad * rhs.value;
                                   if (rhs.requires_grad) rhs.grad_buffer() += self.grad * lhs.value;
                                 });
}

#define GQCNN_INSTANTIATE(S)                                                                      \
  template struct BatchNormState<S>;                                                              \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, int, int);                        \
  template Tensor<S> maxpool2d(const Tensor<S>&, int, int);                                       \
  template Tensor<S> batchnorm(const Tensor<S>&, BatchNormState<S>&, Mode);                       \
  template Tensor<S> dense(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);                 \
  template Tensor<S> relu(const Tensor<S>&);                                                      \
  template Tensor<S> sigmoid(const Tensor<S>&);                                                   \
  template Tensor<S> softmax_cross_entropy(const Tensor<S>&, std::span<const std::uint8_t>);       \
  template Tensor<S> softmax_positive(const Tensor<S>&);                                          \
  template Tensor<S> concat_channels(const Tensor<S>&, const Tensor<S>&);                         \
  template Tensor<S> tile_planes(const Tensor<S>&, Index, Index, Index);                          \
  template Tensor<S> flatten(const Tensor<S>&);                                                   \
  template Tensor<S> sum(const Tensor<S>&);                                                       \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                     \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);

GQCNN_INSTANTIATE(float)
GQCNN_INSTANTIATE(double)

#undef GQCNN_INSTANTIATE

}  // namespace gqcnn
