#include "gqcnn/self_check.hpp"

#include <random>

#include "gqcnn/grad_check.hpp"
#include "gqcnn/ops.hpp"
#include "gqcnn/rng.hpp"

namespace gqcnn {

namespace {

using T = Tensor<double>;

T random_tensor(Shape shape, Rng& rng) {
  std::normal_distribution<double> normal;
  T t(std::move(shape));
  for (auto& v : t.mutable_values()) v = normal(rng);
  return t;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// sum(op(x) * r) for a fixed random r: every output element gets its own weight.
ScalarFunction<double> weighted(std::function<T(const T&)> op, const T& probe, Rng& rng) {
  const T weights = random_tensor(op(probe).shape(), rng);
  return [op = std::move(op), weights](const T& x) { return sum(op(x) * weights); };
}

void record(std::vector<GradCheckResult>& out, const std::string& name, double error) {
  for (auto& r : out) {
    if (r.name == name) {
      r.max_error = std::max(r.max_error, error);
      return;
    }
  }
  out.push_back({name, error});
}

}  // namespace

ModelConfig tiny_model_config(std::uint64_t init_seed) {
  ModelConfig c;
  c.input_size = 4;
  c.image_tower = {LayerSpec::conv(2, 3), LayerSpec::conv(2, 3), LayerSpec::maxpool(2, 2)};
  c.merge_channels = 2;
  c.merge = LayerSpec::conv(2, 3);
  c.post_merge = {LayerSpec::conv(2, 3), LayerSpec::conv(2, 3)};
  c.head = {4, 2};
  c.init_seed = init_seed;
  return c;
}

std::vector<GradCheckResult> check_primitives(std::uint64_t seed, double epsilon) {
  Rng rng(derive_seed({seed, 0x636865636b}));
  std::vector<GradCheckResult> results;

  {
    const int n = uniform_int(rng, 1, 3), c = uniform_int(rng, 1, 3), f = uniform_int(rng, 1, 3);
    const int h = uniform_int(rng, 3, 6), w = uniform_int(rng, 3, 6);
    const int stride = uniform_int(rng, 1, 2), padding = uniform_int(rng, 0, 1);
    const int k = uniform_int(rng, 1, 3);
    T x = random_tensor({n, c, h, w}, rng);
    T kernels = random_tensor({f, c, k, k}, rng);
    auto by_input = weighted([&](const T& v) { return conv2d(v, kernels, stride, padding); }, x, rng);
    record(results, "conv2d.input", grad_check(by_input, x, epsilon));
    auto by_kernel = weighted([&](const T& v) { return conv2d(x, v, stride, padding); }, kernels, rng);
    record(results, "conv2d.kernels", grad_check(by_kernel, kernels, epsilon));
  }
  {
    const int window = uniform_int(rng, 1, 3), stride = uniform_int(rng, 1, 2);
    T x = random_tensor({uniform_int(rng, 1, 2), uniform_int(rng, 1, 3), uniform_int(rng, window, 6),
                         uniform_int(rng, window, 6)},
                        rng);
    auto f = weighted([&](const T& v) { return maxpool2d(v, window, stride); }, x, rng);
    record(results, "maxpool2d.input", grad_check(f, x, epsilon));
  }
  for (Mode mode : {Mode::train, Mode::eval}) {
    const std::string name = mode == Mode::train ? "batchnorm.train" : "batchnorm.eval";
    const int c = uniform_int(rng, 1, 3);
    T x = random_tensor({uniform_int(rng, 2, 3), c, uniform_int(rng, 1, 4), uniform_int(rng, 1, 4)}, rng);
    auto state = BatchNormState<double>::make(c);
    state.scale = random_tensor({c}, rng);
    state.shift = random_tensor({c}, rng);
    std::uniform_real_distribution<double> positive(0.5, 2.0);
    for (auto& v : state.running_var) v = positive(rng);
    state.running_mean = random_tensor({c}, rng).values();
    auto by_input = weighted([&](const T& v) { return batchnorm(v, state, mode); }, x, rng);
    record(results, name + ".input", grad_check(by_input, x, epsilon));
    auto by_scale = weighted(
        [&](const T& v) {
          auto s = state;
          s.scale = v;
          return batchnorm(x, s, mode);
        },
        state.scale, rng);
    record(results, name + ".scale", grad_check(by_scale, state.scale, epsilon));
    auto by_shift = weighted(
        [&](const T& v) {
          auto s = state;
          s.shift = v;
          return batchnorm(x, s, mode);
        },
        state.shift, rng);
    record(results, name + ".shift", grad_check(by_shift, state.shift, epsilon));
  }
  {
    const int n = uniform_int(rng, 1, 4), d = uniform_int(rng, 1, 6), k = uniform_int(rng, 1, 4);
    T x = random_tensor({n, d}, rng), w = random_tensor({d, k}, rng), b = random_tensor({k}, rng);
    auto by_input = weighted([&](const T& v) { return dense(v, w, b); }, x, rng);
    record(results, "dense.input", grad_check(by_input, x, epsilon));
    auto by_weights = weighted([&](const T& v) { return dense(x, v, b); }, w, rng);
    record(results, "dense.weights", grad_check(by_weights, w, epsilon));
    auto by_bias = weighted([&](const T& v) { return dense(x, w, v); }, b, rng);
    record(results, "dense.bias", grad_check(by_bias, b, epsilon));
  }
  {
    // relu composed with a dense layer so the kink sits inside the graph.
    const int n = uniform_int(rng, 1, 4), d = uniform_int(rng, 1, 5), k = uniform_int(rng, 1, 5);
    T x = random_tensor({n, d}, rng), w = random_tensor({d, k}, rng), b = random_tensor({k}, rng);
    auto f = weighted([&](const T& v) { return relu(dense(x, v, b)); }, w, rng);
    record(results, "relu", grad_check(f, w, epsilon));
  }
  {
    T x = random_tensor({uniform_int(rng, 1, 4), uniform_int(rng, 1, 4)}, rng);
    auto f = weighted([](const T& v) { return sigmoid(v); }, x, rng);
    record(results, "sigmoid", grad_check(f, x, epsilon));
  }
  {
    const int n = uniform_int(rng, 1, 5);
    T logits = random_tensor({n, 2}, rng);
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(n));
    for (auto& l : labels) l = static_cast<std::uint8_t>(uniform_int(rng, 0, 1));
    ScalarFunction<double> f = [&](const T& v) { return softmax_cross_entropy(v, labels); };
    record(results, "softmax_cross_entropy", grad_check(f, logits, epsilon));
  }
  return results;
}

std::vector<GradCheckResult> check_model(std::uint64_t seed, double epsilon) {
  Rng rng(derive_seed({seed, 0x6d6f64656c}));
  auto model = Model<double>::build(tiny_model_config(seed));
  // Zero biases put the head exactly on a relu kink whenever a flattened
  // row is all zero, so check at a generic point instead.
  std::normal_distribution<double> offset(0.0, 0.1);
  for (const auto& [name, param] : model.parameters()) {
    if (name.ends_with(".bias") || name.ends_with(".shift")) {
      T handle = param;
      for (auto& v : handle.mutable_values()) v = offset(rng);
    }
  }
  const int n = 3;
  T images = random_tensor({n, 1, 4, 4}, rng);
  T depth = random_tensor({n}, rng);
  std::vector<std::uint8_t> labels(n);
  for (auto& l : labels) l = static_cast<std::uint8_t>(uniform_int(rng, 0, 1));

  std::vector<GradCheckResult> results;
  ScalarFunction<double> by_images = [&](const T& v) {
    return softmax_cross_entropy(model.logits(v, depth, Mode::train), labels);
  };
  record(results, "model.images", grad_check(by_images, images, epsilon));
  for (const auto& [name, param] : model.parameters()) {
    T point = param;
    ScalarFunction<double> f = [&](const T&) {
      return softmax_cross_entropy(model.logits(images, depth, Mode::train), labels);
    };
    record(results, "model." + name, grad_check(f, point, epsilon));
  }
  return results;
}

}  // namespace gqcnn
