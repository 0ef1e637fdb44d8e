#include "gqcnn/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "gqcnn/binary_io.hpp"
#include "gqcnn/tensor_io.hpp"

namespace gqcnn {

namespace {

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::string current;
  for (char ch : text) {
    if (ch == sep) {
      parts.push_back(current);
      current.clear();
    } else if (ch != ' ') {
      current += ch;
    }
  }
  if (!current.empty() || !parts.empty()) parts.push_back(current);
  return parts;
}

std::string join_specs(const std::vector<LayerSpec>& specs) {
  std::string s;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i) s += ",";
    s += to_string(specs[i]);
  }
  return s;
}

int conv_output(int extent, const LayerSpec& spec) {
  const int padding = spec.kernel / 2;
  return (extent + 2 * padding - spec.kernel) / spec.stride + 1;
}

// Spatial extent after the image tower.
int tower_extent(const ModelConfig& config) {
  int extent = config.input_size;
  for (const auto& layer : config.image_tower) {
    extent = layer.kind == LayerSpec::Kind::conv ? conv_output(extent, layer)
                                                  : (extent - layer.kernel) / layer.stride + 1;
  }
  return extent;
}

void check_conv(const LayerSpec& spec, const std::string& where) {
  if (spec.kind != LayerSpec::Kind::conv) throw ConfigError(where + " must be a convolution");
  if (spec.filters <= 0) throw ConfigError(where + ": filter count must be positive");
  if (spec.kernel <= 0 || spec.kernel % 2 == 0) {
    throw ConfigError(where + ": kernel extent must be a positive odd number (same padding)");
  }
  if (spec.stride <= 0) throw ConfigError(where + ": stride must be positive");
}

}  // namespace

std::string to_string(const LayerSpec& spec) {
  if (spec.kind == LayerSpec::Kind::conv) {
    return "conv:" + std::to_string(spec.filters) + ":" + std::to_string(spec.kernel) + ":" +
           std::to_string(spec.stride);
  }
  return "pool:" + std::to_string(spec.kernel) + ":" + std::to_string(spec.stride);
}

LayerSpec parse_layer_spec(std::string_view text) {
  const auto parts = split_list(text, ':');
  auto number = [&](std::size_t i) {
    return static_cast<int>(parse_int(parts[i], "layer spec \"" + std::string(text) + "\""));
  };
  if (parts.size() == 4 && parts[0] == "conv") return LayerSpec::conv(number(1), number(2), number(3));
  if (parts.size() == 3 && parts[0] == "pool") return LayerSpec::maxpool(number(1), number(2));
  throw ConfigError("layer spec \"" + std::string(text) +
                    "\" is neither conv:<filters>:<kernel>:<stride> nor pool:<window>:<stride>");
}

ModelConfig ModelConfig::defaults() {
  ModelConfig config;
  config.image_tower = {LayerSpec::conv(64, 7),     LayerSpec::conv(64, 5),
                        LayerSpec::maxpool(2, 2),   LayerSpec::conv(128, 3),
                        LayerSpec::conv(128, 3),    LayerSpec::maxpool(2, 2)};
  config.merge_channels = 16;
  config.merge = LayerSpec::conv(128, 3);
  config.post_merge = {LayerSpec::conv(128, 3), LayerSpec::conv(128, 3)};
  config.head = {1024, 2};
  return config;
}

void validate(const ModelConfig& config) {
  if (config.input_size <= 0) throw ConfigError("input size must be positive");
  if (config.image_tower.empty()) throw ConfigError("image tower must not be empty");
  if (config.image_tower.back().kind != LayerSpec::Kind::maxpool) {
    throw ConfigError("image tower must end with a max-pool layer");
  }
  int extent = config.input_size;
  for (std::size_t i = 0; i < config.image_tower.size(); ++i) {
    const auto& layer = config.image_tower[i];
    const std::string where = "image tower layer " + std::to_string(i);
    if (layer.kind == LayerSpec::Kind::conv) {
      check_conv(layer, where);
      extent = conv_output(extent, layer);
    } else {
      if (layer.kernel <= 0 || layer.stride <= 0) {
        throw ConfigError(where + ": max-pool window and stride must be positive");
      }
      if (layer.kernel > extent) {
        throw ConfigError(where + ": max-pool window " + std::to_string(layer.kernel) +
                          " exceeds the spatial extent " + std::to_string(extent));
      }
      extent = (extent - layer.kernel) / layer.stride + 1;
    }
  }
  if (config.merge_channels <= 0) throw ConfigError("merge channel count must be positive");
  check_conv(config.merge, "merge layer");
  if (config.post_merge.size() != 2) {
    throw ConfigError("exactly two convolutions must follow the merge, got " +
                      std::to_string(config.post_merge.size()));
  }
  for (std::size_t i = 0; i < config.post_merge.size(); ++i) {
    check_conv(config.post_merge[i], "post-merge layer " + std::to_string(i));
  }
  if (config.head.empty() || config.head.back() != 2) {
    throw ConfigError("classifier head must end in 2 logits");
  }
  for (int width : config.head) {
    if (width <= 0) throw ConfigError("classifier head widths must be positive");
  }
}

Index parameter_count(const ModelConfig& config) {
  Index total = 0;
  Index channels = 1;
  auto conv = [&](const LayerSpec& spec) {
    total += Index(spec.filters) * channels * spec.kernel * spec.kernel + 2 * Index(spec.filters);
    channels = spec.filters;
  };
  for (const auto& layer : config.image_tower) {
    if (layer.kind == LayerSpec::Kind::conv) conv(layer);
  }
  channels += config.merge_channels;
  conv(config.merge);
  int extent = tower_extent(config);
  extent = conv_output(extent, config.merge);
  for (const auto& layer : config.post_merge) {
    conv(layer);
    extent = conv_output(extent, layer);
  }
  Index width = channels * extent * extent;
  for (int out : config.head) {
    total += width * out + out;
    width = out;
  }
  return total;
}

void write_config(KeyValueConfig& out, const ModelConfig& config) {
  out.set_int("model.input_size", config.input_size);
  out.set("model.image_tower", join_specs(config.image_tower));
  out.set_int("model.merge_channels", config.merge_channels);
  out.set("model.merge", to_string(config.merge));
  out.set("model.post_merge", join_specs(config.post_merge));
  std::string head;
  for (std::size_t i = 0; i < config.head.size(); ++i) {
    if (i) head += ",";
    head += std::to_string(config.head[i]);
  }
  out.set("model.head", head);
  out.set_uint("model.init_seed", config.init_seed);
}

ModelConfig read_model_config(const KeyValueConfig& in) {
  ModelConfig config = ModelConfig::defaults();
  if (auto v = in.get_int("model.input_size")) config.input_size = static_cast<int>(*v);
  auto specs = [](const std::string& text) {
    std::vector<LayerSpec> layers;
    for (const auto& part : split_list(text, ',')) layers.push_back(parse_layer_spec(part));
    return layers;
  };
  if (auto v = in.get("model.image_tower")) config.image_tower = specs(*v);
  if (auto v = in.get_int("model.merge_channels")) config.merge_channels = static_cast<int>(*v);
  if (auto v = in.get("model.merge")) config.merge = parse_layer_spec(*v);
  if (auto v = in.get("model.post_merge")) config.post_merge = specs(*v);
  if (auto v = in.get("model.head")) {
    config.head.clear();
    for (const auto& part : split_list(*v, ',')) {
      config.head.push_back(static_cast<int>(parse_int(part, "model.head")));
    }
  }
  if (auto v = in.get_uint("model.init_seed")) config.init_seed = *v;
  return config;
}

template <typename Scalar>
Model<Scalar> Model<Scalar>::build(const ModelConfig& config) {
  validate(config);
  Model model;
  model.config_ = config;
  std::mt19937_64 rng(config.init_seed);

  // Fan-in scaled normal, drawn in double so that both precisions start from
  // the same weights.
  auto init = [&](Shape shape, Index fan_in) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Storage<Scalar> values(numel(shape));
    for (Index i = 0; i < values.size(); ++i) values[i] = static_cast<Scalar>(normal(rng));
    return Tensor<Scalar>(std::move(shape), std::move(values), true);
  };
  Index channels = 1;
  auto conv_block = [&](const std::string& name, const LayerSpec& spec) {
    ConvBlock block;
    block.name = name;
    block.kernels = init({spec.filters, channels, spec.kernel, spec.kernel},
                         channels * spec.kernel * spec.kernel);
    block.bn = BatchNormState<Scalar>::make(spec.filters);
    block.stride = spec.stride;
    block.padding = spec.kernel / 2;
    channels = spec.filters;
    return block;
  };

  for (std::size_t i = 0; i < config.image_tower.size(); ++i) {
    const auto& layer = config.image_tower[i];
    if (layer.kind == LayerSpec::Kind::conv) {
      model.tower_.emplace_back(conv_block("tower." + std::to_string(i), layer));
    } else {
      model.tower_.emplace_back(PoolBlock{layer.kernel, layer.stride});
    }
  }
  channels += config.merge_channels;
  model.merge_ = conv_block("merge", config.merge);
  int extent = conv_output(tower_extent(config), config.merge);
  for (std::size_t i = 0; i < config.post_merge.size(); ++i) {
    model.post_.push_back(conv_block("post." + std::to_string(i), config.post_merge[i]));
    extent = conv_output(extent, config.post_merge[i]);
  }
  Index width = channels * extent * extent;
  for (std::size_t i = 0; i < config.head.size(); ++i) {
    DenseBlock block;
    block.name = "head." + std::to_string(i);
    block.weights = init({width, config.head[i]}, width);
    block.bias = Tensor<Scalar>({Index(config.head[i])}, true);
    width = config.head[i];
    model.head_.push_back(std::move(block));
  }
  model.index_parameters();
  return model;
}

template <typename Scalar>
Model<Scalar> Model<Scalar>::clone() const {
  Model copy;
  copy.config_ = config_;
  copy.input_stats = input_stats;
  auto clone_conv = [](const ConvBlock& block) {
    ConvBlock c = block;
    c.kernels = block.kernels.clone(true);
    c.bn = block.bn.clone();
    return c;
  };
  for (const auto& layer : tower_) {
    if (const auto* conv = std::get_if<ConvBlock>(&layer)) {
      copy.tower_.emplace_back(clone_conv(*conv));
    } else {
      copy.tower_.emplace_back(std::get<PoolBlock>(layer));
    }
  }
  copy.merge_ = clone_conv(merge_);
  for (const auto& block : post_) copy.post_.push_back(clone_conv(block));
  for (const auto& block : head_) {
    copy.head_.push_back({block.name, block.weights.clone(true), block.bias.clone(true)});
  }
  copy.index_parameters();
  return copy;
}

template <typename Scalar>
void Model<Scalar>::index_parameters() {
  parameters_.clear();
  auto add_conv = [&](const ConvBlock& block) {
    parameters_.emplace_back(block.name + ".kernels", block.kernels);
    parameters_.emplace_back(block.name + ".bn.scale", block.bn.scale);
    parameters_.emplace_back(block.name + ".bn.shift", block.bn.shift);
  };
  for (const auto& layer : tower_) {
    if (const auto* conv = std::get_if<ConvBlock>(&layer)) add_conv(*conv);
  }
  add_conv(merge_);
  for (const auto& block : post_) add_conv(block);
  for (const auto& block : head_) {
    parameters_.emplace_back(block.name + ".weights", block.weights);
    parameters_.emplace_back(block.name + ".bias", block.bias);
  }
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::parameter(const std::string& name) const {
  for (const auto& [n, t] : parameters_) {
    if (n == name) return t;
  }
  throw ConfigError("no parameter named " + name);
}

template <typename Scalar>
Index Model<Scalar>::parameter_count() const {
  Index total = 0;
  for (const auto& [name, t] : parameters_) total += t.size();
  return total;
}

template <typename Scalar>
void Model<Scalar>::zero_grad() {
  for (auto& [name, t] : parameters_) t.zero_grad();
}

template <typename Scalar>
std::vector<std::pair<std::string, const BatchNormState<Scalar>*>> Model<Scalar>::batchnorm_states()
    const {
  std::vector<std::pair<std::string, const BatchNormState<Scalar>*>> out;
  for (auto& [name, state] : const_cast<Model*>(this)->batchnorm_states()) out.emplace_back(name, state);
  return out;
}

template <typename Scalar>
std::vector<std::pair<std::string, BatchNormState<Scalar>*>> Model<Scalar>::batchnorm_states() {
  std::vector<std::pair<std::string, BatchNormState<Scalar>*>> out;
  for (auto& layer : tower_) {
    if (auto* conv = std::get_if<ConvBlock>(&layer)) out.emplace_back(conv->name + ".bn", &conv->bn);
  }
  out.emplace_back(merge_.name + ".bn", &merge_.bn);
  for (auto& block : post_) out.emplace_back(block.name + ".bn", &block.bn);
  return out;
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::run_conv(ConvBlock& block, const Tensor<Scalar>& x, Mode mode) {
  return relu(batchnorm(conv2d(x, block.kernels, block.stride, block.padding), block.bn, mode));
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::logits(const Tensor<Scalar>& images, const Tensor<Scalar>& depth,
                                     Mode mode) {
  const Index size = config_.input_size;
  if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != size || images.dim(3) != size) {
    throw DimensionError("model input must be [N,1," + std::to_string(size) + "," +
                         std::to_string(size) + "], got " + to_string(images.shape()));
  }
  if (depth.rank() != 1 || depth.dim(0) != images.dim(0)) {
    throw DimensionError("grasp depth must be [" + std::to_string(images.dim(0)) + "], got " +
                         to_string(depth.shape()));
  }
  Tensor<Scalar> x = images;
  for (auto& layer : tower_) {
    if (auto* conv = std::get_if<ConvBlock>(&layer)) {
      x = run_conv(*conv, x, mode);
    } else {
      const auto& pool = std::get<PoolBlock>(layer);
      x = maxpool2d(x, pool.window, pool.stride);
    }
  }
  const Tensor<Scalar> planes = tile_planes(depth, config_.merge_channels, x.dim(2), x.dim(3));
  x = run_conv(merge_, concat_channels(x, planes), mode);
  for (auto& block : post_) x = run_conv(block, x, mode);
  x = flatten(x);
  for (std::size_t i = 0; i < head_.size(); ++i) {
    x = dense(x, head_[i].weights, head_[i].bias);
    if (i + 1 < head_.size()) x = relu(x);
  }
  return x;
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::forward(const Tensor<Scalar>& images, const Tensor<Scalar>& depth,
                                      Mode mode) {
  return softmax_positive(logits(images, depth, mode));
}

template <typename Scalar>
void save_model(const Model<Scalar>& model, const std::string& path) {
  KeyValueConfig text;
  write_config(text, model.config());
  if (model.input_stats) {
    text.set_real("input.mean", model.input_stats->mean);
    text.set_real("input.std", model.input_stats->std);
  }
  const std::string config_text = text.to_string();

  std::vector<NamedTensor<Scalar>> tensors = model.parameters();
  for (const auto& [name, state] : model.batchnorm_states()) {
    tensors.emplace_back(name + ".running_mean", Tensor<Scalar>({state->channels()}, state->running_mean));
    tensors.emplace_back(name + ".running_var", Tensor<Scalar>({state->channels()}, state->running_var));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  io::write_bytes(out, "GFM1", 4);
  io::write_le<std::uint16_t>(out, kCheckpointVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(config_text.size()));
  io::write_bytes(out, config_text.data(), config_text.size());
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    io::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    io::write_bytes(out, name.data(), name.size());
    write_tensor(out, tensor);
  }
  if (!out) throw IoError("write failed: " + path);
}

template <typename Scalar>
Model<Scalar> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  io::ByteReader reader(in);
  reader.expect_magic("GFM1");
  const auto version = reader.read<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto text_size = reader.read<std::uint32_t>();
  if (text_size > (1u << 24)) throw FormatError("checkpoint config block is implausibly large");
  std::string text(text_size, '\0');
  reader.read_bytes(text.data(), text_size);

  Model<Scalar> model = [&] {
    try {
      const auto kv = KeyValueConfig::parse(text);
      auto built = Model<Scalar>::build(read_model_config(kv));
      auto mean = kv.get_real("input.mean");
      auto std = kv.get_real("input.std");
      if (mean && std) built.input_stats = NormStats{*mean, *std};
      return built;
    } catch (const ConfigError& e) {
      throw FormatError(std::string("checkpoint config block is invalid: ") + e.what());
    }
  }();

  std::vector<std::pair<std::string, Shape>> expected;
  for (const auto& [name, t] : model.parameters()) expected.emplace_back(name, t.shape());
  for (const auto& [name, state] : model.batchnorm_states()) {
    expected.emplace_back(name + ".running_mean", Shape{state->channels()});
    expected.emplace_back(name + ".running_var", Shape{state->channels()});
  }

  const auto count = reader.read<std::uint32_t>();
  if (count != expected.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, the config implies " +
                      std::to_string(expected.size()));
  }
  auto states = model.batchnorm_states();
  for (const auto& [name, shape] : expected) {
    const auto name_size = reader.read<std::uint16_t>();
    std::string stored(name_size, '\0');
    reader.read_bytes(stored.data(), name_size);
    if (stored != name) {
      throw FormatError("checkpoint tensor \"" + stored + "\" at offset " +
                        std::to_string(reader.offset()) + " where \"" + name + "\" was expected");
    }
    Tensor<Scalar> tensor = read_tensor<Scalar>(reader, shape);
    bool placed = false;
    for (auto& [state_name, state] : states) {
      if (name == state_name + ".running_mean") {
        state->running_mean = tensor.values();
        placed = true;
      } else if (name == state_name + ".running_var") {
        state->running_var = tensor.values();
        placed = true;
      }
    }
    if (!placed) model.parameter(name).mutable_values() = tensor.values();
  }
  return model;
}

template class Model<float>;
template class Model<double>;
template void save_model(const Model<float>&, const std::string&);
template void save_model(const Model<double>&, const std::string&);
template Model<float> load_model(const std::string&);
template Model<double> load_model(const std::string&);

}  // namespace gqcnn
