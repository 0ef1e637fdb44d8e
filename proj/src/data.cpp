#include "gqcnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "gqcnn/binary_io.hpp"
#include "gqcnn/error.hpp"
#include "gqcnn/rng.hpp"
#include "gqcnn/tensor_io.hpp"

namespace gqcnn {

std::string to_string(SplitKind kind) {
  switch (kind) {
    case SplitKind::image:
      return "image";
    case SplitKind::pose:
      return "pose";
    case SplitKind::object:
      return "object";
  }
  return "image";
}

SplitKind parse_split_kind(const std::string& text) {
  if (text == "image") return SplitKind::image;
  if (text == "pose") return SplitKind::pose;
  if (text == "object") return SplitKind::object;
  throw ConfigError("split kind must be image, pose or object, got \"" + text + "\"");
}

Split split(const Dataset& dataset, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0 && spec.train_fraction < 1)) {
    throw ConfigError("train fraction must lie strictly inside (0,1)");
  }
  using Key = std::pair<std::uint64_t, std::uint64_t>;
  auto key_of = [&](const GraspExample& e) -> Key {
    switch (spec.kind) {
      case SplitKind::image:
        return {e.image_id, 0};
      case SplitKind::pose:
        return {e.object_id, e.pose_id};
      case SplitKind::object:
        return {e.object_id, 0};
    }
    return {};
  };

  std::vector<Key> keys;
  std::map<Key, std::size_t> slot;
  for (const auto& e : dataset) {
    if (slot.emplace(key_of(e), keys.size()).second) keys.push_back(key_of(e));
  }
  if (keys.size() < 2) {
    throw SplitError("a " + to_string(spec.kind) + " split needs at least 2 distinct keys, found " +
                     std::to_string(keys.size()));
  }
  Rng rng(derive_seed({spec.seed, static_cast<std::uint64_t>(spec.kind)}));
  std::vector<std::size_t> order(keys.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  const auto total = static_cast<long>(keys.size());
  const long n_train = std::clamp(std::lround(spec.train_fraction * static_cast<double>(total)), 1L, total - 1);
  std::vector<bool> in_train(keys.size(), false);
  for (long i = 0; i < n_train; ++i) in_train[order[static_cast<std::size_t>(i)]] = true;

  Split result;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (in_train[slot.at(key_of(dataset[i]))] ? result.train : result.val).push_back(i);
  }
  return result;
}

void write_split(const Dataset& dataset, const Split& split, const std::string& path) {
  std::vector<const char*> side(dataset.size(), nullptr);
  for (auto i : split.train) side.at(i) = "train";
  for (auto i : split.val) side.at(i) = "val";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "image_id,set\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!side[i]) throw ContractError("split does not cover dataset position " + std::to_string(i));
    out << dataset[i].image_id << ',' << side[i] << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Split read_split(const Dataset& dataset, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::unordered_map<std::uint64_t, std::size_t> position;
  for (std::size_t i = 0; i < dataset.size(); ++i) position.emplace(dataset[i].image_id, i);
  std::vector<int> side(dataset.size(), -1);
  std::string line;
  std::getline(in, line);
  if (line != "image_id,set") throw FormatError(path + ": missing \"image_id,set\" header");
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(path + ":" + std::to_string(row) + ": expected two fields");
    std::uint64_t id = 0;
    try {
      id = std::stoull(line.substr(0, comma));
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(row) + ": bad image id");
    }
    const std::string set = line.substr(comma + 1);
    auto it = position.find(id);
    if (it == position.end()) {
      throw FormatError(path + ":" + std::to_string(row) + ": image id " + std::to_string(id) +
                        " is not in the dataset");
    }
    if (set != "train" && set != "val") {
      throw FormatError(path + ":" + std::to_string(row) + ": set must be train or val");
    }
    side[it->second] = set == "train" ? 0 : 1;
  }
  Split result;
  for (std::size_t i = 0; i < side.size(); ++i) {
    if (side[i] < 0) throw FormatError(path + ": image id " + std::to_string(dataset[i].image_id) + " missing");
    (side[i] == 0 ? result.train : result.val).push_back(i);
  }
  return result;
}

SceneParams SceneParams::scaled(double gain) const {
  SceneParams p = *this;
  p.height_min *= gain;
  p.height_max *= gain;
  p.stroke_min *= gain;
  p.stroke_max *= gain;
  p.clearance *= gain;
  return p;
}

void validate(const SceneParams& p) {
  if (!(p.stroke_min < p.stroke_max)) throw ConfigError("stroke_min must be below stroke_max");
  if (!(p.clearance > 0)) throw ConfigError("clearance must be positive");
  if (!(p.height_min > 0 && p.height_min <= p.height_max)) throw ConfigError("invalid object height range");
  if (!(p.footprint_min > 0 && p.footprint_min <= p.footprint_max)) {
    throw ConfigError("invalid object footprint range");
  }
  if (p.finger_offset < 1 || p.finger_offset > 15) throw ConfigError("finger offset must lie in [1,15] pixels");
  if (p.poses_per_object < 1 || p.grasps_per_pose < 1 || p.max_attempts < 1) {
    throw ConfigError("poses, grasps and attempts must be positive");
  }
}

double center_height(const Heightmap& image) {
  const Eigen::Index r = image.rows() / 2, c = image.cols() / 2;
  return (static_cast<double>(image(r - 1, c - 1)) + image(r - 1, c) + image(r, c - 1) + image(r, c)) / 4.0;
}

std::uint8_t label_oracle(const Heightmap& image, double z, const SceneParams& params) {
  const Eigen::Index r = image.rows() / 2, c = image.cols() / 2;
  const Eigen::Index left = c - 1 - params.finger_offset, right = c + params.finger_offset;
  if (image.rows() < 2 || left < 0 || right >= image.cols()) {
    throw DimensionError("label oracle: finger columns fall outside a " + std::to_string(image.rows()) +
                         "x" + std::to_string(image.cols()) + " image");
  }
  const double hc = center_height(image);
  const double stroke = hc - z;
  if (!(stroke >= params.stroke_min && stroke <= params.stroke_max)) return 0;
  const double limit = hc - params.clearance;
  const double left_height = std::max(image(r - 1, left), image(r, left));
  const double right_height = std::max(image(r - 1, right), image(r, right));
  return (left_height <= limit && right_height <= limit) ? 1 : 0;
}

namespace {

constexpr int kCrop = 32;

struct ObjectShape {
  ShapeFamily family;
  double height;
  double half_x, half_y;  // half extents in pixels (cylinder uses half_x)
};

Heightmap render(const ObjectShape& shape, double angle, double dx, double dy) {
  Heightmap image = Heightmap::Zero(kCrop, kCrop);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (int r = 0; r < kCrop; ++r) {
    for (int c = 0; c < kCrop; ++c) {
      const double px = c + 0.5 - kCrop / 2.0 - dx;
      const double py = r + 0.5 - kCrop / 2.0 - dy;
      const double qx = ca * px + sa * py;
      const double qy = -sa * px + ca * py;
      const bool inside = shape.family == ShapeFamily::box
                              ? (std::abs(qx) <= shape.half_x && std::abs(qy) <= shape.half_y)
                              : (qx * qx + qy * qy <= shape.half_x * shape.half_x);
      if (inside) image(r, c) = static_cast<float>(shape.height);
    }
  }
  return image;
}

}  // namespace

Dataset generate_synthetic(const SceneParams& params, std::size_t count) {
  validate(params);
  if (count < 1) throw ConfigError("generate_synthetic needs n >= 1");
  Rng rng(derive_seed({params.seed, 0x67656e}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Dataset dataset;
  dataset.reserve(count);
  std::size_t positives = 0;
  std::uint64_t object_id = 0, pose_id = 0, image_id = 0;

  while (dataset.size() < count) {
    ++object_id;
    ObjectShape shape;
    shape.family = unit(rng) < 0.5 ? ShapeFamily::box : ShapeFamily::cylinder;
    shape.height = uniform(params.height_min, params.height_max);
    shape.half_x = uniform(params.footprint_min, params.footprint_max);
    shape.half_y = uniform(params.footprint_min, params.footprint_max);

    for (int p = 0; p < params.poses_per_object && dataset.size() < count; ++p) {
      ++pose_id;
      const double angle = uniform(0.0, std::numbers::pi);
      for (int g = 0; g < params.grasps_per_pose && dataset.size() < count; ++g) {
        const double rate = dataset.empty() ? 0.5 : static_cast<double>(positives) / dataset.size();
        std::uint8_t wanted = unit(rng) < 0.5 ? 1 : 0;
        if (rate < 0.45) wanted = 1;
        if (rate > 0.55) wanted = 0;

        GraspExample example;
        bool have = false;
        for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
          const double dx = uniform(-10.0, 10.0), dy = uniform(-10.0, 10.0);
          Heightmap image = render(shape, angle, dx, dy);
          const double z = center_height(image) - uniform(-0.02, 0.06);
          if (z < 0) continue;
          example.image = std::move(image);
          example.z = static_cast<float>(z);
          example.label = label_oracle(example.image, example.z, params);
          have = true;
          if (example.label == wanted) break;
        }
        if (!have) {
          throw GenerationError("no valid grasp for object " + std::to_string(object_id) + " after " +
                                std::to_string(params.max_attempts) + " attempts");
        }
        example.phi = static_cast<float>(uniform(-std::numbers::pi, std::numbers::pi));
        example.object_id = object_id;
        example.pose_id = pose_id;
        example.image_id = ++image_id;
        positives += example.label;
        dataset.push_back(std::move(example));
      }
    }
  }

  const double rate = static_cast<double>(positives) / static_cast<double>(dataset.size());
  if (dataset.size() >= 100 && (rate < 0.35 || rate > 0.65)) {
    throw GenerationError("class balance " + std::to_string(rate) + " left [0.35, 0.65]");
  }
  return dataset;
}

void validate_dataset(const Dataset& dataset) {
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& e = dataset[i];
    if (!e.image.allFinite() || (e.image.array() < 0).any()) {
      throw FormatError("example " + std::to_string(i) + " has a non-finite or negative height");
    }
    if (!std::isfinite(e.z) || e.z < 0) {
      throw FormatError("example " + std::to_string(i) + " has an invalid grasp depth");
    }
    if (e.label > 1) throw FormatError("example " + std::to_string(i) + " has a non-binary label");
    if (!seen.insert(e.image_id).second) {
      throw FormatError("duplicate image_id " + std::to_string(e.image_id));
    }
  }
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  io::write_bytes(out, "GFD1", 4);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.size()));
  for (const auto& e : dataset) {
    Storage<float> values = Eigen::Map<const Storage<float>>(e.image.data(), e.image.size());
    write_tensor(out, Tensor<float>({e.image.rows(), e.image.cols()}, std::move(values)));
    io::write_le<float>(out, e.z);
    io::write_le<float>(out, e.phi);
    io::write_le<std::uint8_t>(out, e.label);
    io::write_le<std::uint64_t>(out, e.object_id);
    io::write_le<std::uint64_t>(out, e.pose_id);
    io::write_le<std::uint64_t>(out, e.image_id);
  }
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  io::ByteReader reader(in);
  Dataset dataset;
  std::unordered_set<std::uint64_t> seen;
  try {
    reader.expect_magic("GFD1");
    const auto count = reader.read<std::uint32_t>();
    dataset.reserve(std::min<std::uint32_t>(count, 1u << 20));
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::size_t start = reader.offset();
      const Tensor<float> image = read_tensor<float>(reader);
      if (image.rank() != 2) {
        throw FormatError("example " + std::to_string(i) + " at offset " + std::to_string(start) +
                          ": image must have rank 2, got " + to_string(image.shape()));
      }
      GraspExample e;
      e.image = Eigen::Map<const Heightmap>(image.data(), image.dim(0), image.dim(1));
      e.z = reader.read<float>();
      e.phi = reader.read<float>();
      e.label = reader.read<std::uint8_t>();
      e.object_id = reader.read<std::uint64_t>();
      e.pose_id = reader.read<std::uint64_t>();
      e.image_id = reader.read<std::uint64_t>();
      try {
        validate_dataset({e});
      } catch (const FormatError& err) {
        throw FormatError("example " + std::to_string(i) + " at offset " + std::to_string(start) + ": " +
                          err.what());
      }
      if (!seen.insert(e.image_id).second) {
        throw FormatError("duplicate image_id " + std::to_string(e.image_id) + " in example at offset " +
                          std::to_string(start));
      }
      dataset.push_back(std::move(e));
    }
  } catch (const FormatError&) {
    throw;
  } catch (const Error& err) {
    throw FormatError(path + ": " + err.what() + " (byte offset " + std::to_string(reader.offset()) + ")");
  }
  return dataset;
}

}  // namespace gqcnn
