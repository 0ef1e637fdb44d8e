#include "gqcnn/augment.hpp"

#include <cmath>
#include <random>

#include "gqcnn/bicubic.hpp"
#include "gqcnn/data.hpp"
#include "gqcnn/error.hpp"

namespace gqcnn {

void validate(const AugmentConfig& config) {
  if (config.mult_adjust_z && !config.mult_pixels) {
    throw ConfigError("depth adjustment requires the multiplicative pixel augmentation");
  }
  if (!(config.gamma_shape > 0) || !(config.gamma_scale > 0)) {
    throw ConfigError("gamma shape and scale must be positive");
  }
  if (!(config.gp_sigma >= 0)) throw ConfigError("GP noise sigma must be non-negative");
  if (config.gp_grid < 1) throw ConfigError("GP grid extent must be at least 1");
  for (double p : {config.gp_prob, config.flip_prob}) {
    if (!(p >= 0 && p <= 1)) throw ConfigError("probabilities must lie in [0,1]");
  }
}

void write_config(KeyValueConfig& out, const AugmentConfig& config, const std::string& section) {
  const std::string s = section + ".";
  out.set_flag(s + "normalize", config.normalize);
  out.set_flag(s + "symmetrize", config.symmetrize);
  out.set_flag(s + "mult_pixels", config.mult_pixels);
  out.set_flag(s + "mult_adjust_z", config.mult_adjust_z);
  out.set_flag(s + "gp_noise", config.gp_noise);
  out.set_real(s + "gamma_shape", config.gamma_shape);
  out.set_real(s + "gamma_scale", config.gamma_scale);
  out.set_real(s + "gp_sigma", config.gp_sigma);
  out.set_int(s + "gp_grid", config.gp_grid);
  out.set_real(s + "gp_prob", config.gp_prob);
  out.set_real(s + "flip_prob", config.flip_prob);
  out.set(s + "flip_mode", config.flip_mode == FlipMode::independent ? "independent" : "exclusive");
}

AugmentConfig read_augment_config(const KeyValueConfig& in, const std::string& section) {
  const std::string s = section + ".";
  AugmentConfig c;
  if (auto v = in.get_flag(s + "normalize")) c.normalize = *v;
  if (auto v = in.get_flag(s + "symmetrize")) c.symmetrize = *v;
  if (auto v = in.get_flag(s + "mult_pixels")) c.mult_pixels = *v;
  if (auto v = in.get_flag(s + "mult_adjust_z")) c.mult_adjust_z = *v;
  if (auto v = in.get_flag(s + "gp_noise")) c.gp_noise = *v;
  if (auto v = in.get_real(s + "gamma_shape")) c.gamma_shape = *v;
  if (auto v = in.get_real(s + "gamma_scale")) c.gamma_scale = *v;
  if (auto v = in.get_real(s + "gp_sigma")) c.gp_sigma = *v;
  if (auto v = in.get_int(s + "gp_grid")) c.gp_grid = static_cast<int>(*v);
  if (auto v = in.get_real(s + "gp_prob")) c.gp_prob = *v;
  if (auto v = in.get_real(s + "flip_prob")) c.flip_prob = *v;
  if (auto v = in.get(s + "flip_mode")) {
    if (*v == "independent") {
      c.flip_mode = FlipMode::independent;
    } else if (*v == "exclusive") {
      c.flip_mode = FlipMode::exclusive;
    } else {
      throw ConfigError(s + "flip_mode must be independent or exclusive, got \"" + *v + "\"");
    }
  }
  return c;
}

NormStats compute_norm_stats(std::span<const Heightmap> images) {
  if (images.empty()) throw ConfigError("normalization statistics need at least one image");
  double total = 0;
  double count = 0;
  for (const auto& image : images) {
    total += image.cast<double>().sum();
    count += static_cast<double>(image.size());
  }
  const double mean = total / count;
  double squares = 0;
  for (const auto& image : images) squares += (image.cast<double>().array() - mean).square().sum();
  const double std = std::sqrt(squares / count);
  if (!(std > 0)) throw ConfigError("training pixels have zero variance; cannot normalize");
  return {mean, std};
}

Heightmap normalize(const Heightmap& image, const NormStats& stats) {
  return ((image.cast<double>().array() - stats.mean) / stats.std).cast<float>().matrix();
}

Heightmap denormalize(const Heightmap& image, const NormStats& stats) {
  return (image.cast<double>().array() * stats.std + stats.mean).cast<float>().matrix();
}

double normalize_depth(double z, const NormStats& stats) { return (z - stats.mean) / stats.std; }

FlipDraw draw_flips(Rng& rng, double flip_prob, FlipMode mode) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double first = unit(rng);
  const double second = unit(rng);
  if (mode == FlipMode::independent) return {first < flip_prob, second < flip_prob};
  if (first >= flip_prob) return {};
  return second < 0.5 ? FlipDraw{true, false} : FlipDraw{false, true};
}

Heightmap symmetrize(const Heightmap& image, const FlipDraw& flips) {
  Heightmap out = image;
  if (flips.vertical) out = out.colwise().reverse().eval();
  if (flips.horizontal) out = out.rowwise().reverse().eval();
  return out;
}

double sample_gamma_factor(Rng& rng, double a, double b) {
  std::gamma_distribution<double> gamma(a, b);
  return gamma(rng);
}

std::pair<Heightmap, double> mult_augment(const Heightmap& image, double z, double gain, bool adjust_z) {
  Heightmap out = (image.cast<double>() * gain).cast<float>();
  return {std::move(out), adjust_z ? gain * z : z};
}

GpDraw draw_gp(Rng& rng, const AugmentConfig& config) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, config.gp_sigma);
  GpDraw draw;
  draw.applied = unit(rng) < config.gp_prob;
  draw.grid.resize(config.gp_grid, config.gp_grid);
  for (Eigen::Index r = 0; r < draw.grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < draw.grid.cols(); ++c) draw.grid(r, c) = normal(rng);
  }
  return draw;
}

Heightmap gp_augment(const Heightmap& image, const GpDraw& draw) {
  if (image.rows() != 32 || image.cols() != 32) {
    throw DimensionError("GP augmentation expects a 32x32 image, got " + std::to_string(image.rows()) +
                         "x" + std::to_string(image.cols()));
  }
  if (!draw.applied) return image;
  const Eigen::MatrixXd noise = bicubic_upsample(draw.grid, image.rows(), image.cols());
  return (image.cast<double>() + noise).cast<float>();
}

AugmentDraws draw_augmentations(Rng& rng, const AugmentConfig& config) {
  AugmentDraws draws;
  draws.flips = draw_flips(rng, config.flip_prob, config.flip_mode);
  draws.gain = sample_gamma_factor(rng, config.gamma_shape, config.gamma_scale);
  draws.gp = draw_gp(rng, config);
  return draws;
}

Rng example_stream(std::uint64_t seed, std::uint64_t image_id, std::uint64_t epoch) {
  return Rng(derive_seed({seed, image_id, epoch}));
}

ModelInput apply_pipeline(const GraspExample& example, const AugmentConfig& config,
                          const std::optional<NormStats>& stats, const AugmentDraws& draws) {
  validate(config);
  ModelInput out{example.image, example.z, example.label};
  if (config.symmetrize) out.image = symmetrize(out.image, draws.flips);
  if (config.mult_pixels) {
    std::tie(out.image, out.z) = mult_augment(out.image, out.z, draws.gain, config.mult_adjust_z);
  }
  if (config.gp_noise) out.image = gp_augment(out.image, draws.gp);
  if (config.normalize) {
    if (!stats) throw ConfigError("normalization is enabled but no statistics were supplied");
    out.image = normalize(out.image, *stats);
    out.z = normalize_depth(out.z, *stats);
  }
  return out;
}

ModelInput apply_pipeline(const GraspExample& example, const AugmentConfig& config,
                          const std::optional<NormStats>& stats, Rng& rng) {
  return apply_pipeline(example, config, stats, draw_augmentations(rng, config));
}

}  // namespace gqcnn
