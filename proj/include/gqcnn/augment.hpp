#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>

#include <Eigen/Core>

#include "gqcnn/heightmap.hpp"
#include "gqcnn/kv_config.hpp"
#include "gqcnn/rng.hpp"

namespace gqcnn {

struct GraspExample;

/// How the two flip coins are read: `independent` flips each axis with
/// probability flip_prob; `exclusive` flips exactly one axis (chosen 50/50)
/// with probability flip_prob.
enum class FlipMode { independent, exclusive };

struct AugmentConfig {
  bool normalize = true;
  bool symmetrize = false;
  bool mult_pixels = false;
  bool mult_adjust_z = false;  // scale the grasp depth by the pixel factor too
  bool gp_noise = false;

  double gamma_shape = 1000;
  double gamma_scale = 0.001;
  double gp_sigma = 0.005;
  int gp_grid = 8;
  double gp_prob = 0.5;
  double flip_prob = 0.5;
  FlipMode flip_mode = FlipMode::independent;

  static AugmentConfig normalize_only() { return {}; }
  /// Every stage on.
  static AugmentConfig all() {
    AugmentConfig c;
    c.symmetrize = c.mult_pixels = c.mult_adjust_z = c.gp_noise = true;
    return c;
  }

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

void validate(const AugmentConfig& config);
void write_config(KeyValueConfig& out, const AugmentConfig& config, const std::string& section = "augment");
AugmentConfig read_augment_config(const KeyValueConfig& in, const std::string& section = "augment");

/// Pooled mean / standard deviation over every pixel of the given images.
/// ConfigError on an empty set or zero variance.
NormStats compute_norm_stats(std::span<const Heightmap> images);

Heightmap normalize(const Heightmap& image, const NormStats& stats);
Heightmap denormalize(const Heightmap& image, const NormStats& stats);
/// The grasp depth shares the pixels' units, so it is standardized with the
/// same statistics; height differences are then preserved up to 1/std.
double normalize_depth(double z, const NormStats& stats);

struct FlipDraw {
  bool vertical = false;    // reverse the row order
  bool horizontal = false;  // reverse the column order
};

FlipDraw draw_flips(Rng& rng, double flip_prob, FlipMode mode = FlipMode::independent);
Heightmap symmetrize(const Heightmap& image, const FlipDraw& flips);

/// Gamma(shape a, scale b). Mean a*b, variance a*b^2.
double sample_gamma_factor(Rng& rng, double a, double b);

/// image' = g * image, z' = g * z when adjust_z (else z).
std::pair<Heightmap, double> mult_augment(const Heightmap& image, double z, double gain, bool adjust_z);

struct GpDraw {
  bool applied = false;
  Eigen::MatrixXd grid;  // gp_grid x gp_grid i.i.d. N(0, gp_sigma^2)
};

GpDraw draw_gp(Rng& rng, const AugmentConfig& config);
/// Adds the bicubic upsampling of the drawn grid when applied. The image must
/// be 32x32 (DimensionError otherwise).
Heightmap gp_augment(const Heightmap& image, const GpDraw& draw);

/// Every random quantity the pipeline consumes for one example. All of them
/// are drawn, in a fixed order, whether or not the stage is enabled, so that
/// toggling one stage never changes the draws seen by another.
struct AugmentDraws {
  FlipDraw flips;
  double gain = 1;
  GpDraw gp;
};

AugmentDraws draw_augmentations(Rng& rng, const AugmentConfig& config);

/// Stream for one example in one epoch; independent of batch composition and
/// processing order.
Rng example_stream(std::uint64_t seed, std::uint64_t image_id, std::uint64_t epoch);

struct ModelInput {
  Heightmap image;
  double z = 0;
  std::uint8_t label = 0;
};

/// symmetrize -> multiplicative -> Gaussian-process noise -> normalize.
/// Disabled stages are the identity; the label passes through. `stats` is
/// required when normalization is on.
ModelInput apply_pipeline(const GraspExample& example, const AugmentConfig& config,
                          const std::optional<NormStats>& stats, const AugmentDraws& draws);
ModelInput apply_pipeline(const GraspExample& example, const AugmentConfig& config,
                          const std::optional<NormStats>& stats, Rng& rng);

}  // namespace gqcnn
