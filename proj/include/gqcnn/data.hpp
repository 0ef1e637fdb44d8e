#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gqcnn/heightmap.hpp"

namespace gqcnn {

/// One gripper-aligned grasp candidate: a 32x32 heightmap crop centred on the
/// grasp, the grasp depth, and its success label.
struct GraspExample {
  Heightmap image;
  float z = 0;
  float phi = 0;  // provenance only; crops are already aligned with the gripper
  std::uint8_t label = 0;
  std::uint64_t object_id = 0;
  std::uint64_t pose_id = 0;
  std::uint64_t image_id = 0;

  friend bool operator==(const GraspExample&, const GraspExample&) = default;
};

using Dataset = std::vector<GraspExample>;

// ---------------------------------------------------------------------------
// Train / validation splits

enum class SplitKind { image, pose, object };

std::string to_string(SplitKind kind);
SplitKind parse_split_kind(const std::string& text);

struct SplitSpec {
  SplitKind kind = SplitKind::image;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Dataset positions (ascending) on each side of a split.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;

  friend bool operator==(const Split&, const Split&) = default;
};

/// Partitions the keys of the requested kind (image_id, (object_id, pose_id)
/// or object_id) by a seeded shuffle, then assigns every example to the side
/// holding its key. SplitError with fewer than two distinct keys.
Split split(const Dataset& dataset, const SplitSpec& spec);

/// CSV "image_id,set" in dataset order, set being "train" or "val".
void write_split(const Dataset& dataset, const Split& split, const std::string& path);
Split read_split(const Dataset& dataset, const std::string& path);

// ---------------------------------------------------------------------------
// Synthetic scenes

enum class ShapeFamily { box, cylinder };

/// Parameters of the synthetic grasp world. Lengths are meters except the
/// footprint and finger offset, which are in pixels.
struct SceneParams {
  double height_min = 0.02;  // plateau height of an object
  double height_max = 0.08;
  double footprint_min = 2;  // half-extent (box) or radius (cylinder), pixels
  double footprint_max = 12;
  double stroke_min = 0.005;  // accepted (surface height - grasp depth)
  double stroke_max = 0.035;
  double clearance = 0.01;  // finger columns must sit this far below the surface
  int finger_offset = 10;   // pixels from the crop centre
  int poses_per_object = 8;
  int grasps_per_pose = 5;
  int max_attempts = 200;  // rejection budget per example
  std::uint64_t seed = 0;

  /// Heights, stroke and clearance multiplied by `gain`; the same world seen
  /// through a multiplicative height change.
  SceneParams scaled(double gain) const;
};

void validate(const SceneParams& params);

/// Deterministic success test of a grasp. The centre height h_c is the mean
/// of the four central pixels; the fingers sample the two central rows at
/// `finger_offset` pixels either side. Success iff
///   stroke_min <= h_c - z <= stroke_max  and  both fingers <= h_c - clearance.
std::uint8_t label_oracle(const Heightmap& image, double z, const SceneParams& params);

/// Centre height used by label_oracle.
double center_height(const Heightmap& image);

/// Renders `count` examples: objects hold poses_per_object placements, each
/// with grasps_per_pose crops. The positive rate is held inside [0.35, 0.65];
/// GenerationError if the rejection budget runs out.
Dataset generate_synthetic(const SceneParams& params, std::size_t count);

/// Throws FormatError describing the first broken invariant (finite,
/// non-negative heights and depth, unique image ids).
void validate_dataset(const Dataset& dataset);

// GFD1 layout (little-endian): "GFD1", u32 example count, then per example
// a GFT1 f32 image, f32 z, f32 phi, u8 label, u64 object_id, u64 pose_id,
// u64 image_id.
void save_dataset(const Dataset& dataset, const std::string& path);
/// FormatError (with byte offset) on a bad magic, truncation or invariant
/// violation.
Dataset load_dataset(const std::string& path);

}  // namespace gqcnn
