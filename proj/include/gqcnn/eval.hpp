#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gqcnn/augment.hpp"
#include "gqcnn/data.hpp"
#include "gqcnn/model.hpp"

namespace gqcnn {

struct TrainConfig;

/// Eval-mode success probabilities for the examples at `positions`, using the
/// model's stored normalization statistics (raw inputs when it has none).
std::vector<double> predict(Model<float>& model, const Dataset& dataset,
                            std::span<const std::size_t> positions, int batch_size = 256);

std::vector<std::uint8_t> labels_at(const Dataset& dataset, std::span<const std::size_t> positions);

/// Percent of examples where (prob >= 0.5) agrees with the label.
double accuracy(std::span<const double> probs, std::span<const std::uint8_t> labels);

struct CalibrationBucket {
  double lower = 0;
  double upper = 0;
  double mean_pred = 0;  // 0 when empty
  double freq = 0;       // empirical success frequency, 0 when empty
  std::size_t count = 0;

  friend bool operator==(const CalibrationBucket&, const CalibrationBucket&) = default;
};

struct CalibrationReport {
  std::vector<CalibrationBucket> buckets;
  double ece = 0;
  int n_buckets = 0;

  std::size_t total() const;
  friend bool operator==(const CalibrationReport&, const CalibrationReport&) = default;
};

/// Equal-width buckets over [0,1], right-open except the last.
CalibrationReport calibration(std::span<const double> probs, std::span<const std::uint8_t> labels,
                              int n_buckets = 10);

/// sum over non-empty buckets of (count / N) * |mean_pred - freq|.
double expected_calibration_error(std::span<const CalibrationBucket> buckets);

struct AblationRow {
  AugmentConfig flags;
  double val_acc = 0;
  double train_acc = 0;
  std::uint64_t seed = 0;
};

/// Trains one model per augmentation config on the image split, all from the
/// same initialization, split and seed. Accuracies are measured in eval mode
/// without augmentation after the last epoch.
std::vector<AblationRow> ablation_grid(const Dataset& dataset, std::span<const AugmentConfig> rows,
                                       const TrainConfig& train_config, const ModelConfig& model_config,
                                       double train_fraction = 0.8);

}  // namespace gqcnn
