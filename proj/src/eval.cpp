#include "gqcnn/eval.hpp"

#include <algorithm>
#include <cmath>

#include "batch.hpp"
#include "gqcnn/optim.hpp"

namespace gqcnn {

std::vector<double> predict(Model<float>& model, const Dataset& dataset,
                            std::span<const std::size_t> positions, int batch_size) {
  std::vector<double> probs;
  probs.reserve(positions.size());
  const auto step = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t begin = 0; begin < positions.size(); begin += step) {
    const std::size_t end = std::min(positions.size(), begin + step);
    std::vector<ModelInput> inputs;
    inputs.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) {
      const auto& e = dataset.at(positions[k]);
      ModelInput in{e.image, e.z, e.label};
      if (model.input_stats) {
        in.image = normalize(in.image, *model.input_stats);
        in.z = normalize_depth(in.z, *model.input_stats);
      }
      inputs.push_back(std::move(in));
    }
    const auto batch = detail::make_batch(inputs);
    const Tensor<float> out = model.forward(batch.images, batch.depth, Mode::eval);
    for (Index i = 0; i < out.size(); ++i) probs.push_back(out[i]);
  }
  return probs;
}

std::vector<std::uint8_t> labels_at(const Dataset& dataset, std::span<const std::size_t> positions) {
  std::vector<std::uint8_t> labels;
  labels.reserve(positions.size());
  for (auto i : positions) labels.push_back(dataset.at(i).label);
  return labels;
}

double accuracy(std::span<const double> probs, std::span<const std::uint8_t> labels) {
  if (probs.empty()) throw ContractError("accuracy of an empty prediction set");
  if (probs.size() != labels.size()) {
    throw ContractError("accuracy: " + std::to_string(probs.size()) + " predictions but " +
                        std::to_string(labels.size()) + " labels");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    correct += ((probs[i] >= 0.5) == (labels[i] == 1)) ? 1 : 0;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(probs.size());
}

std::size_t CalibrationReport::total() const {
  std::size_t n = 0;
  for (const auto& b : buckets) n += b.count;
  return n;
}

double expected_calibration_error(std::span<const CalibrationBucket> buckets) {
  std::size_t total = 0;
  for (const auto& b : buckets) total += b.count;
  if (total == 0) return 0;
  double ece = 0;
  for (const auto& b : buckets) {
    if (b.count == 0) continue;
    ece += static_cast<double>(b.count) / static_cast<double>(total) * std::abs(b.mean_pred - b.freq);
  }
  return ece;
}

CalibrationReport calibration(std::span<const double> probs, std::span<const std::uint8_t> labels,
                              int n_buckets) {
  if (probs.empty()) throw ContractError("calibration of an empty prediction set");
  if (probs.size() != labels.size()) {
    throw ContractError("calibration: " + std::to_string(probs.size()) + " predictions but " +
                        std::to_string(labels.size()) + " labels");
  }
  if (n_buckets < 2) throw ContractError("calibration needs at least 2 buckets");

  const auto n = static_cast<std::size_t>(n_buckets);
  CalibrationReport report;
  report.n_buckets = n_buckets;
  report.buckets.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    report.buckets[b].lower = static_cast<double>(b) / static_cast<double>(n);
    report.buckets[b].upper = static_cast<double>(b + 1) / static_cast<double>(n);
  }
  std::vector<double> pred_sum(n, 0.0);
  std::vector<std::size_t> positives(n, 0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0 && p <= 1)) throw ContractError("calibration: probability outside [0,1]");
    auto b = std::min(n - 1, static_cast<std::size_t>(p * static_cast<double>(n)));
    // Bounds are the exact i/n values; correct any rounding in p * n.
    while (b > 0 && p < report.buckets[b].lower) --b;
    while (b + 1 < n && p >= report.buckets[b].upper) ++b;
    pred_sum[b] += p;
    positives[b] += labels[i] ? 1 : 0;
    ++report.buckets[b].count;
  }
  for (std::size_t b = 0; b < n; ++b) {
    auto& bucket = report.buckets[b];
    if (bucket.count == 0) continue;
    bucket.mean_pred = pred_sum[b] / static_cast<double>(bucket.count);
    bucket.freq = static_cast<double>(positives[b]) / static_cast<double>(bucket.count);
  }
  report.ece = expected_calibration_error(report.buckets);
  return report;
}

std::vector<AblationRow> ablation_grid(const Dataset& dataset, std::span<const AugmentConfig> rows,
                                       const TrainConfig& train_config, const ModelConfig& model_config,
                                       double train_fraction) {
  validate(train_config);
  for (const auto& row : rows) validate(row);
  const Split parts = split(dataset, {SplitKind::image, train_fraction, train_config.seed});
  const Model<float> initial = Model<float>::build(model_config);

  std::vector<AblationRow> results;
  for (const auto& row : rows) {
    Model<float> model = initial.clone();
    train(model, dataset, parts, row, train_config);
    AblationRow result;
    result.flags = row;
    result.seed = train_config.seed;
    result.val_acc = accuracy(predict(model, dataset, parts.val), labels_at(dataset, parts.val));
    result.train_acc = accuracy(predict(model, dataset, parts.train), labels_at(dataset, parts.train));
    results.push_back(result);
  }
  return results;
}

}  // namespace gqcnn
