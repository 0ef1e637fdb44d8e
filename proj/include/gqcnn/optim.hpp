#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gqcnn/augment.hpp"
#include "gqcnn/data.hpp"
#include "gqcnn/kv_config.hpp"
#include "gqcnn/model.hpp"

namespace gqcnn {

struct TrainConfig {
  double base_lr = 1e-4;
  double decay_factor = 0.95;
  std::int64_t decay_every = 50000;  // optimizer steps per decay
  double weight_decay = 1e-5;
  int batch_size = 128;
  int epochs = 1;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);
void write_config(KeyValueConfig& out, const TrainConfig& config);
TrainConfig read_train_config(const KeyValueConfig& in);

/// Staircase schedule: base_lr * decay_factor^floor(step / decay_every).
double lr_at(std::int64_t step, const TrainConfig& config);

/// Bias-corrected Adam moments, one pair per parameter name.
template <typename Scalar>
struct AdamState {
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::map<std::string, Storage<Scalar>> first;
  std::map<std::string, Storage<Scalar>> second;
};

/// One Adam update of every parameter from its accumulated gradient (a
/// parameter without a gradient is treated as having a zero one). Weight decay
/// is an L2 term folded into the gradient: g <- g + weight_decay * w.
/// TrainingError, before anything is modified, if a gradient is not finite.
template <typename Scalar>
void adam_step(std::span<const NamedTensor<Scalar>> params, AdamState<Scalar>& state, double lr,
               double weight_decay);

struct EpochRecord {
  int epoch = 0;
  std::int64_t step = 0;  // optimizer steps taken so far
  double lr = 0;          // rate used by the epoch's last step
  double train_loss = 0;
  double train_acc = 0;   // percent, on the augmented training stream
  double val_acc = 0;     // percent

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

using History = std::vector<EpochRecord>;
using EpochSink = std::function<void(const EpochRecord&)>;

/// Shuffled mini-batch training with Adam on the train side of `split`;
/// augmentation touches the training stream only. Normalization statistics
/// come from the training images and are stored in `model.input_stats`.
/// Bit-reproducible for a given config.seed. With epochs == 0 the model is
/// left untouched.
History train(Model<float>& model, const Dataset& dataset, const Split& split,
              const AugmentConfig& augment, const TrainConfig& config, const EpochSink& sink = {});

extern template void adam_step(std::span<const NamedTensor<float>>, AdamState<float>&, double, double);
extern template void adam_step(std::span<const NamedTensor<double>>, AdamState<double>&, double, double);

}  // namespace gqcnn
