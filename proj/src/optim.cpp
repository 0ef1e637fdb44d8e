#include "gqcnn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "batch.hpp"
#include "gqcnn/eval.hpp"
#include "gqcnn/parallel.hpp"
#include "gqcnn/rng.hpp"

namespace gqcnn {

void validate(const TrainConfig& c) {
  if (!(c.base_lr > 0)) throw ConfigError("base learning rate must be positive");
  if (!(c.decay_factor > 0 && c.decay_factor <= 1)) throw ConfigError("decay factor must lie in (0,1]");
  if (c.decay_every <= 0) throw ConfigError("decay interval must be positive");
  if (!(c.weight_decay >= 0)) throw ConfigError("weight decay must be non-negative");
  if (c.batch_size < 2) throw ConfigError("batch size must be at least 2 (batch statistics)");
  if (c.epochs < 0) throw ConfigError("epoch count must be non-negative");
}

void write_config(KeyValueConfig& out, const TrainConfig& c) {
  out.set_real("train.base_lr", c.base_lr);
  out.set_real("train.decay_factor", c.decay_factor);
  out.set_int("train.decay_every", c.decay_every);
  out.set_real("train.weight_decay", c.weight_decay);
  out.set_int("train.batch_size", c.batch_size);
  out.set_int("train.epochs", c.epochs);
  out.set_uint("train.seed", c.seed);
}

TrainConfig read_train_config(const KeyValueConfig& in) {
  TrainConfig c;
  if (auto v = in.get_real("train.base_lr")) c.base_lr = *v;
  if (auto v = in.get_real("train.decay_factor")) c.decay_factor = *v;
  if (auto v = in.get_int("train.decay_every")) c.decay_every = *v;
  if (auto v = in.get_real("train.weight_decay")) c.weight_decay = *v;
  if (auto v = in.get_int("train.batch_size")) c.batch_size = static_cast<int>(*v);
  if (auto v = in.get_int("train.epochs")) c.epochs = static_cast<int>(*v);
  if (auto v = in.get_uint("train.seed")) c.seed = *v;
  return c;
}

double lr_at(std::int64_t step, const TrainConfig& config) {
  const auto decays = step / config.decay_every;
  return config.base_lr * std::pow(config.decay_factor, static_cast<double>(decays));
}

template <typename Scalar>
void adam_step(std::span<const NamedTensor<Scalar>> params, AdamState<Scalar>& state, double lr,
               double weight_decay) {
  const std::int64_t t = state.step + 1;
  for (const auto& [name, param] : params) {
    if (param.has_grad() && !param.grad().allFinite()) {
      throw TrainingError("non-finite gradient for parameter " + name + " at step " + std::to_string(t));
    }
  }
  const auto b1 = static_cast<Scalar>(state.beta1);
  const auto b2 = static_cast<Scalar>(state.beta2);
  const auto first_correction = static_cast<Scalar>(1 - std::pow(state.beta1, static_cast<double>(t)));
  const auto second_correction = static_cast<Scalar>(1 - std::pow(state.beta2, static_cast<double>(t)));
  const auto rate = static_cast<Scalar>(lr);
  const auto decay = static_cast<Scalar>(weight_decay);
  const auto eps = static_cast<Scalar>(state.epsilon);

  for (const auto& [name, param] : params) {
    Tensor<Scalar> p = param;
    auto& w = p.mutable_values();
    auto& m = state.first[name];
    auto& v = state.second[name];
    if (m.size() != w.size()) {
      m = Storage<Scalar>::Zero(w.size());
      v = Storage<Scalar>::Zero(w.size());
    }
    Storage<Scalar> g = p.has_grad() ? Storage<Scalar>(p.grad()) : Storage<Scalar>::Zero(w.size());
    if (decay != Scalar(0)) g += decay * w;
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    w -= rate * (m / first_correction) / ((v / second_correction).sqrt() + eps);
  }
  state.step = t;
}

History train(Model<float>& model, const Dataset& dataset, const Split& split,
              const AugmentConfig& augment, const TrainConfig& config, const EpochSink& sink) {
  validate(config);
  validate(augment);
  if (config.epochs == 0) return {};
  if (split.train.empty() || split.val.empty()) {
    throw ConfigError("training needs non-empty train and validation splits");
  }

  std::optional<NormStats> stats;
  if (augment.normalize) {
    std::vector<Heightmap> images;
    images.reserve(split.train.size());
    for (auto i : split.train) images.push_back(dataset.at(i).image);
    stats = compute_norm_stats(images);
  }
  model.input_stats = stats;

  AdamState<float> state;
  History history;
  std::int64_t step = 0;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order = split.train;
    Rng shuffle_rng(derive_seed({config.seed, 0x73687566, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_total = 0;
    std::size_t seen = 0, correct = 0;
    double last_lr = lr_at(step, config);
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      if (end - begin < 2) break;  // batch statistics need two samples

      std::vector<ModelInput> inputs(end - begin);
      parallel_for(inputs.size(), [&](std::size_t k) {
        const auto& example = dataset.at(order[begin + k]);
        Rng rng = example_stream(config.seed, example.image_id, static_cast<std::uint64_t>(epoch));
        inputs[k] = apply_pipeline(example, augment, stats, rng);
      });
      detail::Batch batch = detail::make_batch(inputs);

      model.zero_grad();
      const Tensor<float> logits = model.logits(batch.images, batch.depth, Mode::train);
      const Tensor<float> loss = softmax_cross_entropy(logits, batch.labels);
      if (!std::isfinite(loss.item())) {
        throw TrainingError("loss is not finite at step " + std::to_string(step + 1) + " (epoch " +
                            std::to_string(epoch) + ")");
      }
      loss.backward();
      last_lr = lr_at(step, config);
      adam_step<float>(model.parameters(), state, last_lr, config.weight_decay);
      ++step;

      const Tensor<float> probs = softmax_positive(logits);
      for (std::size_t k = 0; k < batch.labels.size(); ++k) {
        correct += ((probs[static_cast<Index>(k)] >= 0.5f) == (batch.labels[k] == 1)) ? 1 : 0;
      }
      loss_total += static_cast<double>(loss.item()) * static_cast<double>(batch.labels.size());
      seen += batch.labels.size();
    }
    model.zero_grad();

    const auto probs = predict(model, dataset, split.val);
    const auto labels = labels_at(dataset, split.val);
    EpochRecord record;
    record.epoch = epoch;
    record.step = step;
    record.lr = last_lr;
    record.train_loss = seen ? loss_total / static_cast<double>(seen) : 0.0;
    record.train_acc = seen ? 100.0 * static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    record.val_acc = accuracy(probs, labels);
    history.push_back(record);
    if (sink) sink(record);
  }
  return history;
}

template void adam_step(std::span<const NamedTensor<float>>, AdamState<float>&, double, double);
template void adam_step(std::span<const NamedTensor<double>>, AdamState<double>&, double, double);

}  // namespace gqcnn
