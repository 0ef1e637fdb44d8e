#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "gqcnn/heightmap.hpp"
#include "gqcnn/kv_config.hpp"
#include "gqcnn/ops.hpp"
#include "gqcnn/tensor.hpp"

namespace gqcnn {

/// One layer of the image tower or the post-merge stack. Convolutions use
/// "same" padding (kernel / 2) and are always followed by batch norm and relu.
struct LayerSpec {
  enum class Kind { conv, maxpool };

  Kind kind = Kind::conv;
  int filters = 0;  // conv
  int kernel = 0;   // conv: square kernel extent; maxpool: window
  int stride = 1;

  static LayerSpec conv(int filters, int kernel, int stride = 1) {
    return {Kind::conv, filters, kernel, stride};
  }
  static LayerSpec maxpool(int window, int stride) { return {Kind::maxpool, 0, window, stride}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// "conv:<filters>:<kernel>:<stride>" or "pool:<window>:<stride>"
std::string to_string(const LayerSpec& spec);
LayerSpec parse_layer_spec(std::string_view text);

struct ModelConfig {
  int input_size = 32;
  std::vector<LayerSpec> image_tower;
  int merge_channels = 16;  // planes filled with the grasp depth
  LayerSpec merge;
  std::vector<LayerSpec> post_merge;
  std::vector<int> head;  // dense widths; the last must be 2
  std::uint64_t init_seed = 0;

  /// conv(64,7)-conv(64,5)-pool(2)-conv(128,3)-conv(128,3)-pool(2), 16 depth
  /// planes, merge conv(128,3), two conv(128,3), dense 1024-2.
  static ModelConfig defaults();

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Throws ConfigError naming the first violated rule.
void validate(const ModelConfig& config);

/// Trainable scalar count implied by a config (kernels, batch-norm scale and
/// shift, dense weights and biases).
Index parameter_count(const ModelConfig& config);

void write_config(KeyValueConfig& out, const ModelConfig& config);
/// Reads the "model." keys; absent keys keep their defaults().
ModelConfig read_model_config(const KeyValueConfig& in);

template <typename Scalar>
using NamedTensor = std::pair<std::string, Tensor<Scalar>>;

/// The grasp-quality network: image tower, grasp-depth planes concatenated at
/// the tower output, a merging convolution, two more convolutions and a dense
/// classifier producing two logits.
template <typename Scalar>
class Model {
 public:
  struct ConvBlock {
    std::string name;
    Tensor<Scalar> kernels;
    BatchNormState<Scalar> bn;
    int stride = 1;
    int padding = 0;
  };
  struct PoolBlock {
    int window = 2;
    int stride = 2;
  };
  struct DenseBlock {
    std::string name;
    Tensor<Scalar> weights;
    Tensor<Scalar> bias;
  };

  static Model build(const ModelConfig& config);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// Deep copy: parameters and running statistics are not shared.
  Model clone() const;

  const ModelConfig& config() const { return config_; }

  /// images [N,1,S,S], depth [N] -> logits [N,2]
  Tensor<Scalar> logits(const Tensor<Scalar>& images, const Tensor<Scalar>& depth, Mode mode);

  /// Positive-class probabilities [N], each strictly inside (0,1).
  Tensor<Scalar> forward(const Tensor<Scalar>& images, const Tensor<Scalar>& depth, Mode mode);

  /// Trainable tensors in a fixed order with unique names.
  const std::vector<NamedTensor<Scalar>>& parameters() const { return parameters_; }
  /// Handle sharing storage with the named parameter; ConfigError if absent.
  Tensor<Scalar> parameter(const std::string& name) const;
  Index parameter_count() const;
  void zero_grad();

  /// Named running statistics, in the same order as the conv blocks.
  std::vector<std::pair<std::string, const BatchNormState<Scalar>*>> batchnorm_states() const;
  std::vector<std::pair<std::string, BatchNormState<Scalar>*>> batchnorm_states();

  /// Normalization statistics of the training split, stored alongside the
  /// weights so that evaluation reproduces the training input pipeline.
  std::optional<NormStats> input_stats;

 private:
  Model() = default;
  void index_parameters();
  Tensor<Scalar> run_conv(ConvBlock& block, const Tensor<Scalar>& x, Mode mode);

  ModelConfig config_;
  std::vector<std::variant<ConvBlock, PoolBlock>> tower_;
  ConvBlock merge_;
  std::vector<ConvBlock> post_;
  std::vector<DenseBlock> head_;
  std::vector<NamedTensor<Scalar>> parameters_;
};

// Checkpoint layout (little-endian): "GFM1", u16 version, u32 length + UTF-8
// key-value config text, u32 tensor count, then per tensor a u16 length +
// name and a GFT1 tensor. Batch-norm running statistics are stored as
// "<block>.bn.running_mean" / "<block>.bn.running_var".
inline constexpr std::uint16_t kCheckpointVersion = 1;

template <typename Scalar>
void save_model(const Model<Scalar>& model, const std::string& path);

/// Throws FormatError (magic/version/config), DimensionError (tensor extents
/// disagree with the config), IoError (truncation). Never returns a partially
/// loaded model.
template <typename Scalar>
Model<Scalar> load_model(const std::string& path);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace gqcnn
