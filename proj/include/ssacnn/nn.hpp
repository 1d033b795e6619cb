#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ssacnn/rng.hpp"

namespace ssacnn::nn {

// Dense 4-D tensor, (batch, channels, height, width), row-major in that
// order. Values are 64-bit throughout; gradient checks depend on it.
struct Tensor4 {
  std::array<Eigen::Index, 4> shape{0, 0, 0, 0};
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(Eigen::Index b, Eigen::Index c, Eigen::Index h, Eigen::Index w)
      : shape{b, c, h, w},
        data(static_cast<std::size_t>(b * c * h * w), 0.0) {}

  Eigen::Index size() const { return shape[0] * shape[1] * shape[2] * shape[3]; }

  double& operator()(Eigen::Index b, Eigen::Index c, Eigen::Index h, Eigen::Index w) {
    return data[static_cast<std::size_t>(((b * shape[1] + c) * shape[2] + h) * shape[3] + w)];
  }
  double operator()(Eigen::Index b, Eigen::Index c, Eigen::Index h, Eigen::Index w) const {
    return data[static_cast<std::size_t>(((b * shape[1] + c) * shape[2] + h) * shape[3] + w)];
  }

  bool all_finite() const;
};

enum class LayerKind { Conv, BatchNorm, Relu, Flatten, Dense, Dropout, Softmax };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& s);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  int filters = 0;  // conv
  int kernel = 0;   // conv
  int stride = 1;   // conv
  int pad = 0;      // conv
  int units = 0;    // dense
  double rate = 0.0;  // dropout

  static LayerSpec conv(int filters, int kernel, int stride, int pad);
  static LayerSpec batchnorm();
  static LayerSpec relu();
  static LayerSpec flatten();
  static LayerSpec dense(int units);
  static LayerSpec dropout(double rate);
  static LayerSpec softmax();
};

// conv(8) -> BN -> ReLU -> conv(16) -> BN -> ReLU -> conv(32) -> BN -> ReLU
// -> flatten -> dense(32) -> ReLU -> dropout -> dense(2) -> softmax, all
// convs 3x3 stride 2 pad 1. Spatial size is set by the input, so the same
// stack serves any square correlation matrix.
std::vector<LayerSpec> default_architecture(double dropout_rate = 0.5);

// Parameter tensors of one layer (conv: weights+bias, dense: weights+bias,
// batchnorm: gamma+beta). Gradients and optimizer state share this layout.
using ParamTensors = std::vector<std::vector<double>>;

struct ForwardCache;

class CnnModel {
public:
  // Builds the layer stack for inputs of shape (channels, height, width) and
  // initializes parameters (He-uniform, BN gamma=1 beta=0) from the seed.
  CnnModel(std::vector<LayerSpec> specs, std::array<Eigen::Index, 3> input_chw,
           std::uint64_t seed);

  // Logits are the activations entering the terminal softmax, one row per
  // batch element. Training mode uses batch statistics, applies dropout and
  // updates BN running stats; eval mode is deterministic.
  Eigen::MatrixXd forward(const Tensor4& x, bool training);
  Eigen::MatrixXd forward(const Tensor4& x, bool training, ForwardCache& cache);

  // Parameter gradients for the summed per-row loss whose logit gradient is
  // grad_logits. The cache must come from the latest training-mode forward.
  std::vector<ParamTensors> backward(const ForwardCache& cache,
                                     const Eigen::MatrixXd& grad_logits) const;

  std::vector<ParamTensors>& parameters() { return params_; }
  const std::vector<ParamTensors>& parameters() const { return params_; }
  std::vector<ParamTensors>& running_stats() { return running_; }
  const std::vector<ParamTensors>& running_stats() const { return running_; }

  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::array<Eigen::Index, 3> input_shape() const { return input_chw_; }
  std::uint64_t seed() const { return seed_; }
  Eigen::Index parameter_count() const;
  int output_classes() const { return static_cast<int>(out_features_); }

  // Any parameter change invalidates outstanding caches.
  void invalidate_caches() { ++generation_; }
  // Dropout masks replay deterministically after reseeding.
  void reseed_dropout(std::uint64_t seed) { dropout_rng_ = Rng(seed); }

private:
  friend struct ForwardCache;

  struct Shape3 {
    Eigen::Index c, h, w;
  };

  std::vector<LayerSpec> specs_;
  std::array<Eigen::Index, 3> input_chw_;
  std::uint64_t seed_ = 0;
  std::vector<Shape3> out_shapes_;  // per layer
  std::vector<ParamTensors> params_;
  std::vector<ParamTensors> running_;  // batchnorm running mean/var
  Eigen::Index out_features_ = 0;
  Rng dropout_rng_;
  std::uint64_t generation_ = 0;
};

// Per-layer intermediates kept for the backward pass.
struct ForwardCache {
  struct LayerData {
    Tensor4 input;                 // activation entering the layer
    std::vector<double> aux0;      // bn: xhat | dropout: mask
    std::vector<double> aux1;      // bn: inv_std
    std::vector<double> aux2;      // bn: centered means helper (x - mean)
  };
  std::vector<LayerData> layers;
  Tensor4 output;  // activation after the last non-softmax layer
  bool training = false;
  std::uint64_t generation = 0;
};

// Row-wise softmax, numerically stable.
Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);

// Summed cross-entropy of softmax(logits) against integer labels plus the
// gradient with respect to the logits (softmax - onehot, unscaled).
std::pair<double, Eigen::MatrixXd> softmax_cross_entropy(const Eigen::MatrixXd& logits,
                                                         std::span<const int> labels);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 80;
  int batch_size = 8;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> loss_history;  // mean loss per epoch
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) over shuffled minibatches with
// mean-reduced cross-entropy. Deterministic for a fixed seed.
TrainResult train(CnnModel& model, const Tensor4& inputs, std::span<const int> labels,
                  const TrainConfig& cfg);

struct Prediction {
  int cls = 0;
  Eigen::VectorXd probs;
};

// Eval-mode argmax with ties toward class 0.
std::vector<Prediction> predict(CnnModel& model, const Tensor4& inputs);

// JSON manifest (architecture, input shape, seed) + raw-f64 blob of every
// parameter tensor followed by the BN running stats. Loading reproduces
// eval-mode outputs bit for bit.
void save_model(const CnnModel& model, const std::filesystem::path& manifest_path,
                const std::filesystem::path& blob_path);
CnnModel load_model(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& blob_path);

}  // namespace ssacnn::nn
