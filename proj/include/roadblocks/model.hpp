#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roadblocks/types.hpp"

namespace roadblocks {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Feature-wise mean and scale fitted on a training set.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // entries > 0

  /// x <- (x - mean) / scale, row by row.
  void apply(Eigen::Ref<RowMatrix> x) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  static Standardization identity(Eigen::Index dim);
};

/// Per-feature population mean and std; stds below 1e-12 become 1.
Standardization standardize_fit(const Eigen::Ref<const RowMatrix>& samples);

/// One hidden ReLU layer, one sigmoid output. The last column of `hidden`
/// and the last entry of `output` are biases.
struct MlpModel {
  Eigen::MatrixXd hidden;     // n_hidden x (input_dim + 1)
  Eigen::RowVectorXd output;  // 1 x (n_hidden + 1)
  Standardization standardization;
  BlockConfig block_config;
  FeatureLayout layout;

  Eigen::Index input_dim() const { return hidden.cols() - 1; }
  Eigen::Index n_hidden() const { return hidden.rows(); }

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero,
  /// identity standardization.
  static MlpModel initialized(Eigen::Index input_dim, Eigen::Index n_hidden, std::uint64_t seed);
};

/// Output logits for standardized rows.
Eigen::VectorXd logits(const MlpModel& model, const Eigen::Ref<const RowMatrix>& x);

/// sigma(W_o . relu(W_h . [v; 1])) for standardized rows.
Eigen::VectorXd forward_batch(const MlpModel& model, const Eigen::Ref<const RowMatrix>& x);

/// Same as forward_batch for one standardized vector.
double forward(const MlpModel& model, const Eigen::VectorXd& v);

/// Road iff probability > 0.5.
inline Label threshold_label(double probability) {
  return probability > 0.5 ? Label::Road : Label::NonRoad;
}
Label predict_label(const MlpModel& model, const Eigen::VectorXd& v);

/// Numerically stable sigmoid.
double sigmoid(double z);

struct Gradients {
  double loss = 0.0;  // mean binary cross-entropy
  Eigen::MatrixXd hidden;
  Eigen::RowVectorXd output;
};

/// Mean binary cross-entropy over the rows and its gradient.
Gradients loss_and_gradient(const MlpModel& model, const Eigen::Ref<const RowMatrix>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& labels);

/// Mean binary cross-entropy only.
double loss(const MlpModel& model, const Eigen::Ref<const RowMatrix>& x, const Eigen::Ref<const Eigen::VectorXd>& labels);

/// Rescales every neuron's incoming weights (bias excluded) whose Euclidean
/// norm exceeds the layer limit down to exactly the limit.
void apply_max_norm(MlpModel& model, double max_norm_hidden, double max_norm_output);

/// Fraction of rows whose thresholded prediction matches the label.
double accuracy(const MlpModel& model, const Eigen::Ref<const RowMatrix>& x, const Eigen::Ref<const Eigen::VectorXd>& labels);

struct TrainConfig {
  int n_hidden = 100;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 100;
  int patience = 30;
  int max_epochs = 1000;
  double max_norm_hidden = 2.0;
  double max_norm_output = 2.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  bool improved = false;
};

struct TrainResult {
  MlpModel model;  // best-validation weights
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
};

struct TrainHooks {
  /// Replaces validation accuracy; receives the current model and epoch.
  std::function<double(const MlpModel&, int)> validation_scorer;
  /// Called after every mini-batch update (after max-norm projection).
  std::function<void(const MlpModel&)> after_update;
  /// Called after every epoch.
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mini-batch SGD with momentum on binary cross-entropy, max-norm projection
/// after each update, early stopping after `patience` epochs without a
/// strict improvement in validation accuracy. Inputs must already be
/// standardized; the returned model carries identity standardization.
TrainResult train(const SampleSet& train_set, const SampleSet& val_set, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

// ---------------------------------------------------------------------------
// Model file

struct ModelFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ModelVersionError : ModelFormatError {
  using ModelFormatError::ModelFormatError;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Little-endian binary: "RDMB", u32 version, length-prefixed sections
/// (block config, layout tag, standardization, W_h, W_o), CRC32 trailer.
std::vector<std::uint8_t> serialize_model(const MlpModel& model);
MlpModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace roadblocks
