#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uavbc/policy.hpp"
#include "uavbc/trajectory.hpp"

namespace uavbc {

/// Probabilities are clipped to [kProbClip, 1] before taking logs.
inline constexpr double kProbClip = 1e-12;

/// Numerically stable softmax (max-subtracted). Throws on non-finite input.
std::vector<double> softmax(std::span<const double> theta);

struct LossValue {
  double sum = 0;   // summed over the batch
  double mean = 0;  // per sample
};

/// Categorical cross-entropy between one-hot targets and predicted probabilities.
/// Both matrices are classes x batch.
LossValue ce_loss(const Eigen::MatrixXd& y_true, const Eigen::MatrixXd& y_pred);

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;  // out
};

/// Dense ReLU chain with a softmax head.
struct MlpModel {
  FeatureSpec spec;
  std::vector<int> dims;  // [feature_dim, hidden..., n_classes]
  std::vector<DenseLayer> layers;

  int n_classes() const { return dims.back(); }
  void validate() const;
};

/// Zero weights and biases for the given dimension chain.
MlpModel make_model(const FeatureSpec& spec, const std::vector<int>& hidden, int n_classes);

/// He-style uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
void init_he_uniform(MlpModel& model, std::uint64_t seed);

std::vector<double> forward(const MlpModel& model, std::span<const double> x);

/// Column-per-sample forward; returns classes x batch probabilities.
Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& x);

struct Gradients {
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;

  double squared_norm() const;
};

/// Exact gradients of the mean batch loss. x is features x batch; labels are class indices.
Gradients backward(const MlpModel& model, const Eigen::MatrixXd& x, std::span<const int> labels,
                   double* mean_loss = nullptr);

/// Mean batch loss (used by the finite-difference checks).
double batch_loss(const MlpModel& model, const Eigen::MatrixXd& x, std::span<const int> labels);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t t = 0;
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
};

AdamState make_adam_state(const MlpModel& model);

void adam_step(MlpModel& model, const Gradients& g, AdamState& state, double lr, const AdamConfig& cfg = {});

struct TrainConfig {
  int epochs = 40;
  int batch_size = 256;
  double lr0 = 0.001;
  AdamConfig adam;
  std::vector<int> hidden{40, 80, 160, 80};
  std::uint64_t seed = 1;

  /// lr0 / (1 + decay * epoch) with decay = lr0 / epochs.
  double learning_rate(int epoch) const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double train_acc = 0;
  double val_loss = 0;
  double val_acc = 0;
};

struct EvalReport {
  std::int64_t samples = 0;
  double accuracy = 0;
  double mean_loss = 0;
  std::vector<std::vector<std::int64_t>> confusion;  // rows = true, cols = predicted
  std::vector<EpochStats> history;
};

struct Dataset {
  Eigen::MatrixXd x;  // features x samples
  std::vector<int> labels;
};

Dataset make_dataset(const std::vector<TrajectoryRecord>& records, const FeatureSpec& spec);

struct TrainResult {
  MlpModel model;
  std::vector<EpochStats> history;
};

TrainResult train(const Dataset& train_set, const Dataset& val_set, const FeatureSpec& spec, int n_classes,
                  const TrainConfig& cfg);

EvalReport evaluate(const MlpModel& model, const Dataset& data);
EvalReport evaluate(const MlpModel& model, const std::vector<TrajectoryRecord>& records);

void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

/// The learned policy: argmax of the network over encoded queue state; the movement
/// is derived from the chosen UE's sector.
class ClonePolicy final : public Policy {
 public:
  explicit ClonePolicy(MlpModel model);
  Decision decide(const PolicyInput& in) override;
  Source source() const override { return Source::kClone; }
  const MlpModel& model() const { return model_; }

 private:
  MlpModel model_;
  std::vector<double> features_;
};

int argmax(std::span<const double> v);

}  // namespace uavbc
