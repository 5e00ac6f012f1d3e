#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cyclelife/features.hpp"
#include "cyclelife/tree.hpp"

namespace cyclelife {

enum class ModelKind {
  Linear,
  Ridge,
  Lasso,
  ElasticNet,
  SGD,
  DecisionTree,
  RandomForest,
  GradientBoost,
  AdaBoost,
  XGBoostStyle,
  KNN,
  SVR,
  RANSAC,
  MLP,
};

inline constexpr std::array<ModelKind, 14> kAllModelKinds = {
    ModelKind::Linear,       ModelKind::ElasticNet,    ModelKind::Lasso,    ModelKind::Ridge,
    ModelKind::SGD,          ModelKind::DecisionTree,  ModelKind::GradientBoost, ModelKind::KNN,
    ModelKind::RandomForest, ModelKind::AdaBoost,      ModelKind::XGBoostStyle,  ModelKind::SVR,
    ModelKind::RANSAC,       ModelKind::MLP,
};

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
/// Row label used in rendered tables, e.g. "Random Forest".
std::string_view display_name(ModelKind kind);

using Hyperparams = std::map<std::string, double, std::less<>>;

/// Defaults for every hyperparameter the kind accepts.
Hyperparams default_hyperparams(ModelKind kind);
/// Whether the kind requires z-scored inputs (distance, gradient and coordinate-descent models).
bool requires_standardized_inputs(ModelKind kind);

struct RegressorSpec {
  ModelKind kind = ModelKind::Linear;
  std::string label;  // display label; defaults to display_name(kind)
  Hyperparams hyperparams;
  std::uint64_t seed = 0;
  bool standardize_inputs = false;

  /// Spec with defaults filled in for `kind`.
  static RegressorSpec make(ModelKind kind, std::uint64_t seed = 0);
  /// Applies overrides on top of the kind defaults; rejects unknown keys.
  RegressorSpec with(const Hyperparams& overrides) const;
  double param(std::string_view key) const;
  std::string display_label() const;
  /// Throws InvalidArgument for unknown keys or out-of-range values.
  void validate() const;
};

struct LinearState {
  Eigen::VectorXd weights;
  double bias = 0.0;
};

struct TreeEnsembleState {
  enum class Combine { Mean, Sum, WeightedMedian };
  Combine combine = Combine::Mean;
  double base = 0.0;
  std::vector<RegressionTree> trees;
  std::vector<double> tree_weights;  // AdaBoost only
};

struct KnnState {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  int k = 5;
};

struct SvrState {
  Eigen::MatrixXd support;
  Eigen::VectorXd coef;  // alpha - alpha*
  double bias = 0.0;
  double gamma = 1.0;
};

/// Fully connected ReLU network with a linear output unit; parameters are
/// stored flat as [W0, b0, W1, b1, ...] with W_l of shape (out x in), column-major.
struct MlpState {
  std::vector<int> layer_sizes;  // input, hidden..., 1
  Eigen::VectorXd params;
};

using FittedState = std::variant<LinearState, TreeEnsembleState, KnnState, SvrState, MlpState>;

struct TrainingDiagnostics {
  int iterations = 0;
  double final_training_loss = 0.0;  // training MSE in target units
  bool converged = true;
  std::vector<double> loss_history;  // per round/epoch where the algorithm is iterative
  std::vector<std::size_t> inliers;  // RANSAC consensus set
};

class TrainedRegressor {
 public:
  TrainedRegressor() = default;
  TrainedRegressor(RegressorSpec spec, std::optional<Standardizer> scaler, FittedState state,
                   TrainingDiagnostics diagnostics, Eigen::Index n_features);

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

  const RegressorSpec& spec() const { return spec_; }
  const std::optional<Standardizer>& scaler() const { return scaler_; }
  const FittedState& state() const { return state_; }
  const TrainingDiagnostics& diagnostics() const { return diagnostics_; }
  Eigen::Index n_features() const { return n_features_; }

 private:
  RegressorSpec spec_;
  std::optional<Standardizer> scaler_;
  FittedState state_;
  TrainingDiagnostics diagnostics_;
  Eigen::Index n_features_ = 0;
};

TrainedRegressor train(const RegressorSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
Eigen::VectorXd predict(const TrainedRegressor& model, const Eigen::MatrixXd& x);

/// Versioned, self-describing JSON text; `deserialize_model(serialize_model(m))` predicts identically.
std::string serialize_model(const TrainedRegressor& model);
TrainedRegressor deserialize_model(std::string_view text);

// Building blocks exposed for direct testing.

/// sign(rho) * max(|rho| - lambda, 0)
double soft_threshold(double rho, double lambda);

struct RansacConfig {
  int iterations = 100;
  int min_samples = 0;  // 0 = columns + 1
  double mad_multiplier = 3.0;
  std::uint64_t seed = 0;
};
/// Consensus linear fit; the returned model's diagnostics list the inlier rows.
TrainedRegressor ransac_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RansacConfig& config);

/// Half mean squared error of an MLP and its gradient with respect to the flat parameters.
struct MlpLoss {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};
MlpState init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed);
Eigen::VectorXd mlp_forward(const MlpState& net, const Eigen::MatrixXd& x);
MlpLoss mlp_loss_and_gradient(const MlpState& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

}  // namespace cyclelife
