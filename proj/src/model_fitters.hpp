#pragma once

// Per-algorithm fitting routines. Inputs are already standardized when the
// kind requires it; the dispatcher in regressor.cpp owns that step.

#include <Eigen/Dense>

#include "cyclelife/adam.hpp"
#include "cyclelife/regressor.hpp"

namespace cyclelife::detail {

LinearState fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double jitter);
/// Exact least squares when the design [x 1] has full column rank; nullopt otherwise.
std::optional<LinearState> fit_ols_full_rank(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
LinearState fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha);
LinearState fit_coordinate_descent(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
                                   double l1_ratio, double tol, int max_sweeps, TrainingDiagnostics& diag);
LinearState fit_sgd(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double step, int epochs,
                    std::uint64_t seed, TrainingDiagnostics& diag);

TreeEnsembleState fit_decision_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const CartParams& params);
TreeEnsembleState fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_trees,
                                    const CartParams& params, std::uint64_t seed);
TreeEnsembleState fit_gradient_boost(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int rounds,
                                     double learning_rate, int max_depth, TrainingDiagnostics& diag);
TreeEnsembleState fit_adaboost_r2(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_estimators,
                                  int max_depth, double learning_rate, std::uint64_t seed,
                                  TrainingDiagnostics& diag);
TreeEnsembleState fit_xgboost_style(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int rounds,
                                    const SecondOrderTreeParams& params, TrainingDiagnostics& diag);

KnnState fit_knn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int k);
double knn_predict(const KnnState& knn, const Eigen::Ref<const Eigen::RowVectorXd>& row);

struct SvrConfig {
  double c = 100.0;
  double epsilon = 0.1;
  double gamma = 0.0;  // 0 = 1 / columns
  double tol = 1e-3;
  int max_passes = 10000;
};
SvrState fit_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SvrConfig& config,
                 TrainingDiagnostics& diag);
double svr_predict(const SvrState& svr, const Eigen::Ref<const Eigen::RowVectorXd>& row);

MlpState fit_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<int>& hidden,
                 int epochs, const AdamConfig& adam, std::uint64_t seed, TrainingDiagnostics& diag);

double predict_row(const FittedState& state, const Eigen::Ref<const Eigen::RowVectorXd>& row);
Eigen::VectorXd predict_all(const FittedState& state, const Eigen::MatrixXd& z);

}  // namespace cyclelife::detail
