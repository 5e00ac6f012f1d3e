#include <algorithm>
#include <cmath>
#include <numeric>

#include "cyclelife/error.hpp"
#include "cyclelife/parallel.hpp"
#include "cyclelife/rng.hpp"
#include "model_fitters.hpp"

namespace cyclelife::detail {
namespace {

std::vector<std::size_t> all_rows(Eigen::Index n) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

Eigen::VectorXd tree_predictions(const RegressionTree& tree, const Eigen::MatrixXd& x) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = tree.predict(x.row(i));
  return out;
}

}  // namespace

TreeEnsembleState fit_decision_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const CartParams& params) {
  TreeEnsembleState state;
  state.combine = TreeEnsembleState::Combine::Mean;
  state.trees.push_back(fit_cart(x, as_span(y), all_rows(x.rows()), params));
  return state;
}

TreeEnsembleState fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_trees,
                                    const CartParams& params, std::uint64_t seed) {
  TreeEnsembleState state;
  state.combine = TreeEnsembleState::Combine::Mean;
  state.trees.resize(static_cast<std::size_t>(n_trees));
  const auto n = static_cast<std::uint64_t>(x.rows());
  parallel::for_each_index(static_cast<std::size_t>(n_trees), [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<std::size_t> sample(n);
    for (auto& r : sample) r = static_cast<std::size_t>(rng.below(n));
    state.trees[t] = fit_cart(x, as_span(y), std::move(sample), params, &rng);
  });
  return state;
}

TreeEnsembleState fit_gradient_boost(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int rounds,
                                     double learning_rate, int max_depth, TrainingDiagnostics& diag) {
  TreeEnsembleState state;
  state.combine = TreeEnsembleState::Combine::Sum;
  state.base = y.mean();
  Eigen::VectorXd fitted = Eigen::VectorXd::Constant(y.size(), state.base);
  CartParams params;
  params.max_depth = max_depth;
  const auto rows = all_rows(x.rows());
  diag.loss_history.clear();
  for (int m = 0; m < rounds; ++m) {
    const Eigen::VectorXd residual = y - fitted;
    RegressionTree tree = fit_cart(x, as_span(residual), rows, params);
    tree.scale_leaves(learning_rate);
    fitted += tree_predictions(tree, x);
    state.trees.push_back(std::move(tree));
    diag.loss_history.push_back((y - fitted).squaredNorm() / static_cast<double>(y.size()));
  }
  diag.iterations = rounds;
  return state;
}

TreeEnsembleState fit_adaboost_r2(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_estimators,
                                  int max_depth, double learning_rate, std::uint64_t seed,
                                  TrainingDiagnostics& diag) {
  const Eigen::Index n = x.rows();
  TreeEnsembleState state;
  state.combine = TreeEnsembleState::Combine::WeightedMedian;
  std::vector<double> weights(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
  std::vector<double> cumulative(static_cast<std::size_t>(n));
  CartParams params;
  params.max_depth = max_depth;

  int rounds = 0;
  for (int m = 0; m < n_estimators; ++m) {
    ++rounds;
    // Weighted bootstrap: draw n rows with probability proportional to the current weights.
    std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
    const double total = cumulative.back();
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(m)));
    std::vector<std::size_t> sample(static_cast<std::size_t>(n));
    for (auto& r : sample) {
      const double u = rng.uniform() * total;
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      r = std::min(static_cast<std::size_t>(it - cumulative.begin()), static_cast<std::size_t>(n - 1));
    }
    RegressionTree tree = fit_cart(x, {y.data(), static_cast<std::size_t>(n)}, std::move(sample), params);

    const Eigen::VectorXd err = (tree_predictions(tree, x) - y).cwiseAbs();
    const double max_err = err.maxCoeff();
    if (!(max_err > 0.0)) {
      state.trees.push_back(std::move(tree));
      state.tree_weights.push_back(1.0);
      break;
    }
    double avg_loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) avg_loss += weights[static_cast<std::size_t>(i)] * err(i) / max_err;
    avg_loss /= total;
    if (avg_loss >= 0.5) {
      if (state.trees.empty()) {
        state.trees.push_back(std::move(tree));
        state.tree_weights.push_back(1.0);
      }
      break;
    }
    const double beta = avg_loss / (1.0 - avg_loss);
    state.trees.push_back(std::move(tree));
    state.tree_weights.push_back(learning_rate * std::log(1.0 / beta));

    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& w = weights[static_cast<std::size_t>(i)];
      w *= std::pow(beta, (1.0 - err(i) / max_err) * learning_rate);
      sum += w;
    }
    if (!(sum > 0.0)) break;
    for (auto& w : weights) w /= sum;
  }
  diag.iterations = rounds;
  return state;
}

TreeEnsembleState fit_xgboost_style(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int rounds,
                                    const SecondOrderTreeParams& params, TrainingDiagnostics& diag) {
  TreeEnsembleState state;
  state.combine = TreeEnsembleState::Combine::Sum;
  state.base = y.mean();
  Eigen::VectorXd fitted = Eigen::VectorXd::Constant(y.size(), state.base);
  const std::vector<double> hess(static_cast<std::size_t>(y.size()), 1.0);
  diag.loss_history.clear();
  for (int m = 0; m < rounds; ++m) {
    // Squared loss 1/2 (f - y)^2: gradient f - y, hessian 1.
    const Eigen::VectorXd grad = fitted - y;
    RegressionTree tree = fit_second_order_tree(x, as_span(grad), hess, params);
    fitted += tree_predictions(tree, x);
    state.trees.push_back(std::move(tree));
    diag.loss_history.push_back((y - fitted).squaredNorm() / static_cast<double>(y.size()));
  }
  diag.iterations = rounds;
  return state;
}

}  // namespace cyclelife::detail
