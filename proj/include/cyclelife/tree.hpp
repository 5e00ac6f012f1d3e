#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "cyclelife/rng.hpp"

namespace cyclelife {

/// Leaf when `feature < 0`; otherwise rows with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::vector<TreeNode>& nodes() { return nodes_; }
  int depth() const;
  void scale_leaves(double factor);

  bool operator==(const RegressionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
};

struct SplitResult {
  double threshold = 0.0;
  double sse_gain = 0.0;
};

/// Best variance-reduction split of one column: midpoint between adjacent
/// sorted distinct values, ties resolved toward the smallest threshold.
/// Throws NoValidSplit when every value is equal.
SplitResult best_split(std::span<const double> feature_values, std::span<const double> y);

struct CartParams {
  int max_depth = 0;  // 0 = unlimited
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  int max_features = 0;  // 0 = all columns considered at every split
};

/// CART regression tree on `rows` (may contain repeats, e.g. a bootstrap draw).
/// `rng` is only consulted when max_features limits the candidate columns.
RegressionTree fit_cart(const Eigen::MatrixXd& x, std::span<const double> y, std::vector<std::size_t> rows,
                        const CartParams& params, Rng* rng = nullptr);

struct SecondOrderTreeParams {
  int max_depth = 6;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;
  double learning_rate = 0.3;
};

/// Gradient/hessian tree: leaf weight -G/(H+lambda) scaled by the learning rate,
/// split gain 1/2[GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma.
RegressionTree fit_second_order_tree(const Eigen::MatrixXd& x, std::span<const double> grad,
                                     std::span<const double> hess, const SecondOrderTreeParams& params);

}  // namespace cyclelife
