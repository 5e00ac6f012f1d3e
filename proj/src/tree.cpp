#include "cyclelife/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "cyclelife/error.hpp"

namespace cyclelife {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Midpoint that still separates lo from hi when they are adjacent doubles.
double separating_midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

struct ColumnSplit {
  bool found = false;
  double threshold = 0.0;
  double gain = kNegInf;
};

// Variance-reduction scan of one column over `order` (already sorted by value).
// gain = sL^2/nL + sR^2/nR - S^2/n on node-centred targets, which equals
// SSE(parent) - SSE(left) - SSE(right).
template <typename ValueAt, typename TargetAt>
ColumnSplit scan_sse(std::span<const std::size_t> order, ValueAt value, TargetAt target, int min_leaf) {
  ColumnSplit best;
  const std::size_t n = order.size();
  if (n < 2) return best;
  double mean = 0.0;
  for (const auto r : order) mean += target(r);
  mean /= static_cast<double>(n);
  double total = 0.0, parent_sse = 0.0;
  for (const auto r : order) {
    const double d = target(r) - mean;
    total += d;
    parent_sse += d * d;
  }
  const double tie_eps = 1e-12 * parent_sse;
  const double base = total * total / static_cast<double>(n);

  double left_sum = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    left_sum += target(order[i]) - mean;
    const std::size_t n_left = i + 1;
    const std::size_t n_right = n - n_left;
    if (std::cmp_less(n_left, min_leaf) || std::cmp_less(n_right, min_leaf)) continue;
    const double lo = value(order[i]);
    const double hi = value(order[i + 1]);
    if (!(lo < hi)) continue;
    const double right_sum = total - left_sum;
    const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                        right_sum * right_sum / static_cast<double>(n_right) - base;
    if (!best.found || gain > best.gain + tie_eps) {
      best.found = true;
      best.gain = gain;
      best.threshold = separating_midpoint(lo, hi);
    }
  }
  return best;
}

void sort_by_column(std::vector<std::size_t>& order, const Eigen::MatrixXd& x, int feature) {
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x(static_cast<Eigen::Index>(a), feature) < x(static_cast<Eigen::Index>(b), feature);
  });
}

std::vector<int> candidate_features(int p, int max_features, Rng* rng) {
  std::vector<int> features(static_cast<std::size_t>(p));
  std::iota(features.begin(), features.end(), 0);
  if (max_features <= 0 || max_features >= p || rng == nullptr) return features;
  // Partial Fisher-Yates: the first max_features entries are a uniform sample.
  for (int i = 0; i < max_features; ++i) {
    const auto j = i + static_cast<int>(rng->below(static_cast<std::uint64_t>(p - i)));
    std::swap(features[static_cast<std::size_t>(i)], features[static_cast<std::size_t>(j)]);
  }
  features.resize(static_cast<std::size_t>(max_features));
  std::sort(features.begin(), features.end());
  return features;
}

class CartBuilder {
 public:
  CartBuilder(const Eigen::MatrixXd& x, std::span<const double> y, const CartParams& params, Rng* rng)
      : x_(x), y_(y), params_(params), rng_(rng) {}

  std::vector<TreeNode> build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto r : rows) {
      sum += y_[r];
      lo = std::min(lo, y_[r]);
      hi = std::max(hi, y_[r]);
    }
    nodes_[static_cast<std::size_t>(id)].value = sum / static_cast<double>(rows.size());

    const bool pure = !(lo < hi);
    if (pure || std::cmp_less(rows.size(), params_.min_samples_split) ||
        (params_.max_depth > 0 && depth >= params_.max_depth)) {
      return id;
    }

    int best_feature = -1;
    ColumnSplit best;
    std::vector<std::size_t> order = rows;
    for (const int f : candidate_features(static_cast<int>(x_.cols()), params_.max_features, rng_)) {
      sort_by_column(order, x_, f);
      const auto split = scan_sse(
          std::span<const std::size_t>(order), [&](std::size_t r) { return x_(static_cast<Eigen::Index>(r), f); },
          [&](std::size_t r) { return y_[r]; }, params_.min_samples_leaf);
      if (split.found && (best_feature < 0 || split.gain > best.gain + 1e-12 * std::abs(best.gain))) {
        best = split;
        best_feature = f;
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (const auto r : rows) {
      (x_(static_cast<Eigen::Index>(r), best_feature) <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  std::span<const double> y_;
  CartParams params_;
  Rng* rng_;
  std::vector<TreeNode> nodes_;
};

class SecondOrderBuilder {
 public:
  SecondOrderBuilder(const Eigen::MatrixXd& x, std::span<const double> g, std::span<const double> h,
                     const SecondOrderTreeParams& params)
      : x_(x), g_(g), h_(h), params_(params) {}

  std::vector<TreeNode> build() {
    std::vector<std::size_t> rows(static_cast<std::size_t>(x_.rows()));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  double score(double g, double h) const { return g * g / (h + params_.lambda); }

  int grow(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double G = 0.0, H = 0.0;
    for (const auto r : rows) {
      G += g_[r];
      H += h_[r];
    }
    nodes_[static_cast<std::size_t>(id)].value = -G / (H + params_.lambda) * params_.learning_rate;
    if (depth >= params_.max_depth || rows.size() < 2) return id;

    const double parent = score(G, H);
    int best_feature = -1;
    double best_gain = 0.0, best_threshold = 0.0;
    std::vector<std::size_t> order = rows;
    for (int f = 0; f < x_.cols(); ++f) {
      sort_by_column(order, x_, f);
      double gl = 0.0, hl = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        gl += g_[order[i]];
        hl += h_[order[i]];
        const double lo = x_(static_cast<Eigen::Index>(order[i]), f);
        const double hi = x_(static_cast<Eigen::Index>(order[i + 1]), f);
        if (!(lo < hi)) continue;
        const double hr = H - hl;
        if (hl < params_.min_child_weight || hr < params_.min_child_weight) continue;
        const double gain = 0.5 * (score(gl, hl) + score(G - gl, hr) - parent) - params_.gamma;
        if (gain > best_gain + 1e-12 * std::abs(best_gain)) {
          best_gain = gain;
          best_feature = f;
          best_threshold = separating_midpoint(lo, hi);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (const auto r : rows) {
      (x_(static_cast<Eigen::Index>(r), best_feature) <= best_threshold ? left : right).push_back(r);
    }
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  std::span<const double> g_;
  std::span<const double> h_;
  SecondOrderTreeParams params_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  if (nodes_.empty()) fail(ErrorKind::InvalidArgument, "empty tree");
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(row(n.feature) <= n.threshold ? n.left : n.right);
  }
  return nodes_[i].value;
}

int RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::function<int(int)> walk = [&](int i) -> int {
    const auto& n = nodes_[static_cast<std::size_t>(i)];
    return n.is_leaf() ? 0 : 1 + std::max(walk(n.left), walk(n.right));
  };
  return walk(0);
}

void RegressionTree::scale_leaves(double factor) {
  for (auto& n : nodes_) {
    if (n.is_leaf()) n.value *= factor;
  }
}

SplitResult best_split(std::span<const double> feature_values, std::span<const double> y) {
  if (feature_values.size() != y.size()) fail(ErrorKind::DimensionMismatch, "column and targets differ in length");
  if (feature_values.size() < 2) fail(ErrorKind::InvalidArgument, "best_split needs at least 2 rows");
  std::vector<std::size_t> order(feature_values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return feature_values[a] < feature_values[b]; });
  const auto split = scan_sse(
      std::span<const std::size_t>(order), [&](std::size_t r) { return feature_values[r]; },
      [&](std::size_t r) { return y[r]; }, 1);
  if (!split.found) fail(ErrorKind::NoValidSplit, "all feature values are equal");
  return {split.threshold, split.gain};
}

RegressionTree fit_cart(const Eigen::MatrixXd& x, std::span<const double> y, std::vector<std::size_t> rows,
                        const CartParams& params, Rng* rng) {
  if (rows.empty()) fail(ErrorKind::InvalidArgument, "cannot fit a tree on zero rows");
  if (std::cmp_not_equal(y.size(), x.rows())) fail(ErrorKind::DimensionMismatch, "x and y row counts differ");
  return RegressionTree(CartBuilder(x, y, params, rng).build(std::move(rows)));
}

RegressionTree fit_second_order_tree(const Eigen::MatrixXd& x, std::span<const double> grad,
                                     std::span<const double> hess, const SecondOrderTreeParams& params) {
  if (std::cmp_not_equal(grad.size(), x.rows()) || grad.size() != hess.size()) {
    fail(ErrorKind::DimensionMismatch, "gradient/hessian length does not match rows");
  }
  if (x.rows() == 0) fail(ErrorKind::InvalidArgument, "cannot fit a tree on zero rows");
  return RegressionTree(SecondOrderBuilder(x, grad, hess, params).build());
}

}  // namespace cyclelife
