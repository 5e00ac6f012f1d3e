#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cyclelife/error.hpp"
#include "cyclelife/rng.hpp"
#include "model_fitters.hpp"

namespace cyclelife {

double soft_threshold(double rho, double lambda) {
  if (lambda < 0.0) fail(ErrorKind::InvalidArgument, "soft_threshold requires lambda >= 0");
  if (rho > lambda) return rho - lambda;
  if (rho < -lambda) return rho + lambda;
  return 0.0;
}

namespace detail {
namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.leftCols(x.cols()) = x;
  a.col(x.cols()).setOnes();
  return a;
}

LinearState unpack(const Eigen::VectorXd& beta) {
  const Eigen::Index p = beta.size() - 1;
  return {beta.head(p), beta(p)};
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

std::optional<LinearState> fit_ols_full_rank(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd a = with_intercept(x);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < a.cols()) return std::nullopt;
  const Eigen::VectorXd beta = qr.solve(y);
  if (!all_finite(beta)) return std::nullopt;
  return unpack(beta);
}

LinearState fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double jitter) {
  if (auto exact = fit_ols_full_rank(x, y)) return *exact;

  // Rank deficient: regularised normal equations.
  const Eigen::MatrixXd a = with_intercept(x);
  Eigen::MatrixXd gram = a.transpose() * a;
  gram.diagonal().array() += jitter;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::VectorXd beta = ldlt.solve(a.transpose() * y);
  if (ldlt.info() != Eigen::Success || !all_finite(beta)) {
    fail(ErrorKind::SingularSystem, "least squares system is singular even with diagonal jitter");
  }
  return unpack(beta);
}

LinearState fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha) {
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += alpha;
  const Eigen::VectorXd rhs = xc.transpose() * yc;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  Eigen::VectorXd w = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !all_finite(w) || (gram * w - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) {
    gram.diagonal().array() += 1e-10;
    ldlt.compute(gram);
    w = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !all_finite(w)) {
      fail(ErrorKind::SingularSystem, "ridge system is singular even with diagonal jitter");
    }
  }
  return {w, y_mean - x_mean.dot(w)};
}

LinearState fit_coordinate_descent(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
                                   double l1_ratio, double tol, int max_sweeps, TrainingDiagnostics& diag) {
  const Eigen::Index n = x.rows(), p = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const double y_mean = y.mean();

  const double l1 = alpha * l1_ratio;
  const double l2 = alpha * (1.0 - l1_ratio);
  Eigen::VectorXd z(p);
  for (Eigen::Index j = 0; j < p; ++j) z(j) = xc.col(j).squaredNorm() * inv_n;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd r = y.array() - y_mean;
  diag.converged = false;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!(z(j) > 0.0)) continue;
      const double old = w(j);
      const double rho = xc.col(j).dot(r) * inv_n + z(j) * old;
      const double updated = soft_threshold(rho, l1) / (z(j) + l2);
      if (updated != old) {
        r -= (updated - old) * xc.col(j);
        w(j) = updated;
      }
      max_change = std::max(max_change, std::abs(updated - old));
    }
    if (max_change < tol) {
      diag.converged = true;
      ++sweep;
      break;
    }
  }
  diag.iterations = sweep;
  return {w, y_mean - x_mean.dot(w)};
}

LinearState fit_sgd(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double step, int epochs,
                    std::uint64_t seed, TrainingDiagnostics& diag) {
  const Eigen::Index n = x.rows();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
  double b = 0.0;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  diag.loss_history.clear();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    for (const auto i : order) {
      const double err = x.row(i).dot(w) + b - y(i);
      w -= step * err * x.row(i).transpose();
      b -= step * err;
    }
    const double mse = ((x * w).array() + b - y.array()).square().mean();
    diag.loss_history.push_back(mse);
    if (!std::isfinite(mse)) {
      fail(ErrorKind::NumericalDivergence, "SGD diverged at epoch " + std::to_string(epoch + 1));
    }
  }
  diag.iterations = epochs;
  return {w, b};
}

}  // namespace detail

TrainedRegressor ransac_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RansacConfig& config) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (y.size() != n) fail(ErrorKind::DimensionMismatch, "x and y row counts differ");
  const int min_samples = config.min_samples > 0 ? config.min_samples : static_cast<int>(p) + 1;
  if (n < min_samples) {
    fail(ErrorKind::InvalidArgument, "RANSAC needs at least " + std::to_string(min_samples) + " rows, got " +
                                         std::to_string(n));
  }
  if (config.iterations < 1) fail(ErrorKind::InvalidArgument, "RANSAC needs at least one iteration");

  // Residuals this close to zero count as exact fits.
  const double floor = 1e-9 * (1.0 + y.cwiseAbs().maxCoeff());
  Rng rng(config.seed);
  std::vector<std::size_t> pool(static_cast<std::size_t>(n));

  std::vector<std::size_t> best_inliers;
  double best_scale = std::numeric_limits<double>::infinity();
  for (int it = 0; it < config.iterations; ++it) {
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (int i = 0; i < min_samples; ++i) {
      const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::uint64_t>(n - i));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    Eigen::MatrixXd xs(min_samples, p);
    Eigen::VectorXd ys(min_samples);
    for (int i = 0; i < min_samples; ++i) {
      xs.row(i) = x.row(static_cast<Eigen::Index>(pool[static_cast<std::size_t>(i)]));
      ys(i) = y(static_cast<Eigen::Index>(pool[static_cast<std::size_t>(i)]));
    }
    const auto trial = detail::fit_ols_full_rank(xs, ys);
    if (!trial) continue;

    const Eigen::VectorXd resid = y - ((x * trial->weights).array() + trial->bias).matrix();
    std::vector<double> r(resid.data(), resid.data() + n);
    const double med = detail::median(r);
    std::vector<double> dev(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) dev[i] = std::abs(r[i] - med);
    const double mad = detail::median(dev);
    const double threshold = std::max(config.mad_multiplier * mad, floor);

    std::vector<std::size_t> inliers;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (std::abs(r[i]) <= threshold) inliers.push_back(i);
    }
    if (std::cmp_less(inliers.size(), min_samples)) continue;
    // Tightest consensus wins; larger inlier sets break ties.
    const double scale = std::max(mad, floor);
    if (scale < best_scale || (scale == best_scale && inliers.size() > best_inliers.size())) {
      best_scale = scale;
      best_inliers = std::move(inliers);
    }
  }
  if (best_inliers.empty()) fail(ErrorKind::NoConsensus, "no RANSAC draw reached the minimum inlier count");

  Eigen::MatrixXd xi(static_cast<Eigen::Index>(best_inliers.size()), p);
  Eigen::VectorXd yi(static_cast<Eigen::Index>(best_inliers.size()));
  for (std::size_t i = 0; i < best_inliers.size(); ++i) {
    xi.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(best_inliers[i]));
    yi(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(best_inliers[i]));
  }
  LinearState fitted = detail::fit_ols(xi, yi, 1e-10);

  TrainingDiagnostics diag;
  diag.iterations = config.iterations;
  diag.inliers = std::move(best_inliers);
  diag.final_training_loss = ((x * fitted.weights).array() + fitted.bias - y.array()).square().mean();
  RegressorSpec spec = RegressorSpec::make(ModelKind::RANSAC, config.seed)
                           .with({{"iterations", config.iterations},
                                  {"min_samples", config.min_samples},
                                  {"mad_multiplier", config.mad_multiplier}});
  TrainedRegressor model(spec, std::nullopt, std::move(fitted), std::move(diag), p);
  return model;
}

}  // namespace cyclelife
