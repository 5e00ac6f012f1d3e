#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cyclelife/error.hpp"
#include "model_fitters.hpp"

namespace cyclelife::detail {

KnnState fit_knn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int k) {
  if (k < 1) fail(ErrorKind::InvalidArgument, "KNN requires k >= 1");
  return {x, y, k};
}

double knn_predict(const KnnState& knn, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const Eigen::Index n = knn.x.rows();
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = {(knn.x.row(i) - row).squaredNorm(), i};
  const auto k = static_cast<std::size_t>(std::min<Eigen::Index>(knn.k, n));
  // Pair ordering sorts by distance, then by lower row index.
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += knn.y(dist[i].second);
  return sum / static_cast<double>(k);
}

namespace {

double rbf(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b,
           double gamma) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

}  // namespace

// Epsilon-SVR dual in the 2n-variable form
//   min 1/2 a'Qa + p'a   s.t. s'a = 0, 0 <= a <= C
// with a = [alpha; alpha*], s = [+1; -1], p = [eps - y; eps + y], Q_ts = s_t s_s K.
// Pairwise updates with second-order working-set selection.
SvrState fit_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SvrConfig& config,
                 TrainingDiagnostics& diag) {
  const Eigen::Index n = x.rows();
  const auto l = static_cast<std::size_t>(2 * n);
  const double gamma = config.gamma > 0.0 ? config.gamma : 1.0 / static_cast<double>(std::max<Eigen::Index>(1, x.cols()));
  const double C = config.c;
  constexpr double kTau = 1e-12;

  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) K(i, j) = K(j, i) = rbf(x.row(i), x.row(j), gamma);
  }

  auto sample = [n](std::size_t t) { return static_cast<Eigen::Index>(t) % n; };
  auto sign = [n](std::size_t t) { return static_cast<Eigen::Index>(t) < n ? 1.0 : -1.0; };
  auto q = [&](std::size_t t, std::size_t s) { return sign(t) * sign(s) * K(sample(t), sample(s)); };

  std::vector<double> alpha(l, 0.0), grad(l);
  for (std::size_t t = 0; t < l; ++t) {
    grad[t] = config.epsilon - sign(t) * y(sample(t));
  }

  const long long max_iterations = static_cast<long long>(config.max_passes) * static_cast<long long>(l);
  long long iter = 0;
  diag.converged = false;
  for (; iter < max_iterations; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i = -1, j = -1;
    for (std::size_t t = 0; t < l; ++t) {
      if (sign(t) > 0) {
        if (alpha[t] < C && -grad[t] >= gmax) {
          gmax = -grad[t];
          i = static_cast<std::ptrdiff_t>(t);
        }
      } else if (alpha[t] > 0.0 && grad[t] >= gmax) {
        gmax = grad[t];
        i = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (i < 0) {
      diag.converged = true;
      break;
    }
    const auto iu = static_cast<std::size_t>(i);
    double obj_min = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < l; ++t) {
      double grad_diff = 0.0;
      if (sign(t) > 0) {
        if (!(alpha[t] > 0.0)) continue;
        grad_diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
      } else {
        if (!(alpha[t] < C)) continue;
        grad_diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
      }
      if (grad_diff > 0.0) {
        double quad = K(sample(iu), sample(iu)) + K(sample(t), sample(t)) - 2.0 * K(sample(iu), sample(t));
        if (quad <= 0.0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= obj_min) {
          obj_min = obj;
          j = static_cast<std::ptrdiff_t>(t);
        }
      }
    }
    if (gmax + gmax2 < config.tol || j < 0) {
      diag.converged = true;
      break;
    }
    const auto ju = static_cast<std::size_t>(j);

    const double old_i = alpha[iu], old_j = alpha[ju];
    const double qij = q(iu, ju);
    if (sign(iu) != sign(ju)) {
      double quad = 2.0 + 2.0 * qij;  // K_ii = K_jj = 1
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[iu] - grad[ju]) / quad;
      const double diff = alpha[iu] - alpha[ju];
      alpha[iu] += delta;
      alpha[ju] += delta;
      if (diff > 0.0) {
        if (alpha[ju] < 0.0) {
          alpha[ju] = 0.0;
          alpha[iu] = diff;
        }
      } else if (alpha[iu] < 0.0) {
        alpha[iu] = 0.0;
        alpha[ju] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[iu] > C) {
          alpha[iu] = C;
          alpha[ju] = C - diff;
        }
      } else if (alpha[ju] > C) {
        alpha[ju] = C;
        alpha[iu] = C + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[iu] - grad[ju]) / quad;
      const double sum = alpha[iu] + alpha[ju];
      alpha[iu] -= delta;
      alpha[ju] += delta;
      if (sum > C) {
        if (alpha[iu] > C) {
          alpha[iu] = C;
          alpha[ju] = sum - C;
        }
      } else if (alpha[ju] < 0.0) {
        alpha[ju] = 0.0;
        alpha[iu] = sum;
      }
      if (sum > C) {
        if (alpha[ju] > C) {
          alpha[ju] = C;
          alpha[iu] = sum - C;
        }
      } else if (alpha[iu] < 0.0) {
        alpha[iu] = 0.0;
        alpha[ju] = sum;
      }
    }

    const double d_i = alpha[iu] - old_i;
    const double d_j = alpha[ju] - old_j;
    for (std::size_t t = 0; t < l; ++t) grad[t] += q(iu, t) * d_i + q(ju, t) * d_j;
  }
  diag.iterations = static_cast<int>(std::min<long long>(iter, std::numeric_limits<int>::max()));

  // Offset from free variables, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  int n_free = 0;
  for (std::size_t t = 0; t < l; ++t) {
    const double yg = sign(t) * grad[t];
    if (alpha[t] >= C) {
      if (sign(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (sign(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);

  SvrState state;
  state.gamma = gamma;
  state.bias = -rho;
  std::vector<Eigen::Index> support;
  std::vector<double> coef;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = alpha[static_cast<std::size_t>(i)] - alpha[static_cast<std::size_t>(i + n)];
    if (c != 0.0) {
      support.push_back(i);
      coef.push_back(c);
    }
  }
  state.support.resize(static_cast<Eigen::Index>(support.size()), x.cols());
  state.coef.resize(static_cast<Eigen::Index>(support.size()));
  for (std::size_t s = 0; s < support.size(); ++s) {
    state.support.row(static_cast<Eigen::Index>(s)) = x.row(support[s]);
    state.coef(static_cast<Eigen::Index>(s)) = coef[s];
  }
  return state;
}

double svr_predict(const SvrState& svr, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  double f = svr.bias;
  for (Eigen::Index s = 0; s < svr.support.rows(); ++s) f += svr.coef(s) * rbf(svr.support.row(s), row, svr.gamma);
  return f;
}

}  // namespace cyclelife::detail
