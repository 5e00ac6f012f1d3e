#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "cyclelife/error.hpp"
#include "cyclelife/regressor.hpp"
#include "support/oracles.hpp"

using namespace cyclelife;

namespace {

struct Problem {
  oracle::Mat rows;
  oracle::Vec y;
  Eigen::MatrixXd x;
  Eigen::VectorXd ye;
};

Problem random_problem(oracle::Lcg& g, int n, int p, double noise) {
  Problem pr;
  oracle::Vec w(static_cast<std::size_t>(p));
  for (auto& v : w) v = g.uniform(-3, 3);
  const double b = g.uniform(-5, 5);
  pr.x.resize(n, p);
  pr.ye.resize(n);
  for (int i = 0; i < n; ++i) {
    oracle::Vec row(static_cast<std::size_t>(p));
    double t = b;
    for (int j = 0; j < p; ++j) {
      row[static_cast<std::size_t>(j)] = g.uniform(-2, 2) * (1.0 + j);
      t += w[static_cast<std::size_t>(j)] * row[static_cast<std::size_t>(j)];
      pr.x(i, j) = row[static_cast<std::size_t>(j)];
    }
    t += noise * g.normal();
    pr.rows.push_back(row);
    pr.y.push_back(t);
    pr.ye(i) = t;
  }
  return pr;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); }

void expect_matches_oracle(const LinearState& s, const oracle::LinearFit& o, double tol) {
  ASSERT_EQ(static_cast<std::size_t>(s.weights.size()), o.weights.size());
  for (std::size_t j = 0; j < o.weights.size(); ++j) {
    EXPECT_LT(rel(s.weights(static_cast<Eigen::Index>(j)), o.weights[j]), tol) << "w" << j;
  }
  EXPECT_LT(rel(s.bias, o.intercept), tol);
}

// Lasso objective with the intercept profiled out: 1/(2n)|yc - Zc w|^2 + alpha |w|_1.
double lasso_objective(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, double w0, double w1, double alpha) {
  const Eigen::RowVectorXd zm = z.colwise().mean();
  const double ym = y.mean();
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double r = (y(i) - ym) - (z(i, 0) - zm(0)) * w0 - (z(i, 1) - zm(1)) * w1;
    s += r * r;
  }
  return s / (2.0 * static_cast<double>(z.rows())) + alpha * (std::abs(w0) + std::abs(w1));
}

}  // namespace

TEST(Ridge, ZeroAlphaIsLeastSquares) {
  Eigen::MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  Eigen::VectorXd y(4);
  y << 3, 5, 7, 9;
  const auto m = train(RegressorSpec::make(ModelKind::Ridge).with({{"alpha", 0.0}}), x, y);
  const auto& s = std::get<LinearState>(m.state());
  EXPECT_NEAR(s.weights(0), 2.0, 1e-12);
  EXPECT_NEAR(s.bias, 1.0, 1e-12);
}

TEST(LinearOracle, FiftyRandomInstances) {
  oracle::Lcg g(2024);
  for (int t = 0; t < 50; ++t) {
    const int p = g.integer(1, 8);
    const int n = g.integer(p + 3, 50);
    const Problem pr = random_problem(g, n, p, 0.5);
    const auto lin = train(RegressorSpec::make(ModelKind::Linear), pr.x, pr.ye);
    expect_matches_oracle(std::get<LinearState>(lin.state()), oracle::normal_equations(pr.rows, pr.y, 0.0), 1e-8);
    const double alpha = g.uniform(0.01, 10.0);
    const auto ridge = train(RegressorSpec::make(ModelKind::Ridge).with({{"alpha", alpha}}), pr.x, pr.ye);
    expect_matches_oracle(std::get<LinearState>(ridge.state()), oracle::normal_equations(pr.rows, pr.y, alpha),
                          1e-8);
  }
}

TEST(Linear, RankDeficientFallsBackToJitter) {
  Eigen::MatrixXd x(5, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;  // second column duplicates the first
  Eigen::VectorXd y(5);
  y << 1, 2, 3, 4, 5;
  const auto m = train(RegressorSpec::make(ModelKind::Linear), x, y);
  const Eigen::VectorXd pred = m.predict(x);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(pred(i), y(i), 1e-6);
}

TEST(Ridge, ShrinkageMonotoneInAlpha) {
  oracle::Lcg g(5);
  const Problem pr = random_problem(g, 30, 4, 0.3);
  double previous = std::numeric_limits<double>::infinity();
  for (const double alpha : {0.0, 0.1, 1.0, 10.0, 100.0, 1000.0}) {
    const auto m = train(RegressorSpec::make(ModelKind::Ridge).with({{"alpha", alpha}}), pr.x, pr.ye);
    const double norm = std::get<LinearState>(m.state()).weights.norm();
    EXPECT_LE(norm, previous + 1e-12) << alpha;
    previous = norm;
  }
}

TEST(SoftThreshold, Examples) {
  EXPECT_EQ(soft_threshold(3.0, 1.0), 2.0);
  EXPECT_EQ(soft_threshold(-3.0, 1.0), -2.0);
  EXPECT_EQ(soft_threshold(0.5, 1.0), 0.0);
  EXPECT_EQ(soft_threshold(-1.0, 1.0), 0.0);
  EXPECT_THROW(soft_threshold(1.0, -0.1), Error);
}

TEST(LassoOracle, BeatsBruteForceGrid) {
  oracle::Lcg g(77);
  for (int t = 0; t < 20; ++t) {
    const int n = g.integer(10, 40);
    Problem pr = random_problem(g, n, 2, 1.0);
    const double alpha = g.uniform(0.05, 1.5);
    const auto spec = RegressorSpec::make(ModelKind::Lasso).with({{"alpha", alpha}, {"tol", 1e-10}});
    const auto m = train(spec, pr.x, pr.ye);
    ASSERT_TRUE(m.scaler().has_value());
    const Eigen::MatrixXd z = m.scaler()->apply(pr.x);
    const auto& s = std::get<LinearState>(m.state());
    const double best = lasso_objective(z, pr.ye, s.weights(0), s.weights(1), alpha);

    const double c0 = std::round(s.weights(0) * 100.0) / 100.0;
    const double c1 = std::round(s.weights(1) * 100.0) / 100.0;
    double grid_min = std::numeric_limits<double>::infinity();
    for (int a = -100; a <= 100; ++a) {
      for (int b = -100; b <= 100; ++b) {
        grid_min = std::min(grid_min, lasso_objective(z, pr.ye, c0 + 0.01 * a, c1 + 0.01 * b, alpha));
      }
    }
    EXPECT_LE(best, grid_min + 1e-12 * std::abs(grid_min)) << "instance " << t;
  }
}

TEST(Lasso, LargeAlphaZeroesEverything) {
  oracle::Lcg g(9);
  const Problem pr = random_problem(g, 25, 3, 0.1);
  const auto m = train(RegressorSpec::make(ModelKind::Lasso).with({{"alpha", 1e6}}), pr.x, pr.ye);
  const auto& s = std::get<LinearState>(m.state());
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_EQ(s.weights(j), 0.0);
  EXPECT_NEAR(s.bias, pr.ye.mean(), 1e-9 * std::abs(pr.ye.mean()));
}

TEST(ElasticNet, PureL1MatchesLasso) {
  oracle::Lcg g(13);
  const Problem pr = random_problem(g, 30, 3, 0.5);
  const auto a = train(RegressorSpec::make(ModelKind::Lasso).with({{"alpha", 0.2}}), pr.x, pr.ye);
  const auto b = train(RegressorSpec::make(ModelKind::ElasticNet).with({{"alpha", 0.2}, {"l1_ratio", 1.0}}), pr.x,
                       pr.ye);
  EXPECT_EQ(std::get<LinearState>(a.state()).weights, std::get<LinearState>(b.state()).weights);
}

TEST(Lasso, StandardizationIsMandatory) {
  auto spec = RegressorSpec::make(ModelKind::Lasso);
  spec.standardize_inputs = false;
  EXPECT_THROW(spec.validate(), Error);
}

TEST(Sgd, ApproachesLeastSquares) {
  oracle::Lcg g(21);
  const Problem pr = random_problem(g, 40, 2, 0.2);
  const auto spec = RegressorSpec::make(ModelKind::SGD, 3).with({{"learning_rate", 0.01}, {"epochs", 400}});
  const auto m = train(spec, pr.x, pr.ye);
  const auto ols = train(RegressorSpec::make(ModelKind::Linear), pr.x, pr.ye);
  EXPECT_LT(m.diagnostics().final_training_loss, 1.2 * ols.diagnostics().final_training_loss + 0.05);
  EXPECT_EQ(m.diagnostics().loss_history.size(), 400u);
  const auto again = train(spec, pr.x, pr.ye);
  EXPECT_EQ(std::get<LinearState>(again.state()).weights, std::get<LinearState>(m.state()).weights);
}

TEST(Ransac, IgnoresGrossOutliers) {
  oracle::Lcg g(31);
  oracle::Mat clean_rows;
  oracle::Vec clean_y;
  Eigen::MatrixXd x(22, 1);
  Eigen::VectorXd y(22);
  for (int i = 0; i < 20; ++i) {
    const double xi = i * 0.5;
    const double yi = 3.0 * xi - 2.0 + 0.05 * g.normal();
    x(i, 0) = xi;
    y(i) = yi;
    clean_rows.push_back({xi});
    clean_y.push_back(yi);
  }
  x(20, 0) = 2.0;
  y(20) = 500.0;
  x(21, 0) = 7.0;
  y(21) = -400.0;
  const auto m = ransac_fit(x, y, RansacConfig{200, 0, 3.0, 4});
  const auto& inliers = m.diagnostics().inliers;
  EXPECT_EQ(std::count(inliers.begin(), inliers.end(), 20u), 0);
  EXPECT_EQ(std::count(inliers.begin(), inliers.end(), 21u), 0);
  EXPECT_GE(inliers.size(), 15u);
  // Final model is ordinary least squares on the consensus set.
  oracle::Mat in_rows;
  oracle::Vec in_y;
  for (const auto i : inliers) {
    in_rows.push_back(clean_rows[i]);
    in_y.push_back(clean_y[i]);
  }
  expect_matches_oracle(std::get<LinearState>(m.state()), oracle::normal_equations(in_rows, in_y, 0.0), 1e-6);
}

TEST(Ransac, TooFewRows) {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  try {
    ransac_fit(x, y, RansacConfig{10, 4, 3.0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
}
