#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "cyclelife/error.hpp"
#include "cyclelife/evaluation.hpp"
#include "cyclelife/parallel.hpp"
#include "support/oracles.hpp"

using namespace cyclelife;

namespace {

GridCell cell_with_mape(const std::string& label, FeatureGroup g, double value) {
  GridCell c;
  c.label = label;
  c.kind = ModelKind::RandomForest;
  c.group = g;
  RepeatResult r;
  r.metrics.mape = value;
  c.runs.push_back(r);
  const MetricSet m = r.metrics;
  c.stats = RunStats::of(std::span<const MetricSet>(&m, 1));
  return c;
}

std::vector<RegressorSpec> quick_specs() {
  std::vector<RegressorSpec> specs;
  for (const auto kind : kAllModelKinds) {
    RegressorSpec s = RegressorSpec::make(kind, 1);
    if (kind == ModelKind::RandomForest || kind == ModelKind::GradientBoost || kind == ModelKind::XGBoostStyle) {
      s = s.with({{"n_estimators", 10}});
    }
    if (kind == ModelKind::MLP) s = s.with({{"hidden_1", 4}, {"hidden_2", 0}, {"epochs", 20}});
    specs.push_back(s);
  }
  return specs;
}

}  // namespace

TEST(Metrics, MapeExample) {
  const std::vector<double> y{100, 200}, p{110, 180};
  EXPECT_NEAR(mape(y, p), 10.0, 1e-12);
}

TEST(Metrics, MapeRejectsZeroTarget) {
  const std::vector<double> y{0, 200}, p{1, 180};
  try {
    mape(y, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroTarget);
  }
}

TEST(Metrics, LengthMismatch) {
  const std::vector<double> y{1, 2}, p{1};
  EXPECT_THROW(mse(y, p), Error);
}

TEST(Metrics, MapeScaleInvariant) {
  oracle::Lcg g(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> y, p;
    for (int i = 0; i < 20; ++i) {
      y.push_back(g.uniform(100, 2000));
      p.push_back(y.back() * g.uniform(0.5, 1.5));
    }
    const double k = std::pow(10.0, g.uniform(-3, 3));
    std::vector<double> ys, ps;
    for (std::size_t i = 0; i < y.size(); ++i) {
      ys.push_back(k * y[i]);
      ps.push_back(k * p[i]);
    }
    EXPECT_NEAR(mape(ys, ps), mape(y, p), 1e-9 * mape(y, p));
  }
}

TEST(Metrics, RSquaredIdentities) {
  oracle::Lcg g(2);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> y;
    for (int i = 0; i < 15; ++i) y.push_back(g.uniform(100, 2000));
    EXPECT_EQ(r_squared(y, y), 1.0);
    double mean = 0.0;
    for (const double v : y) mean += v / 15.0;
    EXPECT_NEAR(r_squared(y, std::vector<double>(15, mean)), 0.0, 1e-12);
    auto off = y;
    off[static_cast<std::size_t>(t % 15)] += 1.0;
    EXPECT_LT(r_squared(y, off), 1.0);
  }
}

TEST(Metrics, RSquaredConstantTargets) {
  const std::vector<double> y{5, 5, 5}, p{5, 5, 6};
  try {
    r_squared(y, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConstantTargets);
  }
}

TEST(RunStats, SingleRepeatHasNoStd) {
  const MetricSet m{1.5, 12.25, 0.75};
  const auto s = RunStats::of(std::span<const MetricSet>(&m, 1));
  EXPECT_EQ(s.count, 1);
  EXPECT_EQ(s.mape.mean, 12.25);
  EXPECT_FALSE(s.mape.std.has_value());
}

TEST(RunStats, SampleStd) {
  const std::vector<MetricSet> runs{{0, 10, 0}, {0, 12, 0}, {0, 14, 0}};
  const auto s = RunStats::of(runs);
  EXPECT_NEAR(s.mape.mean, 12.0, 1e-12);
  EXPECT_NEAR(*s.mape.std, 2.0, 1e-12);
}

TEST(Markdown, RandomForestRow) {
  BenchmarkReport r;
  r.groups = {kAllGroups.begin(), kAllGroups.end()};
  r.cells = {cell_with_mape("Random Forest", FeatureGroup::Full, 11.13),
             cell_with_mape("Random Forest", FeatureGroup::Discharge, 10.70),
             cell_with_mape("Random Forest", FeatureGroup::Variance, 9.82)};
  const std::string md = render_markdown(r);
  EXPECT_NE(md.find("Model | Full | Discharge | Variance\n--- | --- | --- | ---\n"), std::string::npos);
  EXPECT_NE(md.find("\nRandom Forest | 11.13 | 10.70 | 9.82\n"), std::string::npos) << md;
}

TEST(Markdown, FailedCellsListed) {
  BenchmarkReport r;
  r.groups = {FeatureGroup::Variance};
  GridCell c;
  c.label = "SVM";
  c.group = FeatureGroup::Variance;
  c.error = "did not converge";
  r.cells = {c};
  const std::string md = render_markdown(r);
  EXPECT_NE(md.find("SVM | failed"), std::string::npos);
  EXPECT_NE(md.find("did not converge"), std::string::npos);
}

TEST(Formats, ParseAndReject) {
  EXPECT_EQ(parse_report_format("markdown"), ReportFormat::Markdown);
  EXPECT_EQ(parse_report_format("csv"), ReportFormat::Csv);
  EXPECT_EQ(parse_report_format("svg_scatter"), ReportFormat::SvgScatter);
  try {
    parse_report_format("xlsx");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnsupportedFormat);
  }
  EXPECT_TRUE(render_report(BenchmarkReport{}, std::span<const std::string>{}).empty());
}

TEST(Benchmark, FullGridCsvRoundTrip) {
  const Dataset ds = generate_synthetic(30, VoltageGrid{2.0, 3.5, 100}, 5);
  const auto specs = quick_specs();
  SplitPolicy policy;
  policy.seed = 3;
  const auto report = run_benchmark(ds, specs, kAllGroups, 2, policy);
  ASSERT_EQ(report.cells.size(), 42u);
  ASSERT_EQ(report.baseline.size(), 2u);
  std::set<std::pair<std::string, FeatureGroup>> seen;
  for (const auto& c : report.cells) {
    seen.insert({c.label, c.group});
    if (c.stats) {
      EXPECT_EQ(c.runs.size(), 2u);
      EXPECT_TRUE(c.stats->mape.std.has_value());
    }
  }
  EXPECT_EQ(seen.size(), 42u);

  const std::string csv = render_csv(report);
  const auto back = report_from_csv(csv, render_predictions_csv(report));
  EXPECT_EQ(render_csv(back), csv);
  EXPECT_EQ(render_markdown(back), render_markdown(report));

  const std::vector<std::string> formats{"markdown", "csv", "svg_scatter"};
  const auto files = render_report(report, formats);
  EXPECT_EQ(files.size(), 2u + 42u);
}

TEST(Benchmark, DeterministicAcrossJobCounts) {
  const Dataset ds = generate_synthetic(20, VoltageGrid{2.0, 3.5, 60}, 6);
  const auto specs = quick_specs();
  SplitPolicy policy;
  policy.seed = 9;
  parallel::set_max_jobs(1);
  const std::string a = render_csv(run_benchmark(ds, specs, kAllGroups, 2, policy));
  parallel::set_max_jobs(8);
  const std::string b = render_csv(run_benchmark(ds, specs, kAllGroups, 2, policy));
  parallel::set_max_jobs(1);
  EXPECT_EQ(a, b);
}

TEST(Benchmark, RejectsZeroRepeats) {
  const Dataset ds = generate_synthetic(10, VoltageGrid{2.0, 3.5, 30}, 6);
  const std::vector<RegressorSpec> specs{RegressorSpec::make(ModelKind::Linear)};
  EXPECT_THROW(run_benchmark(ds, specs, kAllGroups, 0, SplitPolicy{}), Error);
}

TEST(Benchmark, RepeatSplitsDiffer) {
  SplitPolicy p;
  p.seed = 4;
  const auto a = split_indices(50, repeat_policy(p, 0));
  const auto b = split_indices(50, repeat_policy(p, 1));
  EXPECT_NE(a.test, b.test);
}

TEST(Slug, Lowercase) { EXPECT_EQ(slug("Random Forest"), "random_forest"); }
