#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cyclelife/core_data.hpp"
#include "cyclelife/features.hpp"
#include "cyclelife/regressor.hpp"

namespace cyclelife {

/// 100 * mean(|y - yhat| / |y|). Throws ZeroTarget if any y is 0.
double mape(std::span<const double> y, std::span<const double> yhat);
double mse(std::span<const double> y, std::span<const double> yhat);
/// 1 - SS_res / SS_tot. Throws ConstantTargets when var(y) = 0.
double r_squared(std::span<const double> y, std::span<const double> yhat);

struct MetricSet {
  double mse = 0.0;
  double mape = 0.0;  // percent
  double r_squared = 0.0;
};
MetricSet compute_metrics(std::span<const double> y, std::span<const double> yhat);

struct Summary {
  double mean = 0.0;
  std::optional<double> std;  // sample std, only with two or more repeats
};

struct RunStats {
  int count = 0;
  Summary mse;
  Summary mape;
  Summary r_squared;

  static RunStats of(std::span<const MetricSet> runs);
};

struct RepeatResult {
  int repeat = 0;
  MetricSet metrics;
  std::vector<std::string> test_cells;
  std::vector<double> actual;
  std::vector<double> predicted;
};

struct GridCell {
  std::string label;  // model row label
  ModelKind kind = ModelKind::Linear;
  FeatureGroup group = FeatureGroup::Full;
  std::vector<RepeatResult> runs;
  std::optional<RunStats> stats;  // empty when the cell failed
  std::optional<std::string> error;
};

struct BenchmarkReport {
  std::vector<RegressorSpec> specs;
  std::vector<FeatureGroup> groups;
  int repeats = 1;
  SplitPolicy policy;
  FeatureOptions feature_options;
  std::uint64_t dataset_fingerprint = 0;
  /// Cells dropped because feature extraction failed, as `cell_id: reason`.
  std::vector<std::string> excluded_cells;
  /// Mean-of-training-targets predictor evaluated on each repeat's test split.
  std::vector<MetricSet> baseline;
  /// Ordered by (spec, group).
  std::vector<GridCell> cells;

  const GridCell& at(std::string_view label, FeatureGroup group) const;
};

/// Every (spec, group, repeat) job trains on its own split, seeded per repeat.
/// Model failures are recorded in the affected grid cell; only invalid
/// arguments throw.
BenchmarkReport run_benchmark(const Dataset& ds, std::span<const RegressorSpec> specs,
                              std::span<const FeatureGroup> groups, int repeats, const SplitPolicy& policy,
                              const FeatureOptions& feature_options = {});

/// Split policy used for repeat `r`.
SplitPolicy repeat_policy(const SplitPolicy& policy, int repeat);

enum class ReportFormat { Markdown, Csv, SvgScatter };
ReportFormat parse_report_format(std::string_view name);  // UnsupportedFormat

/// MAPE grid: one row per model, one column per group, "mean" or "mean ± std".
std::string render_markdown(const BenchmarkReport& report);
/// Long format: model,kind,group,repeat,metric,value.
std::string render_csv(const BenchmarkReport& report);
std::string render_scatter_svg(const GridCell& cell);

struct CsvRecord {
  std::string model;
  std::string kind;
  std::string group;
  std::string repeat;  // integer, "mean", "std", or "error"
  std::string metric;
  std::string value;
};
std::vector<CsvRecord> parse_report_csv(std::string_view text);

/// Per-cell test predictions: model,kind,group,repeat,cell_id,actual,predicted.
std::string render_predictions_csv(const BenchmarkReport& report);
/// Rebuilds a report from its CSV (and optionally the predictions CSV) so it can
/// be re-rendered later. Specs carry only kind and label.
BenchmarkReport report_from_csv(std::string_view report_csv, std::string_view predictions_csv = {});

struct RenderedFile {
  std::string relative_path;
  std::string contents;
};
/// Renders each requested format; an empty list yields nothing.
std::vector<RenderedFile> render_report(const BenchmarkReport& report, std::span<const std::string> formats);

/// Lowercase identifier used in plot file names.
std::string slug(std::string_view text);

}  // namespace cyclelife
