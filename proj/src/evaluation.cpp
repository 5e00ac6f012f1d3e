#include "cyclelife/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <limits>
#include <numeric>

#include "cyclelife/error.hpp"
#include "cyclelife/parallel.hpp"
#include "cyclelife/rng.hpp"
#include "cyclelife/text_io.hpp"

namespace cyclelife {
namespace {

void check_lengths(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) {
    fail(ErrorKind::DimensionMismatch, "metric inputs differ in length (" + std::to_string(y.size()) + " vs " +
                                           std::to_string(yhat.size()) + ")");
  }
  if (y.empty()) fail(ErrorKind::InvalidArgument, "metrics need at least one value");
}

std::string printf_string(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

double mape(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) fail(ErrorKind::ZeroTarget, "MAPE undefined: target " + std::to_string(i) + " is zero");
    sum += std::abs(y[i] - yhat[i]) / std::abs(y[i]);
  }
  return 100.0 * sum / static_cast<double>(y.size());
}

double mse(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sum += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return sum / static_cast<double>(y.size());
}

double r_squared(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  }
  if (ss_tot == 0.0) fail(ErrorKind::ConstantTargets, "r-squared undefined for constant targets");
  return 1.0 - ss_res / ss_tot;
}

MetricSet compute_metrics(std::span<const double> y, std::span<const double> yhat) {
  return {mse(y, yhat), mape(y, yhat), r_squared(y, yhat)};
}

RunStats RunStats::of(std::span<const MetricSet> runs) {
  if (runs.empty()) fail(ErrorKind::InvalidArgument, "RunStats needs at least one run");
  RunStats s;
  s.count = static_cast<int>(runs.size());
  auto summarize = [&](double MetricSet::*field) {
    Summary out;
    for (const auto& r : runs) out.mean += r.*field;
    out.mean /= static_cast<double>(runs.size());
    if (runs.size() >= 2) {
      double ss = 0.0;
      for (const auto& r : runs) ss += (r.*field - out.mean) * (r.*field - out.mean);
      out.std = std::sqrt(ss / static_cast<double>(runs.size() - 1));
    }
    return out;
  };
  // A single run's mean is that run's value exactly.
  s.mse = runs.size() == 1 ? Summary{runs[0].mse, {}} : summarize(&MetricSet::mse);
  s.mape = runs.size() == 1 ? Summary{runs[0].mape, {}} : summarize(&MetricSet::mape);
  s.r_squared = runs.size() == 1 ? Summary{runs[0].r_squared, {}} : summarize(&MetricSet::r_squared);
  return s;
}

const GridCell& BenchmarkReport::at(std::string_view label, FeatureGroup group) const {
  for (const auto& c : cells) {
    if (c.label == label && c.group == group) return c;
  }
  fail(ErrorKind::InvalidArgument, "no grid cell for " + std::string(label) + " / " + std::string(to_string(group)));
}

SplitPolicy repeat_policy(const SplitPolicy& policy, int repeat) {
  SplitPolicy p = policy;
  p.seed = derive_seed(policy.seed, static_cast<std::uint64_t>(repeat));
  return p;
}

BenchmarkReport run_benchmark(const Dataset& ds, std::span<const RegressorSpec> specs,
                              std::span<const FeatureGroup> groups, int repeats, const SplitPolicy& policy,
                              const FeatureOptions& feature_options) {
  if (repeats < 1) fail(ErrorKind::InvalidArgument, "repeats must be >= 1");
  if (specs.empty() || groups.empty()) fail(ErrorKind::InvalidArgument, "benchmark needs models and feature groups");
  for (const auto& s : specs) s.validate();

  BenchmarkReport report;
  report.specs.assign(specs.begin(), specs.end());
  report.groups.assign(groups.begin(), groups.end());
  report.repeats = repeats;
  report.policy = policy;
  report.feature_options = feature_options;
  report.dataset_fingerprint = fingerprint(ds);

  // Features once per cell; cells that cannot be featurized are excluded and listed.
  std::vector<FeatureVector> features;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < ds.cells.size(); ++i) {
    try {
      features.push_back(extract_features(ds.cells[i], feature_options));
      kept.push_back(i);
    } catch (const Error& e) {
      report.excluded_cells.push_back(ds.cells[i].cell_id + ": " + e.what());
    }
  }
  const Dataset usable = kept.size() == ds.cells.size() ? ds : subset(ds, kept);
  if (usable.cells.empty()) fail(ErrorKind::EmptyDataset, "no cell could be featurized");

  std::vector<FeatureMatrix> matrices;
  for (const auto g : groups) matrices.push_back(assemble_matrix(usable, features, g));
  std::vector<SplitIndices> splits;
  for (int r = 0; r < repeats; ++r) splits.push_back(split_indices(usable.cells.size(), repeat_policy(policy, r)));

  for (const auto& sp : splits) {
    const auto train = matrices.front().select_rows(sp.train);
    const auto test = matrices.front().select_rows(sp.test);
    const double mean = train.y.mean();
    const std::vector<double> actual(test.y.data(), test.y.data() + test.y.size());
    const std::vector<double> constant(actual.size(), mean);
    MetricSet m{mse(actual, constant), mape(actual, constant), 0.0};
    try {
      m.r_squared = r_squared(actual, constant);
    } catch (const Error&) {
      m.r_squared = std::nan("");
    }
    report.baseline.push_back(m);
  }

  struct JobResult {
    std::optional<RepeatResult> result;
    std::string error;
  };
  const std::size_t n_groups = groups.size();
  const auto n_repeats = static_cast<std::size_t>(repeats);
  std::vector<JobResult> jobs(specs.size() * n_groups * n_repeats);
  parallel::for_each_index(jobs.size(), [&](std::size_t job) {
    const std::size_t s = job / (n_groups * n_repeats);
    const std::size_t g = (job / n_repeats) % n_groups;
    const std::size_t r = job % n_repeats;
    try {
      const auto& split = splits[r];
      const auto train_m = matrices[g].select_rows(split.train);
      const auto test_m = matrices[g].select_rows(split.test);
      const auto model = train(specs[s], train_m.x, train_m.y);
      const Eigen::VectorXd pred = model.predict(test_m.x);
      RepeatResult rr;
      rr.repeat = static_cast<int>(r);
      rr.test_cells = test_m.cell_ids;
      rr.actual.assign(test_m.y.data(), test_m.y.data() + test_m.y.size());
      rr.predicted.assign(pred.data(), pred.data() + pred.size());
      if (!pred.allFinite()) fail(ErrorKind::NumericalDivergence, "non-finite predictions");
      rr.metrics = compute_metrics(rr.actual, rr.predicted);
      jobs[job].result = std::move(rr);
    } catch (const std::exception& e) {
      jobs[job].error = "repeat " + std::to_string(r) + ": " + e.what();
    }
  });

  for (std::size_t s = 0; s < specs.size(); ++s) {
    for (std::size_t g = 0; g < n_groups; ++g) {
      GridCell cell;
      cell.label = specs[s].display_label();
      cell.kind = specs[s].kind;
      cell.group = groups[g];
      std::vector<MetricSet> metrics;
      for (std::size_t r = 0; r < n_repeats; ++r) {
        auto& jr = jobs[(s * n_groups + g) * n_repeats + r];
        if (!jr.result) {
          if (!cell.error) cell.error = jr.error;
          continue;
        }
        metrics.push_back(jr.result->metrics);
        cell.runs.push_back(std::move(*jr.result));
      }
      if (!cell.error) cell.stats = RunStats::of(metrics);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "svg_scatter" || name == "svg") return ReportFormat::SvgScatter;
  fail(ErrorKind::UnsupportedFormat, "unsupported report format '" + std::string(name) + "'");
}

std::string render_markdown(const BenchmarkReport& report) {
  std::string out = "Model";
  std::string rule = "---";
  for (const auto g : report.groups) {
    out += " | " + std::string(to_string(g));
    rule += " | ---";
  }
  out += "\n" + rule + "\n";
  std::vector<std::string> labels;
  for (const auto& c : report.cells) {
    if (std::find(labels.begin(), labels.end(), c.label) == labels.end()) labels.push_back(c.label);
  }
  std::vector<std::string> failures;
  for (const auto& label : labels) {
    out += label;
    for (const auto g : report.groups) {
      const auto& cell = report.at(label, g);
      out += " | ";
      if (!cell.stats) {
        out += "failed";
        failures.push_back(label + " / " + std::string(to_string(g)) + ": " + cell.error.value_or("unknown error"));
        continue;
      }
      out += printf_string("%.2f", cell.stats->mape.mean);
      if (cell.stats->mape.std) out += " ± " + printf_string("%.3g", *cell.stats->mape.std);
    }
    out += "\n";
  }
  if (!failures.empty()) {
    out += "\nFailed cells:\n";
    for (const auto& f : failures) out += "- " + f + "\n";
  }
  return out;
}

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format17(double v) { return printf_string("%.17g", v); }

}  // namespace

std::string render_csv(const BenchmarkReport& report) {
  std::string out = "model,kind,group,repeat,metric,value\n";
  auto row = [&](std::string_view model, std::string_view kind, std::string_view group, std::string_view repeat,
                 std::string_view metric, std::string_view value) {
    out += csv_field(model) + ',' + csv_field(kind) + ',' + csv_field(group) + ',' + csv_field(repeat) + ',' +
           csv_field(metric) + ',' + csv_field(value) + '\n';
  };
  auto metric_rows = [&](std::string_view model, std::string_view kind, std::string_view group,
                         std::string_view repeat, const MetricSet& m) {
    row(model, kind, group, repeat, "mse", format17(m.mse));
    row(model, kind, group, repeat, "mape", format17(m.mape));
    row(model, kind, group, repeat, "r_squared", format17(m.r_squared));
  };
  for (std::size_t r = 0; r < report.baseline.size(); ++r) {
    metric_rows("Mean Predictor", "baseline", "any", std::to_string(r), report.baseline[r]);
  }
  for (const auto& c : report.cells) {
    const auto kind = to_string(c.kind);
    const auto group = to_string(c.group);
    for (const auto& run : c.runs) metric_rows(c.label, kind, group, std::to_string(run.repeat), run.metrics);
    if (c.stats) {
      metric_rows(c.label, kind, group, "mean", {c.stats->mse.mean, c.stats->mape.mean, c.stats->r_squared.mean});
      if (c.stats->mape.std) {
        metric_rows(c.label, kind, group, "std",
                    {*c.stats->mse.std, *c.stats->mape.std, *c.stats->r_squared.std});
      }
    } else {
      row(c.label, kind, group, "error", "message", c.error.value_or(""));
    }
  }
  return out;
}

namespace {

std::vector<std::vector<std::string>> parse_csv_rows(std::string_view text, std::size_t width) {
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (; pos < text.size(); ++pos) {
      const char c = text[pos];
      if (quoted) {
        if (c == '"' && pos + 1 < text.size() && text[pos + 1] == '"') {
          fields.back() += '"';
          ++pos;
        } else if (c == '"') {
          quoted = false;
        } else {
          fields.back() += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        fields.emplace_back();
      } else if (c == '\n') {
        ++pos;
        break;
      } else {
        fields.back() += c;
      }
    }
    if (quoted) fail(ErrorKind::ParseError, "unterminated quoted field in CSV");
    if (fields.size() != width) {
      fail(ErrorKind::ParseError, "CSV row " + std::to_string(rows.size() + 1) + " has " +
                                      std::to_string(fields.size()) + " fields, expected " + std::to_string(width));
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

std::vector<CsvRecord> parse_report_csv(std::string_view text) {
  const auto rows = parse_csv_rows(text, 6);
  if (rows.empty() || rows.front() != std::vector<std::string>{"model", "kind", "group", "repeat", "metric", "value"}) {
    fail(ErrorKind::ParseError, "unexpected report CSV header");
  }
  std::vector<CsvRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    out.push_back({f[0], f[1], f[2], f[3], f[4], f[5]});
  }
  return out;
}

std::string render_predictions_csv(const BenchmarkReport& report) {
  std::string out = "model,kind,group,repeat,cell_id,actual,predicted\n";
  for (const auto& c : report.cells) {
    for (const auto& run : c.runs) {
      for (std::size_t i = 0; i < run.actual.size(); ++i) {
        out += csv_field(c.label) + ',' + std::string(to_string(c.kind)) + ',' + std::string(to_string(c.group)) + ',' +
               std::to_string(run.repeat) + ',' + csv_field(run.test_cells[i]) + ',' + format17(run.actual[i]) + ',' +
               format17(run.predicted[i]) + '\n';
      }
    }
  }
  return out;
}

BenchmarkReport report_from_csv(std::string_view report_csv, std::string_view predictions_csv) {
  BenchmarkReport report;
  const auto records = parse_report_csv(report_csv);
  auto cell_for = [&](const CsvRecord& r) -> GridCell& {
    const auto group = parse_feature_group(r.group);
    for (auto& c : report.cells) {
      if (c.label == r.model && c.group == group) return c;
    }
    if (std::find(report.groups.begin(), report.groups.end(), group) == report.groups.end()) {
      report.groups.push_back(group);
    }
    const auto kind = parse_model_kind(r.kind);
    if (std::none_of(report.specs.begin(), report.specs.end(),
                     [&](const RegressorSpec& s) { return s.display_label() == r.model; })) {
      RegressorSpec spec = RegressorSpec::make(kind);
      if (r.model != display_name(kind)) spec.label = r.model;
      report.specs.push_back(spec);
    }
    report.cells.push_back({r.model, kind, group, {}, {}, {}});
    return report.cells.back();
  };
  auto set_metric = [](MetricSet& m, const CsvRecord& r) {
    const double v = text::parse_double(r.value);
    if (r.metric == "mse") m.mse = v;
    else if (r.metric == "mape") m.mape = v;
    else if (r.metric == "r_squared") m.r_squared = v;
    else fail(ErrorKind::ParseError, "unknown metric '" + r.metric + "'");
  };
  for (const auto& r : records) {
    if (r.kind == "baseline") {
      const auto idx = static_cast<std::size_t>(text::parse_int(r.repeat));
      if (report.baseline.size() <= idx) report.baseline.resize(idx + 1);
      set_metric(report.baseline[idx], r);
      continue;
    }
    GridCell& cell = cell_for(r);
    if (r.repeat == "error") {
      cell.error = r.value;
    } else if (r.repeat == "mean" || r.repeat == "std") {
      continue;  // recomputed from the repeats below
    } else {
      const int rep = static_cast<int>(text::parse_int(r.repeat));
      auto it = std::find_if(cell.runs.begin(), cell.runs.end(), [&](const RepeatResult& x) { return x.repeat == rep; });
      if (it == cell.runs.end()) {
        cell.runs.push_back({});
        cell.runs.back().repeat = rep;
        it = cell.runs.end() - 1;
      }
      set_metric(it->metrics, r);
      report.repeats = std::max(report.repeats, rep + 1);
    }
  }
  for (auto& c : report.cells) {
    if (c.error || c.runs.empty()) continue;
    std::vector<MetricSet> m;
    for (const auto& run : c.runs) m.push_back(run.metrics);
    c.stats = RunStats::of(m);
  }
  if (!predictions_csv.empty()) {
    auto rows = parse_csv_rows(predictions_csv, 7);
    if (rows.empty() || rows.front() != std::vector<std::string>{"model", "kind", "group", "repeat", "cell_id", "actual",
                                                                  "predicted"}) {
      fail(ErrorKind::ParseError, "unexpected predictions CSV header");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& row = rows[i];
      const auto group = parse_feature_group(row[2]);
      const int rep = static_cast<int>(text::parse_int(row[3]));
      auto cit = std::find_if(report.cells.begin(), report.cells.end(),
                              [&](const GridCell& c) { return c.label == row[0] && c.group == group; });
      if (cit == report.cells.end()) fail(ErrorKind::ParseError, "prediction row for unknown grid cell " + row[0]);
      auto rit = std::find_if(cit->runs.begin(), cit->runs.end(), [&](const RepeatResult& x) { return x.repeat == rep; });
      if (rit == cit->runs.end()) fail(ErrorKind::ParseError, "prediction row for unknown repeat of " + row[0]);
      rit->test_cells.push_back(row[4]);
      rit->actual.push_back(text::parse_double(row[5]));
      rit->predicted.push_back(text::parse_double(row[6]));
    }
  }
  return report;
}

std::string slug(std::string_view text) {
  std::string out;
  for (const char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "model" : out;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_scatter_svg(const GridCell& cell) {
  constexpr double kSize = 400.0, kMargin = 50.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& run : cell.runs) {
    for (const double v : run.actual) lo = std::min(lo, v), hi = std::max(hi, v);
    for (const double v : run.predicted) lo = std::min(lo, v), hi = std::max(hi, v);
  }
  if (!(lo < hi)) {
    lo = std::isfinite(lo) ? lo - 1.0 : 0.0;
    hi = lo + 2.0;
  }
  const double span = hi - lo;
  auto px = [&](double v) { return kMargin + (v - lo) / span * (kSize - 2 * kMargin); };
  auto py = [&](double v) { return kSize - kMargin - (v - lo) / span * (kSize - 2 * kMargin); };
  auto num = [](double v) { return printf_string("%.2f", v); };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"400\" viewBox=\"0 0 400 400\">\n";
  out += "<rect width=\"400\" height=\"400\" fill=\"white\"/>\n";
  out += "<text x=\"200\" y=\"25\" text-anchor=\"middle\" font-size=\"14\">" + xml_escape(cell.label) + " / " +
         std::string(to_string(cell.group)) + "</text>\n";
  out += "<line x1=\"" + num(px(lo)) + "\" y1=\"" + num(py(lo)) + "\" x2=\"" + num(px(hi)) + "\" y2=\"" + num(py(hi)) +
         "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
  out += "<rect x=\"50\" y=\"50\" width=\"300\" height=\"300\" fill=\"none\" stroke=\"black\"/>\n";
  out += "<text x=\"200\" y=\"385\" text-anchor=\"middle\" font-size=\"12\">actual cycle life (" + num(lo) + " to " +
         num(hi) + ")</text>\n";
  out += "<text x=\"15\" y=\"200\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 15 200)\">predicted</text>\n";
  if (cell.error) out += "<text x=\"200\" y=\"200\" text-anchor=\"middle\" font-size=\"12\">failed</text>\n";
  for (const auto& run : cell.runs) {
    for (std::size_t i = 0; i < run.actual.size(); ++i) {
      out += "<circle cx=\"" + num(px(run.actual[i])) + "\" cy=\"" + num(py(run.predicted[i])) +
             "\" r=\"3\" fill=\"steelblue\" fill-opacity=\"0.6\"/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

std::vector<RenderedFile> render_report(const BenchmarkReport& report, std::span<const std::string> formats) {
  std::vector<ReportFormat> parsed;
  for (const auto& f : formats) parsed.push_back(parse_report_format(f));  // reject before rendering anything
  std::vector<RenderedFile> out;
  for (const auto f : parsed) {
    switch (f) {
      case ReportFormat::Markdown: out.push_back({"report.md", render_markdown(report)}); break;
      case ReportFormat::Csv: out.push_back({"report.csv", render_csv(report)}); break;
      case ReportFormat::SvgScatter:
        for (const auto& c : report.cells) {
          out.push_back({"plots/" + slug(c.label) + "_" + slug(to_string(c.group)) + ".svg", render_scatter_svg(c)});
        }
        break;
    }
  }
  return out;
}

}  // namespace cyclelife
