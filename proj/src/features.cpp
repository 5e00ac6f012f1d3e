#include "cyclelife/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cyclelife/error.hpp"
#include "cyclelife/text_io.hpp"

namespace cyclelife {
namespace {

constexpr std::array<int, 8> kFullMembers = {1, 2, 5, 6, 7, 9, 10, 11};
constexpr std::array<int, 6> kDischargeMembers = {1, 2, 3, 4, 7, 8};
constexpr std::array<int, 1> kVarianceMembers = {2};

constexpr int kFadeFirstCycle = 2;
constexpr int kChargeTimeLastCycle = 6;

}  // namespace

double FeatureVector::operator[](int id) const {
  switch (id) {
    case 1: return f1_min_dq;
    case 2: return f2_var_dq;
    case 3: return f3_skew_dq;
    case 4: return f4_kurt_dq;
    case 5: return f5_fade_slope;
    case 6: return f6_fade_intercept;
    case 7: return f7_qd_cycle10;
    case 8: return f8_max_minus_q2;
    case 9: return f9_avg_charge_time;
    case 10: return f10_min_ir;
    case 11: return f11_ir_diff;
    default: fail(ErrorKind::InvalidArgument, "feature id out of range: " + std::to_string(id));
  }
}

std::string_view to_string(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::Full: return "Full";
    case FeatureGroup::Discharge: return "Discharge";
    case FeatureGroup::Variance: return "Variance";
  }
  return "?";
}

FeatureGroup parse_feature_group(std::string_view name) {
  for (const auto g : kAllGroups) {
    if (to_string(g) == name) return g;
  }
  fail(ErrorKind::InvalidArgument, "unknown feature group '" + std::string(name) + "'");
}

std::span<const int> members(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::Full: return kFullMembers;
    case FeatureGroup::Discharge: return kDischargeMembers;
    case FeatureGroup::Variance: return kVarianceMembers;
  }
  return {};
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix out;
  out.feature_ids = feature_ids;
  out.x.resize(static_cast<Eigen::Index>(indices.size()), x.cols());
  out.y.resize(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = static_cast<Eigen::Index>(indices[r]);
    out.x.row(static_cast<Eigen::Index>(r)) = x.row(src);
    out.y(static_cast<Eigen::Index>(r)) = y(src);
    if (!cell_ids.empty()) out.cell_ids.push_back(cell_ids[indices[r]]);
  }
  return out;
}

Standardizer::Standardizer(Eigen::VectorXd mean, Eigen::VectorXd std)
    : mean_(std::move(mean)), std_(std::move(std)) {}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(x.cols());
  Eigen::VectorXd sd = Eigen::VectorXd::Zero(x.cols());
  if (n == 0) return {mean, sd};
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double m = x.col(c).mean();
    const double var = (x.col(c).array() - m).square().sum() / static_cast<double>(n);
    mean(c) = m;
    sd(c) = std::sqrt(var);
    // Columns whose spread is at rounding level are treated as constant.
    if (sd(c) <= 1e-12 * std::max(1.0, std::abs(m))) sd(c) = 0.0;
  }
  return {mean, sd};
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean_.size()) {
    fail(ErrorKind::DimensionMismatch, "standardizer expects " + std::to_string(mean_.size()) +
                                           " columns, got " + std::to_string(x.cols()));
  }
  Eigen::MatrixXd z(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (is_constant(c)) {
      z.col(c).setZero();
    } else {
      z.col(c) = (x.col(c).array() - mean_(c)) / std_(c);
    }
  }
  return z;
}

Eigen::MatrixXd Standardizer::inverse(const Eigen::MatrixXd& z) const {
  Eigen::MatrixXd x(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    x.col(c) = z.col(c).array() * std_(c) + mean_(c);
  }
  return x;
}

FeatureMatrix Standardizer::apply(const FeatureMatrix& m) const {
  FeatureMatrix out = m;
  out.x = apply(m.x);
  return out;
}

DeltaQCurve delta_q(const CellRecord& cell) {
  const auto& early = cell.curve(kEarlyCurveCycle).q_at_v;
  const auto& late = cell.curve(kLateCurveCycle).q_at_v;
  if (early.size() != late.size()) {
    fail(ErrorKind::ShapeMismatch, "cell " + cell.cell_id + " has curves of different lengths");
  }
  DeltaQCurve dq;
  dq.values.resize(early.size());
  for (std::size_t i = 0; i < early.size(); ++i) dq.values[i] = late[i] - early[i];
  return dq;
}

Moments population_moments(std::span<const double> values) {
  Moments m;
  if (values.empty()) return m;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (const double v : values) sum += v;
  m.mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (const double v : values) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.variance = m2;
  if (m2 < kDegenerateVariance) {
    m.degenerate = true;
    return m;
  }
  m.skewness = m3 / std::pow(m2, 1.5);
  m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  return m;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    fail(ErrorKind::InvalidArgument, "line fit needs two or more paired points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0.0)) fail(ErrorKind::SingularSystem, "line fit needs distinct x values");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

FeatureVector extract_features(const CellRecord& cell, const FeatureOptions& options) {
  FeatureVector f;
  const DeltaQCurve dq = delta_q(cell);
  if (dq.values.empty()) fail(ErrorKind::ShapeMismatch, "cell " + cell.cell_id + " has empty curves");

  const Moments m = population_moments(dq.values);
  f.f1_min_dq = *std::min_element(dq.values.begin(), dq.values.end());
  f.f2_var_dq = options.log_variance ? std::log10(std::max(m.variance, std::numeric_limits<double>::min()))
                                     : m.variance;
  f.f3_skew_dq = m.skewness;
  f.f4_kurt_dq = m.excess_kurtosis;
  f.degenerate_moments = m.degenerate;

  std::vector<double> cycles, qd;
  cycles.reserve(kObservationCycles);
  qd.reserve(kObservationCycles);
  double qd_max = -std::numeric_limits<double>::infinity();
  double ir_min = std::numeric_limits<double>::infinity();
  for (int c = kFadeFirstCycle; c <= kObservationCycles; ++c) {
    const auto& s = cell.summary(c);
    cycles.push_back(static_cast<double>(c));
    qd.push_back(s.discharge_capacity);
    qd_max = std::max(qd_max, s.discharge_capacity);
    ir_min = std::min(ir_min, s.internal_resistance);
  }
  const LineFit fade = fit_line(cycles, qd);
  f.f5_fade_slope = fade.slope;
  f.f6_fade_intercept = fade.intercept;
  f.f7_qd_cycle10 = cell.summary(kEarlyCurveCycle).discharge_capacity;
  f.f8_max_minus_q2 = qd_max - cell.summary(kFadeFirstCycle).discharge_capacity;

  double ct = 0.0;
  for (int c = kFadeFirstCycle; c <= kChargeTimeLastCycle; ++c) ct += cell.summary(c).charge_time;
  f.f9_avg_charge_time = ct / static_cast<double>(kChargeTimeLastCycle - kFadeFirstCycle + 1);
  f.f10_min_ir = ir_min;
  f.f11_ir_diff = cell.summary(kLateCurveCycle).internal_resistance -
                  cell.summary(kEarlyCurveCycle).internal_resistance;
  return f;
}

std::vector<FeatureVector> extract_all(const Dataset& ds, const FeatureOptions& options) {
  std::vector<FeatureVector> out;
  out.reserve(ds.cells.size());
  for (const auto& cell : ds.cells) {
    try {
      out.push_back(extract_features(cell, options));
    } catch (const Error& e) {
      throw Error(e.kind(), "cell " + cell.cell_id + ": " + e.what());
    }
  }
  return out;
}

FeatureMatrix assemble_matrix(const Dataset& ds, std::span<const FeatureVector> features, FeatureGroup group) {
  if (ds.cells.empty()) fail(ErrorKind::EmptyDataset, "dataset has no cells");
  if (features.size() != ds.cells.size()) {
    fail(ErrorKind::DimensionMismatch, "feature count does not match cell count");
  }
  const auto ids = members(group);
  FeatureMatrix m;
  m.feature_ids.assign(ids.begin(), ids.end());
  const auto rows = static_cast<Eigen::Index>(ds.cells.size());
  m.x.resize(rows, static_cast<Eigen::Index>(ids.size()));
  m.y.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& fv = features[static_cast<std::size_t>(r)];
    for (std::size_t c = 0; c < ids.size(); ++c) m.x(r, static_cast<Eigen::Index>(c)) = fv[ids[c]];
    m.y(r) = ds.cells[static_cast<std::size_t>(r)].cycle_life;
    m.cell_ids.push_back(ds.cells[static_cast<std::size_t>(r)].cell_id);
  }
  return m;
}

FeatureMatrix assemble_matrix(const Dataset& ds, FeatureGroup group, const FeatureOptions& options) {
  if (ds.cells.empty()) fail(ErrorKind::EmptyDataset, "dataset has no cells");
  const auto features = extract_all(ds, options);
  return assemble_matrix(ds, features, group);
}

std::string features_csv(const Dataset& ds, const FeatureOptions& options) {
  const auto features = extract_all(ds, options);
  std::string out = "cell_id";
  for (int i = 1; i <= FeatureVector::kCount; ++i) out += ",f" + std::to_string(i);
  out += ",cycle_life\n";
  for (std::size_t r = 0; r < features.size(); ++r) {
    out += ds.cells[r].cell_id;
    for (int i = 1; i <= FeatureVector::kCount; ++i) {
      out += ',';
      out += text::format_double17(features[r][i]);
    }
    out += ',' + std::to_string(ds.cells[r].cycle_life) + '\n';
  }
  return out;
}

}  // namespace cyclelife
