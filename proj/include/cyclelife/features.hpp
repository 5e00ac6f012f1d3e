#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cyclelife/core_data.hpp"

namespace cyclelife {

/// Q_100(V) - Q_10(V) on the dataset's voltage grid.
struct DeltaQCurve {
  std::vector<double> values;
};

/// The eleven handcrafted early-life features of one cell.
struct FeatureVector {
  double f1_min_dq = 0.0;
  double f2_var_dq = 0.0;
  double f3_skew_dq = 0.0;
  double f4_kurt_dq = 0.0;  // excess kurtosis
  double f5_fade_slope = 0.0;
  double f6_fade_intercept = 0.0;
  double f7_qd_cycle10 = 0.0;
  double f8_max_minus_q2 = 0.0;
  double f9_avg_charge_time = 0.0;
  double f10_min_ir = 0.0;
  double f11_ir_diff = 0.0;
  /// Set when var(dQ) is too small for skewness/kurtosis; f3 and f4 are then 0.
  bool degenerate_moments = false;

  static constexpr int kCount = 11;
  /// Feature by 1-based id.
  double operator[](int id) const;
  bool operator==(const FeatureVector&) const = default;
};

struct FeatureOptions {
  /// Replace f2 by log10(f2). Off by default.
  bool log_variance = false;
};

enum class FeatureGroup { Full, Discharge, Variance };

std::string_view to_string(FeatureGroup group);
FeatureGroup parse_feature_group(std::string_view name);
/// 1-based feature ids in column order.
std::span<const int> members(FeatureGroup group);
inline constexpr std::array<FeatureGroup, 3> kAllGroups = {FeatureGroup::Full, FeatureGroup::Discharge,
                                                           FeatureGroup::Variance};

struct FeatureMatrix {
  Eigen::MatrixXd x;  // rows = cells in dataset order
  Eigen::VectorXd y;  // cycle life
  std::vector<std::string> cell_ids;
  std::vector<int> feature_ids;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;
};

/// Per-column z-scoring learned from training rows. Population std.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(Eigen::VectorXd mean, Eigen::VectorXd std);

  static Standardizer fit(const Eigen::MatrixXd& x);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& z) const;
  FeatureMatrix apply(const FeatureMatrix& m) const;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& std() const { return std_; }
  bool is_constant(Eigen::Index col) const { return !(std_(col) > 0.0); }
  Eigen::Index columns() const { return mean_.size(); }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd std_;
};

DeltaQCurve delta_q(const CellRecord& cell);

/// Population central moments of a sample. Skewness and excess kurtosis are 0
/// when the variance is below `degenerate_variance`.
struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  bool degenerate = false;
};
inline constexpr double kDegenerateVariance = 1e-18;
Moments population_moments(std::span<const double> values);

/// Least-squares line y = slope * x + intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

FeatureVector extract_features(const CellRecord& cell, const FeatureOptions& options = {});
std::vector<FeatureVector> extract_all(const Dataset& ds, const FeatureOptions& options = {});

FeatureMatrix assemble_matrix(const Dataset& ds, FeatureGroup group, const FeatureOptions& options = {});
FeatureMatrix assemble_matrix(const Dataset& ds, std::span<const FeatureVector> features, FeatureGroup group);

/// `cell_id,f1,...,f11,cycle_life`, 17 significant digits.
std::string features_csv(const Dataset& ds, const FeatureOptions& options = {});

}  // namespace cyclelife
