#include "cyclelife/core_data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "cyclelife/error.hpp"
#include "cyclelife/rng.hpp"

namespace cyclelife {

double VoltageGrid::voltage(int i) const {
  return v_max - (v_max - v_min) * static_cast<double>(i) / static_cast<double>(points - 1);
}

std::vector<double> VoltageGrid::voltages() const {
  std::vector<double> v(static_cast<std::size_t>(std::max(points, 0)));
  for (int i = 0; i < points; ++i) v[static_cast<std::size_t>(i)] = voltage(i);
  return v;
}

void VoltageGrid::validate() const {
  if (!std::isfinite(v_min) || !std::isfinite(v_max) || !(v_max > v_min)) {
    fail(ErrorKind::InvalidArgument, "voltage grid requires v_max > v_min");
  }
  if (points < 2) fail(ErrorKind::InvalidArgument, "voltage grid requires at least 2 points");
}

const CycleSummary& CellRecord::summary(int cycle) const {
  const auto pos = static_cast<std::size_t>(cycle - 1);
  if (cycle >= 1 && pos < summaries.size() && summaries[pos].cycle_index == cycle) {
    return summaries[pos];
  }
  const auto it = std::lower_bound(summaries.begin(), summaries.end(), cycle,
                                   [](const CycleSummary& s, int c) { return s.cycle_index < c; });
  if (it == summaries.end() || it->cycle_index != cycle) {
    fail(ErrorKind::InvalidArgument,
         "cell " + cell_id + " has no summary for cycle " + std::to_string(cycle));
  }
  return *it;
}

const DischargeCurve& CellRecord::curve(int cycle) const {
  const auto it = curves.find(cycle);
  if (it == curves.end()) {
    fail(ErrorKind::MissingCurve,
         "cell " + cell_id + " is missing the discharge curve for cycle " + std::to_string(cycle));
  }
  return it->second;
}

std::vector<std::string> check_cell(const CellRecord& cell, const VoltageGrid& grid) {
  std::vector<std::string> rules;

  if (cell.cycle_life <= kObservationCycles) rules.emplace_back("cycle life must exceed 100");
  if (!(cell.nominal_capacity > 0.0) || !std::isfinite(cell.nominal_capacity)) {
    rules.emplace_back("nominal capacity must be positive");
  }

  bool increasing = true;
  std::set<int> seen;
  for (std::size_t i = 0; i < cell.summaries.size(); ++i) {
    const auto& s = cell.summaries[i];
    if (i > 0 && s.cycle_index <= cell.summaries[i - 1].cycle_index) increasing = false;
    seen.insert(s.cycle_index);
    const std::string at = " at cycle " + std::to_string(s.cycle_index);
    if (s.cycle_index < 1) rules.push_back("cycle index must be >= 1" + at);
    if (!std::isfinite(s.discharge_capacity) || s.discharge_capacity < 0.0) {
      rules.push_back("invalid discharge capacity" + at);
    }
    if (!std::isfinite(s.charge_capacity) || s.charge_capacity < 0.0) {
      rules.push_back("invalid charge capacity" + at);
    }
    if (!std::isfinite(s.avg_temperature)) rules.push_back("invalid temperature" + at);
    if (!std::isfinite(s.internal_resistance) || !(s.internal_resistance > 0.0)) {
      rules.push_back("invalid internal resistance" + at);
    }
    if (!std::isfinite(s.charge_time) || !(s.charge_time > 0.0)) {
      rules.push_back("invalid charge time" + at);
    }
  }
  if (!increasing) rules.emplace_back("summaries not strictly increasing");
  const int last = cell.summaries.empty() ? 0 : cell.summaries.back().cycle_index;
  if (last < kObservationCycles) {
    rules.emplace_back("summaries end before cycle 100");
  } else {
    for (int c = 1; c <= kObservationCycles; ++c) {
      if (!seen.contains(c)) {
        rules.emplace_back("gap in cycle coverage");
        break;
      }
    }
  }

  for (const int required : {kEarlyCurveCycle, kLateCurveCycle}) {
    if (!cell.curves.contains(required)) {
      rules.push_back("missing required curve " + std::to_string(required));
    }
  }
  for (const auto& [cycle, curve] : cell.curves) {
    const std::string which = "curve " + std::to_string(cycle);
    if (curve.cycle_index != cycle) rules.push_back(which + " has mismatched cycle index");
    if (std::cmp_not_equal(curve.q_at_v.size(), grid.points)) {
      rules.push_back(which + " length " + std::to_string(curve.q_at_v.size()) +
                      " does not match grid points " + std::to_string(grid.points));
    }
    const bool bad = std::any_of(curve.q_at_v.begin(), curve.q_at_v.end(),
                                 [](double q) { return !std::isfinite(q) || q < 0.0; });
    if (bad) rules.push_back(which + " has negative or non-finite values");
  }
  return rules;
}

void validate_dataset(const Dataset& ds) {
  std::vector<Violation> violations;
  try {
    ds.grid.validate();
  } catch (const Error& e) {
    violations.push_back({"manifest", e.what()});
  }
  std::set<std::string> ids;
  for (const auto& cell : ds.cells) {
    if (!ids.insert(cell.cell_id).second) violations.push_back({cell.cell_id, "duplicate cell id"});
    for (auto& rule : check_cell(cell, ds.grid)) violations.push_back({cell.cell_id, std::move(rule)});
  }
  if (!violations.empty()) throw ValidationError(std::move(violations));
}

int compute_cycle_life(const CellRecord& cell, double threshold_fraction) {
  if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0)) {
    fail(ErrorKind::InvalidArgument, "threshold fraction must lie in (0, 1)");
  }
  const double threshold = threshold_fraction * cell.nominal_capacity;
  for (const auto& s : cell.summaries) {
    if (s.discharge_capacity < threshold) return s.cycle_index;
  }
  fail(ErrorKind::NoCrossing, "cell " + cell.cell_id + " never falls below " +
                                  std::to_string(threshold_fraction) + " of nominal capacity");
}

SplitIndices split_indices(std::size_t n_cells, const SplitPolicy& policy) {
  SplitIndices out;
  if (policy.kind == SplitPolicy::Kind::IndexParity) {
    for (std::size_t i = 0; i < n_cells; ++i) (i % 2 == 0 ? out.train : out.test).push_back(i);
  } else {
    if (!(policy.test_fraction > 0.0 && policy.test_fraction < 1.0)) {
      fail(ErrorKind::InvalidArgument, "test_fraction must lie in (0, 1)");
    }
    const auto n_test =
        static_cast<std::size_t>(std::llround(policy.test_fraction * static_cast<double>(n_cells)));
    std::vector<std::size_t> order(n_cells);
    for (std::size_t i = 0; i < n_cells; ++i) order[i] = i;
    Rng rng(policy.seed);
    rng.shuffle(std::span<std::size_t>(order));
    out.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n_test, n_cells)));
    out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(std::min(n_test, n_cells)), order.end());
    std::sort(out.test.begin(), out.test.end());
    std::sort(out.train.begin(), out.train.end());
  }
  if (out.train.empty() || out.test.empty()) {
    fail(ErrorKind::DegenerateSplit, "split of " + std::to_string(n_cells) +
                                         " cells leaves an empty train or test part");
  }
  return out;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.grid = ds.grid;
  out.schema_version = ds.schema_version;
  out.provenance = ds.provenance;
  out.cells.reserve(indices.size());
  for (const auto i : indices) out.cells.push_back(ds.cells.at(i));
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, const SplitPolicy& policy) {
  const auto idx = split_indices(ds.cells.size(), policy);
  return {subset(ds, idx.train), subset(ds, idx.test)};
}

namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      const auto b = static_cast<unsigned char>(v >> (8 * i));
      bytes(&b, 1);
    }
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::uint64_t fingerprint(const Dataset& ds) {
  Fnv1a h;
  h.str(ds.schema_version);
  h.f64(ds.grid.v_min);
  h.f64(ds.grid.v_max);
  h.u64(static_cast<std::uint64_t>(ds.grid.points));
  h.u64(ds.cells.size());
  for (const auto& cell : ds.cells) {
    h.str(cell.cell_id);
    h.u64(static_cast<std::uint64_t>(cell.cycle_life));
    h.f64(cell.nominal_capacity);
    h.u64(cell.summaries.size());
    for (const auto& s : cell.summaries) {
      h.u64(static_cast<std::uint64_t>(s.cycle_index));
      h.f64(s.discharge_capacity);
      h.f64(s.charge_capacity);
      h.f64(s.avg_temperature);
      h.f64(s.internal_resistance);
      h.f64(s.charge_time);
    }
    h.u64(cell.curves.size());
    for (const auto& [cycle, curve] : cell.curves) {
      h.u64(static_cast<std::uint64_t>(cycle));
      h.u64(curve.q_at_v.size());
      for (const double q : curve.q_at_v) h.f64(q);
    }
  }
  return h.value();
}

}  // namespace cyclelife
