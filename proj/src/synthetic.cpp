#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cyclelife/core_data.hpp"
#include "cyclelife/error.hpp"
#include "cyclelife/rng.hpp"

namespace cyclelife {
namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Fraction of the cycle's capacity delivered by the time the voltage has fallen to v:
// a sharp plateau near 3.3 V plus a small sloping tail.
double capacity_shape(double v) {
  return 0.92 * logistic((3.3 - v) / 0.03) + 0.08 * std::clamp((3.5 - v) / 1.5, 0.0, 1.0);
}

// Localised capacity loss on the plateau that deepens as the cell ages.
double loss_bump(double v) {
  const double z = (v - 3.1) / 0.12;
  return std::exp(-z * z);
}

}  // namespace

Dataset generate_synthetic(int n_cells, const VoltageGrid& grid, std::uint64_t seed) {
  if (n_cells < 1) fail(ErrorKind::InvalidArgument, "n_cells must be >= 1");
  grid.validate();

  Dataset ds;
  ds.grid = grid;
  ds.provenance = {{"generator", "synthetic"},
                   {"seed", std::to_string(seed)},
                   {"n_cells", std::to_string(n_cells)}};
  const std::vector<double> volts = grid.voltages();

  for (int i = 0; i < n_cells; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    CellRecord cell;
    char id[32];
    std::snprintf(id, sizeof id, "syn%03d", i);
    cell.cell_id = id;
    cell.nominal_capacity = 1.1;

    const double life = 300.0 + static_cast<double>(rng.below(2001));
    const double q0 = rng.uniform(1.07, 1.10);
    const double k = rng.uniform(2.0, 6.0);
    const double ir0 = 0.019 - 0.002 * (life - 300.0) / 2000.0 + rng.uniform(-5e-4, 5e-4);
    const double ct0 = 9.0 + 4.0 * std::sqrt(300.0 / life) + rng.uniform(-0.3, 0.3);
    const double t_phase = rng.uniform(0.0, 6.283185307179586);
    const double bump_depth = 0.04 * std::pow(300.0 / life, 1.5) * std::exp(0.1 * rng.normal());

    auto smooth_qd = [&](double c) { return q0 * (1.0 - 0.2 * std::pow(c / life, k)); };

    const int last_cycle = static_cast<int>(life) + 40;
    cell.summaries.reserve(static_cast<std::size_t>(last_cycle));
    for (int c = 1; c <= last_cycle; ++c) {
      const double x = static_cast<double>(c);
      CycleSummary s;
      s.cycle_index = c;
      s.discharge_capacity = smooth_qd(x) + rng.uniform(-3e-5, 3e-5);
      s.charge_capacity = s.discharge_capacity + 0.002 + rng.uniform(-2e-4, 2e-4);
      s.avg_temperature = 30.0 + 2.0 * std::sin(x / 50.0 + t_phase) + 3.0 * (x / life) + 0.1 * rng.normal();
      s.internal_resistance = ir0 * (1.0 + 0.05 * (x / life) * (x / life)) + rng.uniform(-2e-5, 2e-5);
      s.charge_time = ct0 + 0.05 * rng.normal();
      cell.summaries.push_back(s);
    }

    for (const int c : {kEarlyCurveCycle, kLateCurveCycle}) {
      const double qd = smooth_qd(static_cast<double>(c));
      const double depth = bump_depth * (c / 100.0) * (c / 100.0);
      DischargeCurve curve{c, std::vector<double>(volts.size())};
      for (std::size_t j = 0; j < volts.size(); ++j) {
        const double q = qd * capacity_shape(volts[j]) - depth * loss_bump(volts[j]) + rng.uniform(-1e-5, 1e-5);
        curve.q_at_v[j] = std::max(0.0, q);
      }
      cell.curves.emplace(c, std::move(curve));
    }

    cell.cycle_life = compute_cycle_life(cell, 0.8);
    ds.cells.push_back(std::move(cell));
  }
  return ds;
}

}  // namespace cyclelife
