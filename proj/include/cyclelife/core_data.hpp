#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cyclelife {

inline constexpr const char* kSchemaVersion = "1.0";
inline constexpr int kObservationCycles = 100;
inline constexpr int kEarlyCurveCycle = 10;
inline constexpr int kLateCurveCycle = 100;

/// Uniform voltage axis, stored high to low to follow the discharge direction.
struct VoltageGrid {
  double v_min = 2.0;
  double v_max = 3.5;
  int points = 500;

  double voltage(int i) const;
  std::vector<double> voltages() const;
  void validate() const;

  bool operator==(const VoltageGrid&) const = default;
};

struct CycleSummary {
  int cycle_index = 0;
  double discharge_capacity = 0.0;   // Ah
  double charge_capacity = 0.0;      // Ah
  double avg_temperature = 0.0;      // degC
  double internal_resistance = 0.0;  // Ohm
  double charge_time = 0.0;          // minutes

  bool operator==(const CycleSummary&) const = default;
};

struct DischargeCurve {
  int cycle_index = 0;
  std::vector<double> q_at_v;  // Ah, one per grid point in grid order

  bool operator==(const DischargeCurve&) const = default;
};

struct CellRecord {
  std::string cell_id;
  std::vector<CycleSummary> summaries;
  std::map<int, DischargeCurve> curves;
  int cycle_life = 0;
  double nominal_capacity = 1.1;

  /// Summary for a 1-based cycle. Requires contiguous coverage up to `cycle`.
  const CycleSummary& summary(int cycle) const;
  const DischargeCurve& curve(int cycle) const;

  bool operator==(const CellRecord&) const = default;
};

struct Dataset {
  std::vector<CellRecord> cells;
  VoltageGrid grid;
  std::string schema_version = kSchemaVersion;
  std::map<std::string, std::string> provenance;

  bool operator==(const Dataset&) const = default;
};

struct SplitPolicy {
  enum class Kind { RandomFraction, IndexParity };
  Kind kind = Kind::RandomFraction;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Every rule a cell breaks; empty when the cell is valid against `grid`.
std::vector<std::string> check_cell(const CellRecord& cell, const VoltageGrid& grid);

/// Throws ValidationError listing every violating cell and rule.
void validate_dataset(const Dataset& ds);

Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Smallest cycle whose discharge capacity is strictly below
/// threshold_fraction * nominal_capacity. Throws NoCrossing otherwise.
int compute_cycle_life(const CellRecord& cell, double threshold_fraction = 0.8);

SplitIndices split_indices(std::size_t n_cells, const SplitPolicy& policy);
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, const SplitPolicy& policy);
Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices);

Dataset generate_synthetic(int n_cells, const VoltageGrid& grid, std::uint64_t seed);

/// FNV-1a over the dataset's canonical content; identifies a dataset in reports.
std::uint64_t fingerprint(const Dataset& ds);

}  // namespace cyclelife
