#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "cyclelife/core_data.hpp"
#include "cyclelife/error.hpp"
#include "cyclelife/text_io.hpp"
#include "support/fixtures.hpp"

using namespace cyclelife;
namespace fs = std::filesystem;

TEST(VoltageGrid, DescendingUniformAxis) {
  const VoltageGrid g;
  const auto v = g.voltages();
  ASSERT_EQ(v.size(), 500u);
  EXPECT_DOUBLE_EQ(v.front(), 3.5);
  EXPECT_DOUBLE_EQ(v.back(), 2.0);
  const double step = (v.front() - v.back()) / 499.0;
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_NEAR(v[i - 1] - v[i], step, 1e-12 * step);
}

TEST(VoltageGrid, RejectsBadBounds) {
  EXPECT_THROW((VoltageGrid{3.5, 2.0, 500}.validate()), Error);
  EXPECT_THROW((VoltageGrid{2.0, 3.5, 1}.validate()), Error);
}

TEST(CycleLife, LinearFadeStrictCrossing) {
  CellRecord cell;
  cell.nominal_capacity = 1.1;
  for (int c = 1; c <= 500; ++c) {
    cell.summaries.push_back({c, 1.1 - 0.00055 * (c - 1), 1.1, 30, 0.02, 10});
  }
  // qd(401) equals 0.8 * 1.1 bit for bit, so it is not below the threshold.
  EXPECT_EQ(cell.summaries[400].discharge_capacity, 0.8 * 1.1);
  EXPECT_EQ(compute_cycle_life(cell, 0.8), 402);
}

TEST(CycleLife, ExactThresholdIsNotBelow) {
  CellRecord cell;
  cell.nominal_capacity = 1.0;
  cell.summaries = {{1, 1.0, 1.0, 30, 0.02, 10}, {2, 0.5, 1.0, 30, 0.02, 10}, {3, 0.25, 1.0, 30, 0.02, 10}};
  EXPECT_EQ(compute_cycle_life(cell, 0.5), 3);
}

TEST(CycleLife, SuddenDrop) {
  CellRecord cell;
  cell.nominal_capacity = 1.1;
  cell.summaries = {{1, 1.1, 1.1, 30, 0.02, 10}, {2, 0.5, 1.1, 30, 0.02, 10}};
  EXPECT_EQ(compute_cycle_life(cell, 0.8), 2);
}

TEST(CycleLife, ConstantCapacityNeverCrosses) {
  CellRecord cell;
  cell.nominal_capacity = 1.1;
  for (int c = 1; c <= 200; ++c) cell.summaries.push_back({c, 1.1, 1.1, 30, 0.02, 10});
  try {
    compute_cycle_life(cell, 0.8);
    FAIL() << "expected NoCrossing";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoCrossing);
  }
}

TEST(CycleLife, MonotoneInThreshold) {
  const Dataset ds = generate_synthetic(6, VoltageGrid{}, 3);
  for (const auto& cell : ds.cells) {
    int previous = 0;
    for (double f = 0.95; f >= 0.81; f -= 0.02) {
      const int life = compute_cycle_life(cell, f);
      EXPECT_GE(life, previous);
      previous = life;
    }
  }
}

TEST(Split, RandomFractionDeterministic) {
  SplitPolicy p;
  p.test_fraction = 0.2;
  p.seed = 7;
  const auto a = split_indices(10, p);
  const auto b = split_indices(10, p);
  EXPECT_EQ(a.train.size(), 8u);
  EXPECT_EQ(a.test.size(), 2u);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
}

TEST(Split, IndexParity) {
  SplitPolicy p;
  p.kind = SplitPolicy::Kind::IndexParity;
  const auto s = split_indices(4, p);
  EXPECT_EQ(s.train, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(s.test, (std::vector<std::size_t>{1, 3}));
}

TEST(Split, SingleCellIsDegenerate) {
  SplitPolicy p;
  try {
    split_indices(1, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateSplit);
  }
}

TEST(Split, PartitionProperty) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SplitPolicy p;
    p.seed = seed;
    p.test_fraction = 0.05 + 0.9 * static_cast<double>(seed % 10) / 10.0;
    const std::size_t n = 5 + seed % 40;
    const auto n_test = std::llround(p.test_fraction * static_cast<double>(n));
    if (n_test < 1 || n_test >= static_cast<long long>(n)) {
      EXPECT_THROW(split_indices(n, p), Error);
      continue;
    }
    const auto s = split_indices(n, p);
    EXPECT_EQ(s.test.size(), static_cast<std::size_t>(n_test));
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(n);
    std::iota(expected.begin(), expected.end(), std::size_t{0});
    EXPECT_EQ(all, expected) << "seed " << seed;
  }
}

TEST(Split, DatasetSplitKeepsGrid) {
  const Dataset ds = generate_synthetic(10, VoltageGrid{2.0, 3.5, 50}, 1);
  SplitPolicy p;
  p.seed = 7;
  const auto [train, test] = split_dataset(ds, p);
  EXPECT_EQ(train.cells.size() + test.cells.size(), 10u);
  EXPECT_EQ(train.grid, ds.grid);
  EXPECT_EQ(test.grid, ds.grid);
}

TEST(Synthetic, Deterministic) {
  const VoltageGrid g{2.0, 3.5, 100};
  EXPECT_EQ(generate_synthetic(5, g, 1), generate_synthetic(5, g, 1));
  const auto a = generate_synthetic(5, g, 1), b = generate_synthetic(5, g, 2);
  int same = 0;
  for (std::size_t i = 0; i < 5; ++i) same += a.cells[i].cycle_life == b.cells[i].cycle_life;
  EXPECT_LT(same, 5);
}

TEST(Synthetic, StoredLifeMatchesThresholdRule) {
  const Dataset ds = generate_synthetic(20, VoltageGrid{}, 11);
  for (const auto& cell : ds.cells) {
    EXPECT_EQ(compute_cycle_life(cell, 0.8), cell.cycle_life) << cell.cell_id;
    EXPECT_GT(cell.cycle_life, 100);
    EXPECT_TRUE(check_cell(cell, ds.grid).empty());
  }
}

TEST(DatasetIo, RoundTrip) {
  test_support::TempDir dir;
  const Dataset ds = generate_synthetic(2, VoltageGrid{2.0, 3.5, 60}, 5);
  save_dataset(ds, dir.path());
  const Dataset back = load_dataset(dir.path());
  EXPECT_EQ(back.cells.size(), 2u);
  EXPECT_EQ(back.cells, ds.cells);
  EXPECT_EQ(back.grid, ds.grid);
  EXPECT_EQ(fingerprint(back), fingerprint(ds));
}

TEST(DatasetIo, MissingManifest) {
  test_support::TempDir dir;
  try {
    load_dataset(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingManifest);
  }
}

TEST(DatasetIo, SchemaVersionMismatch) {
  test_support::TempDir dir;
  save_dataset(generate_synthetic(2, VoltageGrid{2.0, 3.5, 20}, 5), dir.path());
  auto manifest = text::read_file(dir.path() / "manifest.json");
  const auto pos = manifest.find("\"1.0\"");
  ASSERT_NE(pos, std::string::npos);
  manifest.replace(pos, 5, "\"2.0\"");
  text::write_file(dir.path() / "manifest.json", manifest);
  try {
    load_dataset(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SchemaVersionMismatch);
  }
}

TEST(DatasetIo, MissingCurveReportedPerCell) {
  test_support::TempDir dir;
  const Dataset ds = generate_synthetic(3, VoltageGrid{2.0, 3.5, 20}, 5);
  save_dataset(ds, dir.path());
  fs::remove(dir.path() / "cells" / ds.cells[1].cell_id / "qdv_100.csv");
  try {
    load_dataset(dir.path());
    FAIL();
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.violations().size(), 1u);
    EXPECT_EQ(e.violations()[0], (Violation{ds.cells[1].cell_id, "missing required curve 100"}));
  }
}

TEST(DatasetIo, GapReportedAlongsideOtherViolations) {
  test_support::TempDir dir;
  Dataset ds = generate_synthetic(3, VoltageGrid{2.0, 3.5, 20}, 5);
  auto& s = ds.cells[0].summaries;
  s.erase(s.begin() + 56);  // cycle 57
  ds.cells[2].cycle_life = 90;
  save_dataset(ds, dir.path());
  try {
    load_dataset(dir.path());
    FAIL();
  } catch (const ValidationError& e) {
    const auto& v = e.violations();
    EXPECT_NE(std::find(v.begin(), v.end(), Violation{ds.cells[0].cell_id, "gap in cycle coverage"}), v.end());
    EXPECT_NE(std::find(v.begin(), v.end(), Violation{ds.cells[2].cell_id, "cycle life must exceed 100"}), v.end());
  }
}

TEST(Validation, DuplicateIds) {
  Dataset ds = generate_synthetic(2, VoltageGrid{2.0, 3.5, 20}, 5);
  ds.cells[1].cell_id = ds.cells[0].cell_id;
  EXPECT_THROW(validate_dataset(ds), ValidationError);
}

TEST(Validation, WrongCurveLength) {
  Dataset ds = generate_synthetic(1, VoltageGrid{2.0, 3.5, 20}, 5);
  ds.cells[0].curves.at(10).q_at_v.pop_back();
  EXPECT_FALSE(check_cell(ds.cells[0], ds.grid).empty());
}

TEST(Fingerprint, IgnoresProvenanceButSeesContent) {
  Dataset ds = generate_synthetic(2, VoltageGrid{2.0, 3.5, 20}, 5);
  const auto base = fingerprint(ds);
  ds.provenance["note"] = "anything";
  EXPECT_EQ(fingerprint(ds), base);
  ds.cells[0].summaries[3].charge_time += 1e-9;
  EXPECT_NE(fingerprint(ds), base);
}
