#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "cyclelife/core_data.hpp"

namespace test_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cyclelife_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// A valid cell with linear fade and flat auxiliary channels. Curves are filled
/// by the caller when a test cares about them.
inline cyclelife::CellRecord linear_cell(const std::string& id, int points, double slope = -0.001) {
  cyclelife::CellRecord cell;
  cell.cell_id = id;
  cell.nominal_capacity = 1.1;
  for (int c = 1; c <= 150; ++c) {
    cell.summaries.push_back({c, 1.1 + slope * c, 1.1, 30.0, 0.02, 10.0});
  }
  cell.cycle_life = 120;
  for (const int c : {10, 100}) {
    cell.curves[c] = {c, std::vector<double>(static_cast<std::size_t>(points), 1.0)};
  }
  return cell;
}

}  // namespace test_support
