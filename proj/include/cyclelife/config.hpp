#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cyclelife/core_data.hpp"
#include "cyclelife/features.hpp"
#include "cyclelife/regressor.hpp"
#include "cyclelife/sequence.hpp"

namespace cyclelife {

struct SequenceSection {
  std::vector<CellKind> cells{CellKind::LSTM};
  std::vector<int> hidden_sizes{64};
  std::vector<bool> attention{false};
  std::vector<Channel> channels{Channel::DischargeCapacity};
  int epochs = 100;
  int batch_size = 16;
  AdamConfig adam{};
  bool normalized_targets = false;
  std::optional<double> clip_norm;
};

/// Everything a run needs. Parsed in full and validated before any work starts.
struct RunConfig {
  std::string dataset;
  std::string out = "run";
  std::uint64_t seed = 0;
  unsigned jobs = 1;  // scheduling only; never changes results
  SplitPolicy split;
  int repeats = 5;
  std::vector<FeatureGroup> groups{kAllGroups.begin(), kAllGroups.end()};
  FeatureOptions features;
  std::vector<RegressorSpec> models;  // every kind with defaults when omitted
  std::vector<std::string> formats{"markdown", "csv", "svg_scatter"};
  std::optional<SequenceSection> sequence;
  /// When set, the loaded dataset must match it.
  std::optional<std::uint64_t> dataset_fingerprint;
};

/// Throws InvalidConfig naming the offending key; unknown keys are rejected.
RunConfig parse_run_config(std::string_view json_text);
/// Fully resolved config as JSON; parse_run_config accepts it back unchanged.
/// `jobs` is left out since it cannot affect any output.
std::string config_to_json(const RunConfig& config);

}  // namespace cyclelife
