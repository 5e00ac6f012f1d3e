#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cyclelife/adam.hpp"
#include "cyclelife/core_data.hpp"
#include "cyclelife/error.hpp"

namespace cyclelife {

inline constexpr int kSeriesLength = kObservationCycles;

enum class Channel { DischargeCapacity, ChargeCapacity, AvgTemperature, InternalResistance, ChargeTime };

std::string_view to_string(Channel channel);
/// Throws MissingChannel for unknown names.
Channel parse_channel(std::string_view name);
std::vector<Channel> default_multivariate_channels();

struct SeriesSample {
  std::string cell_id;
  Eigen::MatrixXd series;  // T x C; T = 100 from build_series
  double target = 0.0;     // cycle life
};

struct ChannelStats {
  std::vector<Channel> channels;
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

struct SeriesSet {
  std::vector<SeriesSample> samples;
  ChannelStats stats;
};

/// First-100-cycle series for every cell, z-scored per channel with statistics
/// fitted on `training_cells` (all cells when empty).
SeriesSet build_series(const Dataset& ds, std::span<const Channel> channels,
                       std::span<const std::size_t> training_cells = {});

enum class CellKind { RNN, LSTM, GRU };
std::string_view to_string(CellKind kind);
CellKind parse_cell_kind(std::string_view name);

struct SequenceModelSpec {
  CellKind cell = CellKind::LSTM;
  int hidden_size = 64;
  bool attention = false;
  int input_channels = 1;
  std::uint64_t seed = 0;
};

/// Offsets of each parameter block inside the flat parameter vector.
/// Gate rows are stacked: LSTM [input, forget, candidate, output],
/// GRU [update, reset, candidate], RNN [candidate].
struct ParamLayout {
  int gates = 1;
  Eigen::Index w_in = 0;   // (gates*H) x C
  Eigen::Index w_rec = 0;  // (gates*H) x H
  Eigen::Index bias = 0;   // gates*H
  Eigen::Index attn_w = -1;  // H, attention only
  Eigen::Index attn_b = -1;  // 1, attention only
  Eigen::Index head_w = 0;   // H
  Eigen::Index head_b = 0;   // 1
  Eigen::Index size = 0;

  static ParamLayout of(const SequenceModelSpec& spec);
};

struct SequenceParams {
  SequenceModelSpec spec;
  Eigen::VectorXd flat;

  ParamLayout layout() const { return ParamLayout::of(spec); }
};

/// Uniform +-1/sqrt(fan_in) weights from the seeded generator; biases 0 except
/// the LSTM forget gate (1.0).
SequenceParams init_sequence_params(const SequenceModelSpec& spec);

struct ForwardResult {
  double prediction = 0.0;
  std::vector<double> attention;  // per time step when attention is enabled
  Eigen::MatrixXd hidden;         // H x T hidden states
};

ForwardResult forward(const SequenceParams& params, const SeriesSample& sample);

/// Gradient of 1/2 (prediction - target)^2 with respect to every parameter (full BPTT).
Eigen::VectorXd backward(const SequenceParams& params, const SeriesSample& sample);

/// Predictions and mean-loss gradient for a batch; gradients are reduced in sample order.
struct BatchResult {
  Eigen::VectorXd predictions;
  Eigen::VectorXd gradient;  // of mean over the batch of 1/2 (pred - y_scaled)^2
};
BatchResult forward_backward(const SequenceParams& params, std::span<const SeriesSample* const> batch,
                             std::span<const double> targets, bool compute_gradient = true);

struct TrainRunConfig {
  int epochs = 100;
  int batch_size = 16;
  AdamConfig adam{};
  bool normalized_targets = false;
  std::optional<double> clip_norm;
};

struct EpochRecord {
  int epoch = 0;
  double mse = 0.0;
  double mape = 0.0;
  std::optional<double> val_mse;
  std::optional<double> val_mape;
};

struct SequenceModel {
  SequenceParams params;
  double target_mean = 0.0;  // identity unless normalized targets were used
  double target_scale = 1.0;

  double predict(const SeriesSample& sample) const;
};

struct SequenceTrainResult {
  SequenceModel model;
  std::vector<EpochRecord> history;
};

/// Raised when the training loss stops being finite; carries everything up to that point.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, SequenceTrainResult partial)
      : Error(ErrorKind::NumericalDivergence, message), partial_(std::move(partial)) {}
  const SequenceTrainResult& partial() const { return partial_; }

 private:
  SequenceTrainResult partial_;
};

SequenceTrainResult train_sequence(const SequenceModelSpec& spec, std::span<const SeriesSample> samples,
                                   const TrainRunConfig& run, std::span<const SeriesSample> validation = {});

std::string history_csv(const std::vector<EpochRecord>& history);
std::string serialize_sequence_model(const SequenceModel& model);
SequenceModel deserialize_sequence_model(std::string_view text);

}  // namespace cyclelife
