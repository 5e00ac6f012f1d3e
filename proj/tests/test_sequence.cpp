#include <gtest/gtest.h>

#include <cmath>

#include "cyclelife/error.hpp"
#include "cyclelife/sequence.hpp"
#include "support/oracles.hpp"

using namespace cyclelife;

namespace {

SeriesSample random_sample(oracle::Lcg& g, int t, int c, double target) {
  SeriesSample s;
  s.cell_id = "s";
  s.series.resize(t, c);
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < c; ++j) s.series(i, j) = g.uniform(-1, 1);
  }
  s.target = target;
  return s;
}

// Perturb every parameter away from zero so no gradient is trivially zero.
SequenceParams jittered(const SequenceModelSpec& spec, std::uint64_t seed) {
  SequenceParams p = init_sequence_params(spec);
  oracle::Lcg g(seed);
  for (Eigen::Index i = 0; i < p.flat.size(); ++i) p.flat(i) += g.uniform(-0.3, 0.3);
  return p;
}

double half_loss(const SequenceParams& p, const SeriesSample& s) {
  const double r = forward(p, s).prediction - s.target;
  return 0.5 * r * r;
}

oracle::Vec to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

class SequenceGradient : public ::testing::TestWithParam<std::tuple<CellKind, bool>> {};

TEST_P(SequenceGradient, MatchesCentralDifferences) {
  const auto [cell, attention] = GetParam();
  const SequenceModelSpec spec{cell, 4, attention, 2, 9};
  const SequenceParams params = jittered(spec, 3);
  oracle::Lcg g(5);
  const SeriesSample s = random_sample(g, 5, 2, 0.7);
  const auto analytic = to_vec(backward(params, s));
  auto f = [&](const oracle::Vec& flat) {
    SequenceParams q = params;
    q.flat = Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
    return half_loss(q, s);
  };
  const auto numeric = oracle::central_differences(f, to_vec(params.flat), 1e-5);
  EXPECT_LT(oracle::max_relative_error(analytic, numeric), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(AllCells, SequenceGradient,
                         ::testing::Combine(::testing::Values(CellKind::RNN, CellKind::LSTM, CellKind::GRU),
                                            ::testing::Bool()),
                         [](const auto& info) {
                           return std::string(to_string(std::get<0>(info.param))) +
                                  (std::get<1>(info.param) ? "_attention" : "_plain");
                         });

TEST(SequenceForward, ZeroNetworkPredictsHeadBias) {
  for (const auto cell : {CellKind::RNN, CellKind::LSTM, CellKind::GRU}) {
    SequenceParams p = init_sequence_params({cell, 3, true, 2, 1});
    p.flat.setZero();
    p.flat(p.layout().head_b) = 0.42;
    oracle::Lcg g(1);
    EXPECT_EQ(forward(p, random_sample(g, 7, 2, 0.0)).prediction, 0.42) << to_string(cell);
  }
}

TEST(SequenceForward, AttentionWeightsFormADistribution) {
  const SequenceParams p = jittered({CellKind::GRU, 5, true, 2, 4}, 8);
  oracle::Lcg g(2);
  const auto r = forward(p, random_sample(g, 12, 2, 0.0));
  ASSERT_EQ(r.attention.size(), 12u);
  double sum = 0.0;
  for (const double a : r.attention) {
    EXPECT_GT(a, 0.0);
    sum += a;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(SequenceForward, LstmMatchesScalarOracle) {
  const SequenceModelSpec spec{CellKind::LSTM, 2, false, 2, 6};
  const SequenceParams p = jittered(spec, 10);
  const ParamLayout l = p.layout();
  oracle::ScalarLstm ref;
  ref.hidden = 2;
  ref.channels = 2;
  const std::size_t rows = 8;
  ref.w_in.assign(rows, oracle::Vec(2));
  ref.w_rec.assign(rows, oracle::Vec(2));
  ref.bias.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < 2; ++k) {
      ref.w_in[r][k] = p.flat(l.w_in + static_cast<Eigen::Index>(r + k * rows));
      ref.w_rec[r][k] = p.flat(l.w_rec + static_cast<Eigen::Index>(r + k * rows));
    }
    ref.bias[r] = p.flat(l.bias + static_cast<Eigen::Index>(r));
  }
  ref.head_w = {p.flat(l.head_w), p.flat(l.head_w + 1)};
  ref.head_b = p.flat(l.head_b);

  oracle::Lcg g(12);
  const SeriesSample s = random_sample(g, 3, 2, 0.0);
  oracle::Mat series;
  for (int t = 0; t < 3; ++t) series.push_back({s.series(t, 0), s.series(t, 1)});
  EXPECT_NEAR(forward(p, s).prediction, ref.run(series), 1e-12);
}

TEST(SequenceForward, HiddenStatesBounded) {
  for (const auto cell : {CellKind::RNN, CellKind::LSTM, CellKind::GRU}) {
    SequenceParams p = jittered({cell, 6, false, 3, 2}, 4);
    p.flat *= 20.0;  // saturate everything
    oracle::Lcg g(3);
    SeriesSample s = random_sample(g, 30, 3, 0.0);
    s.series *= 50.0;
    const auto r = forward(p, s);
    EXPECT_LE(r.hidden.cwiseAbs().maxCoeff(), 1.0) << to_string(cell);
    EXPECT_TRUE(std::isfinite(r.prediction));
  }
}

TEST(SequenceForward, ShapeChecks) {
  const SequenceParams p = init_sequence_params({CellKind::RNN, 3, false, 2, 1});
  oracle::Lcg g(3);
  EXPECT_THROW(forward(p, random_sample(g, 4, 3, 0.0)), Error);
  const SeriesSample a = random_sample(g, 4, 2, 0.0), b = random_sample(g, 5, 2, 0.0);
  const SeriesSample* batch[] = {&a, &b};
  const double targets[] = {0.0, 0.0};
  try {
    forward_backward(p, batch, targets);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(SequenceBackward, ZeroResidualZeroGradient) {
  const SequenceParams p = jittered({CellKind::LSTM, 3, true, 2, 1}, 2);
  oracle::Lcg g(4);
  SeriesSample s = random_sample(g, 6, 2, 0.0);
  s.target = forward(p, s).prediction;
  EXPECT_EQ(backward(p, s).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SequenceBackward, AttentionParametersReceiveGradient) {
  const SequenceParams p = jittered({CellKind::GRU, 3, true, 2, 1}, 2);
  oracle::Lcg g(4);
  const Eigen::VectorXd grad = backward(p, random_sample(g, 6, 2, 3.0));
  const ParamLayout l = p.layout();
  EXPECT_GT(grad.segment(l.attn_w, 3).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SequenceBackward, BatchGradientIsMeanOfSamples) {
  const SequenceParams p = jittered({CellKind::RNN, 3, false, 2, 1}, 6);
  oracle::Lcg g(7);
  const SeriesSample a = random_sample(g, 5, 2, 1.0), b = random_sample(g, 5, 2, -1.0);
  const SeriesSample* batch[] = {&a, &b};
  const double targets[] = {1.0, -1.0};
  const auto r = forward_backward(p, batch, targets);
  const Eigen::VectorXd expected = 0.5 * (backward(p, a) + backward(p, b));
  EXPECT_LT((r.gradient - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam adam(3, AdamConfig{0.01, 0.9, 0.999, 1e-8});
  Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd g(3);
  g << 5.0, -0.2, 1e3;
  adam.step(w, g);
  EXPECT_NEAR(w(0), -0.01, 1e-9);
  EXPECT_NEAR(w(1), 0.01, 1e-7);
  EXPECT_NEAR(w(2), -0.01, 1e-9);
}

TEST(SequenceTraining, MemorizesOneSample) {
  oracle::Lcg g(9);
  const std::vector<SeriesSample> one{random_sample(g, 10, 2, 2.0)};
  TrainRunConfig run;
  run.epochs = 300;
  run.batch_size = 1;
  run.adam.learning_rate = 0.01;
  const auto result = train_sequence({CellKind::LSTM, 8, false, 2, 1}, one, run);
  ASSERT_EQ(result.history.size(), 300u);
  EXPECT_LT(result.history.back().mse, 1e-4);
  EXPECT_LT(result.history.back().mse, result.history.front().mse);
}

TEST(SequenceTraining, DeterministicHistory) {
  oracle::Lcg g(10);
  std::vector<SeriesSample> samples;
  for (int i = 0; i < 6; ++i) samples.push_back(random_sample(g, 8, 2, 100.0 + 10.0 * i));
  TrainRunConfig run;
  run.epochs = 5;
  run.batch_size = 4;
  run.normalized_targets = true;
  const SequenceModelSpec spec{CellKind::GRU, 4, true, 2, 5};
  const auto a = train_sequence(spec, samples, run, samples);
  const auto b = train_sequence(spec, samples, run, samples);
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
  EXPECT_EQ(a.model.params.flat, b.model.params.flat);
  ASSERT_TRUE(a.history.front().val_mse.has_value());
}

TEST(SequenceTraining, HugeLearningRateDiverges) {
  oracle::Lcg g(11);
  std::vector<SeriesSample> samples;
  for (int i = 0; i < 4; ++i) samples.push_back(random_sample(g, 6, 2, 1e300));
  TrainRunConfig run;
  run.epochs = 50;
  run.adam.learning_rate = 1e300;
  try {
    train_sequence({CellKind::RNN, 3, false, 2, 1}, samples, run);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NumericalDivergence);
    EXPECT_LT(e.partial().history.size(), 50u);
  }
}

TEST(SequenceTraining, ZeroTargetRejected) {
  oracle::Lcg g(12);
  const std::vector<SeriesSample> samples{random_sample(g, 4, 2, 0.0), random_sample(g, 4, 2, 5.0)};
  try {
    train_sequence({CellKind::RNN, 3, false, 2, 1}, samples, TrainRunConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroTarget);
  }
}

TEST(SequenceModelIo, RoundTrip) {
  oracle::Lcg g(13);
  SequenceModel m{jittered({CellKind::LSTM, 3, true, 2, 1}, 1), 700.0, 250.0};
  const std::string text = serialize_sequence_model(m);
  const SequenceModel back = deserialize_sequence_model(text);
  const SeriesSample s = random_sample(g, 5, 2, 0.0);
  EXPECT_EQ(back.predict(s), m.predict(s));
  EXPECT_EQ(serialize_sequence_model(back), text);
  EXPECT_NEAR(m.predict(s), 700.0 + 250.0 * forward(m.params, s).prediction, 1e-9);
}

TEST(BuildSeries, StandardizedOnTrainingCells) {
  const Dataset ds = generate_synthetic(6, VoltageGrid{2.0, 3.5, 20}, 3);
  const auto channels = default_multivariate_channels();
  const std::size_t train[] = {0, 1, 2, 3};
  const auto set = build_series(ds, channels, train);
  ASSERT_EQ(set.samples.size(), 6u);
  for (const auto& s : set.samples) {
    EXPECT_EQ(s.series.rows(), 100);
    EXPECT_EQ(s.series.cols(), static_cast<Eigen::Index>(channels.size()));
  }
  for (std::size_t c = 0; c < channels.size(); ++c) {
    double sum = 0.0;
    for (const std::size_t i : train) sum += set.samples[i].series.col(static_cast<Eigen::Index>(c)).sum();
    EXPECT_NEAR(sum / 400.0, 0.0, 1e-9);
  }
  EXPECT_EQ(set.samples[0].target, ds.cells[0].cycle_life);
}

TEST(BuildSeries, UnknownChannel) {
  try {
    parse_channel("voltage_ripple");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingChannel);
  }
  const Dataset ds = generate_synthetic(2, VoltageGrid{2.0, 3.5, 20}, 3);
  EXPECT_THROW(build_series(ds, std::span<const Channel>{}), Error);
}
