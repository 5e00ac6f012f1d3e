#include "cyclelife/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "cyclelife/rng.hpp"
#include "cyclelife/text_io.hpp"

namespace cyclelife {
namespace {

using Mat = Eigen::MatrixXd;
using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
using MutMap = Eigen::Map<Eigen::MatrixXd>;

struct ChannelName {
  Channel channel;
  const char* name;
};
constexpr ChannelName kChannelNames[] = {
    {Channel::DischargeCapacity, "discharge_capacity"},
    {Channel::ChargeCapacity, "charge_capacity"},
    {Channel::AvgTemperature, "avg_temperature"},
    {Channel::InternalResistance, "internal_resistance"},
    {Channel::ChargeTime, "charge_time"},
};

double channel_value(const CycleSummary& s, Channel c) {
  switch (c) {
    case Channel::DischargeCapacity: return s.discharge_capacity;
    case Channel::ChargeCapacity: return s.charge_capacity;
    case Channel::AvgTemperature: return s.avg_temperature;
    case Channel::InternalResistance: return s.internal_resistance;
    case Channel::ChargeTime: return s.charge_time;
  }
  return 0.0;
}

Mat sigmoid(const Mat& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }
Mat tanh_of(const Mat& a) { return a.array().tanh().matrix(); }

// Views over the flat parameter vector.
struct Views {
  Views(const SequenceParams& p)
      : layout(p.layout()),
        hidden(p.spec.hidden_size),
        w_in(p.flat.data() + layout.w_in, layout.gates * hidden, p.spec.input_channels),
        w_rec(p.flat.data() + layout.w_rec, layout.gates * hidden, hidden),
        bias(p.flat.data() + layout.bias, layout.gates * hidden, 1),
        head_w(p.flat.data() + layout.head_w, hidden, 1),
        head_b(p.flat(layout.head_b)) {}

  ParamLayout layout;
  int hidden;
  ConstMap w_in;
  ConstMap w_rec;
  ConstMap bias;
  ConstMap head_w;
  double head_b;
};

struct Step {
  Mat x;      // C x B
  Mat h;      // H x B
  Mat gates;  // activated gates, (gates*H) x B
  Mat c;      // LSTM cell state
  Mat rh;     // GRU reset-gated previous state
};

struct Trace {
  std::vector<Step> steps;
  Mat alpha;  // T x B attention weights
  Mat context;
  Eigen::RowVectorXd prediction;
};

Trace run_forward(const SequenceParams& params, std::span<const SeriesSample* const> batch) {
  const Views v(params);
  const auto& spec = params.spec;
  const int H = spec.hidden_size;
  const auto B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index C = spec.input_channels;
  if (batch.empty()) fail(ErrorKind::InvalidArgument, "empty batch");
  const Eigen::Index T = batch.front()->series.rows();
  for (const auto* s : batch) {
    if (T < 1 || s->series.rows() != T || s->series.cols() != C) {
      fail(ErrorKind::ShapeMismatch, "series for " + s->cell_id + " is " + std::to_string(s->series.rows()) + "x" +
                                         std::to_string(s->series.cols()) + ", expected " + std::to_string(T) + "x" +
                                         std::to_string(C));
    }
  }

  Trace tr;
  tr.steps.resize(static_cast<std::size_t>(T));
  Mat h_prev = Mat::Zero(H, B);
  Mat c_prev = Mat::Zero(H, B);
  for (Eigen::Index t = 0; t < T; ++t) {
    Step& st = tr.steps[static_cast<std::size_t>(t)];
    st.x.resize(C, B);
    for (Eigen::Index b = 0; b < B; ++b) st.x.col(b) = batch[static_cast<std::size_t>(b)]->series.row(t).transpose();

    switch (spec.cell) {
      case CellKind::RNN: {
        st.gates = tanh_of((v.w_in * st.x + v.w_rec * h_prev).colwise() + v.bias.col(0));
        st.h = st.gates;
        break;
      }
      case CellKind::LSTM: {
        const Mat a = (v.w_in * st.x + v.w_rec * h_prev).colwise() + v.bias.col(0);
        st.gates.resize(4 * H, B);
        st.gates.topRows(2 * H) = sigmoid(a.topRows(2 * H));
        st.gates.middleRows(2 * H, H) = tanh_of(a.middleRows(2 * H, H));
        st.gates.bottomRows(H) = sigmoid(a.bottomRows(H));
        const auto i = st.gates.topRows(H);
        const auto f = st.gates.middleRows(H, H);
        const auto g = st.gates.middleRows(2 * H, H);
        const auto o = st.gates.bottomRows(H);
        st.c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
        st.h = o.cwiseProduct(tanh_of(st.c));
        c_prev = st.c;
        break;
      }
      case CellKind::GRU: {
        const Mat xin = (v.w_in * st.x).colwise() + v.bias.col(0);
        st.gates.resize(3 * H, B);
        st.gates.topRows(2 * H) = sigmoid(xin.topRows(2 * H) + v.w_rec.topRows(2 * H) * h_prev);
        const auto z = st.gates.topRows(H);
        const auto r = st.gates.middleRows(H, H);
        st.rh = r.cwiseProduct(h_prev);
        st.gates.bottomRows(H) = tanh_of(xin.bottomRows(H) + v.w_rec.bottomRows(H) * st.rh);
        const auto n = st.gates.bottomRows(H);
        st.h = z.cwiseProduct(h_prev) + (Mat::Ones(H, B) - z).cwiseProduct(n);
        break;
      }
    }
    h_prev = st.h;
  }

  if (spec.attention) {
    const ConstMap attn_w(params.flat.data() + v.layout.attn_w, H, 1);
    const double attn_b = params.flat(v.layout.attn_b);
    Mat scores(T, B);
    for (Eigen::Index t = 0; t < T; ++t) {
      scores.row(t) = (attn_w.transpose() * tr.steps[static_cast<std::size_t>(t)].h).array() + attn_b;
    }
    tr.alpha.resize(T, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const double mx = scores.col(b).maxCoeff();
      const Eigen::ArrayXd e = (scores.col(b).array() - mx).exp();
      tr.alpha.col(b) = (e / e.sum()).matrix();
    }
    tr.context = Mat::Zero(H, B);
    for (Eigen::Index t = 0; t < T; ++t) {
      tr.context += tr.steps[static_cast<std::size_t>(t)].h * tr.alpha.row(t).asDiagonal();
    }
  } else {
    tr.context = tr.steps.back().h;
  }
  tr.prediction = (v.head_w.transpose() * tr.context).array() + v.head_b;
  return tr;
}

// d(loss)/d(prediction) per sample is `dpred`; accumulates every parameter gradient.
Eigen::VectorXd run_backward(const SequenceParams& params, const Trace& tr, const Eigen::RowVectorXd& dpred) {
  const Views v(params);
  const auto& spec = params.spec;
  const int H = spec.hidden_size;
  const Eigen::Index B = dpred.size();
  const auto T = static_cast<Eigen::Index>(tr.steps.size());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(v.layout.size);
  MutMap g_in(grad.data() + v.layout.w_in, v.layout.gates * H, spec.input_channels);
  MutMap g_rec(grad.data() + v.layout.w_rec, v.layout.gates * H, H);
  MutMap g_bias(grad.data() + v.layout.bias, v.layout.gates * H, 1);
  MutMap g_head(grad.data() + v.layout.head_w, H, 1);

  g_head = tr.context * dpred.transpose();
  grad(v.layout.head_b) = dpred.sum();
  const Mat d_context = v.head_w * dpred;  // H x B

  // Gradient reaching each hidden state directly from the output path.
  std::vector<Mat> d_direct(tr.steps.size());
  if (spec.attention) {
    const ConstMap attn_w(params.flat.data() + v.layout.attn_w, H, 1);
    MutMap g_attn(grad.data() + v.layout.attn_w, H, 1);
    Mat d_alpha(T, B);
    for (Eigen::Index t = 0; t < T; ++t) {
      d_alpha.row(t) = tr.steps[static_cast<std::size_t>(t)].h.cwiseProduct(d_context).colwise().sum();
    }
    Mat d_scores(T, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const double weighted = tr.alpha.col(b).dot(d_alpha.col(b));
      d_scores.col(b) = tr.alpha.col(b).cwiseProduct((d_alpha.col(b).array() - weighted).matrix());
    }
    grad(v.layout.attn_b) = d_scores.sum();
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto& h = tr.steps[static_cast<std::size_t>(t)].h;
      g_attn += h * d_scores.row(t).transpose();
      d_direct[static_cast<std::size_t>(t)] = d_context * tr.alpha.row(t).asDiagonal();
      d_direct[static_cast<std::size_t>(t)] += attn_w * d_scores.row(t);
    }
  } else {
    for (auto& d : d_direct) d = Mat::Zero(H, B);
    d_direct.back() = d_context;
  }

  Mat dh_carry = Mat::Zero(H, B);
  Mat dc_carry = Mat::Zero(H, B);
  const Mat zeros = Mat::Zero(H, B);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const Step& st = tr.steps[static_cast<std::size_t>(t)];
    const Mat& h_prev = t > 0 ? tr.steps[static_cast<std::size_t>(t - 1)].h : zeros;
    const Mat dh = d_direct[static_cast<std::size_t>(t)] + dh_carry;

    switch (spec.cell) {
      case CellKind::RNN: {
        const Mat da = dh.cwiseProduct((1.0 - st.h.array().square()).matrix());
        g_in += da * st.x.transpose();
        g_rec += da * h_prev.transpose();
        g_bias += da.rowwise().sum();
        dh_carry = v.w_rec.transpose() * da;
        break;
      }
      case CellKind::LSTM: {
        const Mat& c_prev = t > 0 ? tr.steps[static_cast<std::size_t>(t - 1)].c : zeros;
        const auto i = st.gates.topRows(H);
        const auto f = st.gates.middleRows(H, H);
        const auto g = st.gates.middleRows(2 * H, H);
        const auto o = st.gates.bottomRows(H);
        const Mat tanh_c = tanh_of(st.c);
        const Mat dc = dc_carry + dh.cwiseProduct(o).cwiseProduct((1.0 - tanh_c.array().square()).matrix());
        Mat da(4 * H, B);
        da.topRows(H) = (dc.cwiseProduct(g).array() * i.array() * (1.0 - i.array())).matrix();
        da.middleRows(H, H) = (dc.cwiseProduct(c_prev).array() * f.array() * (1.0 - f.array())).matrix();
        da.middleRows(2 * H, H) = (dc.cwiseProduct(i).array() * (1.0 - g.array().square())).matrix();
        da.bottomRows(H) = (dh.cwiseProduct(tanh_c).array() * o.array() * (1.0 - o.array())).matrix();
        g_in += da * st.x.transpose();
        g_rec += da * h_prev.transpose();
        g_bias += da.rowwise().sum();
        dh_carry = v.w_rec.transpose() * da;
        dc_carry = dc.cwiseProduct(f);
        break;
      }
      case CellKind::GRU: {
        const auto z = st.gates.topRows(H);
        const auto r = st.gates.middleRows(H, H);
        const auto n = st.gates.bottomRows(H);
        Mat da(3 * H, B);
        const Mat dn = dh.cwiseProduct((1.0 - z.array()).matrix());
        da.bottomRows(H) = (dn.array() * (1.0 - n.array().square())).matrix();
        const Mat d_rh = v.w_rec.bottomRows(H).transpose() * da.bottomRows(H);
        da.topRows(H) = (dh.cwiseProduct(h_prev - n).array() * z.array() * (1.0 - z.array())).matrix();
        da.middleRows(H, H) = (d_rh.cwiseProduct(h_prev).array() * r.array() * (1.0 - r.array())).matrix();

        g_in += da * st.x.transpose();
        g_rec.topRows(2 * H) += da.topRows(2 * H) * h_prev.transpose();
        g_rec.bottomRows(H) += da.bottomRows(H) * st.rh.transpose();
        g_bias += da.rowwise().sum();
        dh_carry = dh.cwiseProduct(z) + d_rh.cwiseProduct(r) + v.w_rec.topRows(2 * H).transpose() * da.topRows(2 * H);
        break;
      }
    }
  }
  return grad;
}

}  // namespace

std::string_view to_string(Channel channel) {
  for (const auto& c : kChannelNames) {
    if (c.channel == channel) return c.name;
  }
  return "?";
}

Channel parse_channel(std::string_view name) {
  for (const auto& c : kChannelNames) {
    if (name == c.name) return c.channel;
  }
  fail(ErrorKind::MissingChannel, "unknown channel '" + std::string(name) + "'");
}

std::vector<Channel> default_multivariate_channels() {
  return {Channel::DischargeCapacity, Channel::ChargeCapacity, Channel::AvgTemperature,
          Channel::InternalResistance};
}

SeriesSet build_series(const Dataset& ds, std::span<const Channel> channels,
                       std::span<const std::size_t> training_cells) {
  if (channels.empty()) fail(ErrorKind::MissingChannel, "at least one channel is required");
  if (ds.cells.empty()) fail(ErrorKind::EmptyDataset, "dataset has no cells");
  const auto C = static_cast<Eigen::Index>(channels.size());

  SeriesSet out;
  out.stats.channels.assign(channels.begin(), channels.end());
  for (const auto& cell : ds.cells) {
    SeriesSample s;
    s.cell_id = cell.cell_id;
    s.target = cell.cycle_life;
    s.series.resize(kSeriesLength, C);
    for (int t = 0; t < kSeriesLength; ++t) {
      const auto& summary = cell.summary(t + 1);
      for (Eigen::Index c = 0; c < C; ++c) s.series(t, c) = channel_value(summary, channels[static_cast<std::size_t>(c)]);
    }
    out.samples.push_back(std::move(s));
  }

  std::vector<std::size_t> train(training_cells.begin(), training_cells.end());
  if (train.empty()) {
    train.resize(ds.cells.size());
    std::iota(train.begin(), train.end(), std::size_t{0});
  }
  out.stats.mean = Eigen::VectorXd::Zero(C);
  out.stats.std = Eigen::VectorXd::Zero(C);
  const double count = static_cast<double>(train.size() * kSeriesLength);
  for (const auto i : train) out.stats.mean += out.samples.at(i).series.colwise().sum().transpose();
  out.stats.mean /= count;
  for (const auto i : train) {
    out.stats.std += (out.samples[i].series.rowwise() - out.stats.mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  out.stats.std = (out.stats.std / count).cwiseSqrt();

  for (auto& s : out.samples) {
    for (Eigen::Index c = 0; c < C; ++c) {
      if (out.stats.std(c) > 0.0) {
        s.series.col(c) = (s.series.col(c).array() - out.stats.mean(c)) / out.stats.std(c);
      } else {
        s.series.col(c).setZero();
      }
    }
  }
  return out;
}

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::RNN: return "RNN";
    case CellKind::LSTM: return "LSTM";
    case CellKind::GRU: return "GRU";
  }
  return "?";
}

CellKind parse_cell_kind(std::string_view name) {
  for (const auto k : {CellKind::RNN, CellKind::LSTM, CellKind::GRU}) {
    if (name == to_string(k)) return k;
  }
  fail(ErrorKind::InvalidArgument, "unknown cell kind '" + std::string(name) + "'");
}

ParamLayout ParamLayout::of(const SequenceModelSpec& spec) {
  if (spec.hidden_size < 1 || spec.input_channels < 1) {
    fail(ErrorKind::ShapeMismatch, "hidden size and input channels must be >= 1");
  }
  ParamLayout l;
  l.gates = spec.cell == CellKind::LSTM ? 4 : spec.cell == CellKind::GRU ? 3 : 1;
  const Eigen::Index H = spec.hidden_size;
  const Eigen::Index rows = l.gates * H;
  l.w_in = 0;
  l.w_rec = l.w_in + rows * spec.input_channels;
  l.bias = l.w_rec + rows * H;
  Eigen::Index next = l.bias + rows;
  if (spec.attention) {
    l.attn_w = next;
    l.attn_b = next + H;
    next += H + 1;
  }
  l.head_w = next;
  l.head_b = next + H;
  l.size = l.head_b + 1;
  return l;
}

SequenceParams init_sequence_params(const SequenceModelSpec& spec) {
  SequenceParams p{spec, {}};
  const ParamLayout l = p.layout();
  p.flat = Eigen::VectorXd::Zero(l.size);
  Rng rng(spec.seed);
  const double cell_bound = 1.0 / std::sqrt(static_cast<double>(spec.input_channels + spec.hidden_size));
  for (Eigen::Index i = l.w_in; i < l.bias; ++i) p.flat(i) = rng.uniform(-cell_bound, cell_bound);
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(spec.hidden_size));
  if (spec.attention) {
    for (Eigen::Index i = l.attn_w; i < l.attn_b; ++i) p.flat(i) = rng.uniform(-head_bound, head_bound);
  }
  for (Eigen::Index i = l.head_w; i < l.head_b; ++i) p.flat(i) = rng.uniform(-head_bound, head_bound);
  if (spec.cell == CellKind::LSTM) {
    p.flat.segment(l.bias + spec.hidden_size, spec.hidden_size).setOnes();
  }
  return p;
}

ForwardResult forward(const SequenceParams& params, const SeriesSample& sample) {
  const SeriesSample* batch[] = {&sample};
  const Trace tr = run_forward(params, batch);
  ForwardResult out;
  out.prediction = tr.prediction(0);
  if (params.spec.attention) out.attention.assign(tr.alpha.data(), tr.alpha.data() + tr.alpha.rows());
  out.hidden.resize(params.spec.hidden_size, static_cast<Eigen::Index>(tr.steps.size()));
  for (Eigen::Index t = 0; t < out.hidden.cols(); ++t) out.hidden.col(t) = tr.steps[static_cast<std::size_t>(t)].h.col(0);
  return out;
}

Eigen::VectorXd backward(const SequenceParams& params, const SeriesSample& sample) {
  const SeriesSample* batch[] = {&sample};
  const Trace tr = run_forward(params, batch);
  Eigen::RowVectorXd dpred(1);
  dpred(0) = tr.prediction(0) - sample.target;
  return run_backward(params, tr, dpred);
}

BatchResult forward_backward(const SequenceParams& params, std::span<const SeriesSample* const> batch,
                             std::span<const double> targets, bool compute_gradient) {
  const Trace tr = run_forward(params, batch);
  BatchResult out;
  out.predictions = tr.prediction.transpose();
  if (compute_gradient) {
    Eigen::RowVectorXd dpred(tr.prediction.size());
    for (Eigen::Index b = 0; b < dpred.size(); ++b) {
      dpred(b) = (tr.prediction(b) - targets[static_cast<std::size_t>(b)]) / static_cast<double>(dpred.size());
    }
    out.gradient = run_backward(params, tr, dpred);
  }
  return out;
}

double SequenceModel::predict(const SeriesSample& sample) const {
  return forward(params, sample).prediction * target_scale + target_mean;
}

namespace {

struct EpochMetrics {
  double mse = 0.0;
  double mape = 0.0;
};

EpochMetrics evaluate(const SequenceModel& model, std::span<const SeriesSample> samples) {
  EpochMetrics m;
  for (const auto& s : samples) {
    const double err = model.predict(s) - s.target;
    m.mse += err * err;
    m.mape += std::abs(err) / std::abs(s.target);
  }
  const double n = static_cast<double>(samples.size());
  return {m.mse / n, 100.0 * m.mape / n};
}

}  // namespace

SequenceTrainResult train_sequence(const SequenceModelSpec& spec, std::span<const SeriesSample> samples,
                                   const TrainRunConfig& run, std::span<const SeriesSample> validation) {
  if (samples.empty()) fail(ErrorKind::InvalidArgument, "sequence training needs at least one sample");
  if (run.epochs < 1 || run.batch_size < 1) fail(ErrorKind::InvalidArgument, "epochs and batch size must be >= 1");
  for (const auto& s : samples) {
    if (s.target == 0.0) fail(ErrorKind::ZeroTarget, "sample " + s.cell_id + " has a zero target");
  }

  SequenceTrainResult result;
  result.model.params = init_sequence_params(spec);
  if (run.normalized_targets) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s.target;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (const auto& s : samples) var += (s.target - mean) * (s.target - mean);
    var /= static_cast<double>(samples.size());
    result.model.target_mean = mean;
    result.model.target_scale = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  const double mean = result.model.target_mean;
  const double scale = result.model.target_scale;

  Adam adam(result.model.params.flat.size(), run.adam);
  Rng order_rng(derive_seed(spec.seed, 0x5eed));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= run.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double sq = 0.0, ape = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(run.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(run.batch_size));
      std::vector<const SeriesSample*> batch;
      std::vector<double> targets;
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(&samples[order[k]]);
        targets.push_back((samples[order[k]].target - mean) / scale);
      }
      BatchResult br = forward_backward(result.model.params, batch, targets);
      for (std::size_t k = 0; k < batch.size(); ++k) {
        const double err = br.predictions(static_cast<Eigen::Index>(k)) * scale + mean - batch[k]->target;
        sq += err * err;
        ape += std::abs(err) / std::abs(batch[k]->target);
      }
      if (run.clip_norm) {
        const double norm = br.gradient.norm();
        if (norm > *run.clip_norm) br.gradient *= *run.clip_norm / norm;
      }
      if (!br.gradient.allFinite()) {
        throw DivergenceError("gradient became non-finite at epoch " + std::to_string(epoch), result);
      }
      adam.step(result.model.params.flat, br.gradient);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mse = sq / static_cast<double>(samples.size());
    rec.mape = 100.0 * ape / static_cast<double>(samples.size());
    if (!validation.empty()) {
      const auto vm = evaluate(result.model, validation);
      rec.val_mse = vm.mse;
      rec.val_mape = vm.mape;
    }
    result.history.push_back(rec);
    if (!std::isfinite(rec.mse) || !result.model.params.flat.allFinite()) {
      throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch), result);
    }
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  const bool with_val = !history.empty() && history.front().val_mse.has_value();
  std::string out = with_val ? "epoch,mse,mape,val_mse,val_mape\n" : "epoch,mse,mape\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + ',' + text::format_double(r.mse) + ',' + text::format_double(r.mape);
    if (with_val) {
      out += ',' + text::format_double(r.val_mse.value_or(0.0)) + ',' + text::format_double(r.val_mape.value_or(0.0));
    }
    out += '\n';
  }
  return out;
}

// {"format": "cyclelife-sequence-model", "version": 1, "spec": {...},
//  "target_mean", "target_scale", "params": [...]}   (params in ParamLayout order)
std::string serialize_sequence_model(const SequenceModel& model) {
  const auto& s = model.params.spec;
  nlohmann::json j;
  j["format"] = "cyclelife-sequence-model";
  j["version"] = 1;
  j["spec"] = {{"cell", std::string(to_string(s.cell))},
               {"hidden_size", s.hidden_size},
               {"attention", s.attention},
               {"input_channels", s.input_channels},
               {"seed", s.seed}};
  j["target_mean"] = model.target_mean;
  j["target_scale"] = model.target_scale;
  j["params"] = std::vector<double>(model.params.flat.data(), model.params.flat.data() + model.params.flat.size());
  return j.dump() + "\n";
}

SequenceModel deserialize_sequence_model(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "cyclelife-sequence-model") {
      fail(ErrorKind::ParseError, "not a cyclelife sequence model file");
    }
    if (j.at("version").get<int>() != 1) fail(ErrorKind::SchemaVersionMismatch, "unsupported sequence model version");
    SequenceModel m;
    const auto& js = j.at("spec");
    m.params.spec.cell = parse_cell_kind(js.at("cell").get<std::string>());
    m.params.spec.hidden_size = js.at("hidden_size").get<int>();
    m.params.spec.attention = js.at("attention").get<bool>();
    m.params.spec.input_channels = js.at("input_channels").get<int>();
    m.params.spec.seed = js.at("seed").get<std::uint64_t>();
    const auto flat = j.at("params").get<std::vector<double>>();
    if (std::cmp_not_equal(flat.size(), m.params.layout().size)) {
      fail(ErrorKind::ShapeMismatch, "parameter count does not match the model spec");
    }
    m.params.flat = Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
    m.target_mean = j.at("target_mean").get<double>();
    m.target_scale = j.at("target_scale").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("malformed sequence model file: ") + e.what());
  }
}

}  // namespace cyclelife
