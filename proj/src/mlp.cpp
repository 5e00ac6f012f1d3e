#include <cmath>

#include "cyclelife/adam.hpp"
#include "cyclelife/error.hpp"
#include "cyclelife/rng.hpp"
#include "model_fitters.hpp"

namespace cyclelife {
namespace {

struct LayerView {
  Eigen::Index w_offset;
  Eigen::Index b_offset;
  int in;
  int out;
};

std::vector<LayerView> layout(const std::vector<int>& sizes) {
  std::vector<LayerView> views;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    LayerView v{offset, offset + static_cast<Eigen::Index>(sizes[l]) * sizes[l + 1], sizes[l], sizes[l + 1]};
    offset = v.b_offset + v.out;
    views.push_back(v);
  }
  return views;
}

Eigen::Index parameter_count(const std::vector<int>& sizes) {
  const auto views = layout(sizes);
  return views.empty() ? 0 : views.back().b_offset + views.back().out;
}

using ConstMat = Eigen::Map<const Eigen::MatrixXd>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;

void check_shapes(const MlpState& net, const Eigen::MatrixXd& x) {
  if (net.layer_sizes.size() < 2 || net.layer_sizes.back() != 1) {
    fail(ErrorKind::ShapeMismatch, "MLP must end in a single output unit");
  }
  if (net.params.size() != parameter_count(net.layer_sizes)) {
    fail(ErrorKind::ShapeMismatch, "MLP parameter vector does not match its layer sizes");
  }
  if (x.cols() != net.layer_sizes.front()) {
    fail(ErrorKind::DimensionMismatch, "MLP expects " + std::to_string(net.layer_sizes.front()) +
                                           " inputs, got " + std::to_string(x.cols()));
  }
}

}  // namespace

MlpState init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  MlpState net;
  net.layer_sizes = layer_sizes;
  net.params.resize(parameter_count(layer_sizes));
  Rng rng(seed);
  for (const auto& v : layout(layer_sizes)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(v.in));
    for (Eigen::Index i = v.w_offset; i < v.b_offset + v.out; ++i) net.params(i) = rng.uniform(-bound, bound);
  }
  return net;
}

Eigen::VectorXd mlp_forward(const MlpState& net, const Eigen::MatrixXd& x) {
  check_shapes(net, x);
  const auto views = layout(net.layer_sizes);
  Eigen::MatrixXd a = x.transpose();
  for (std::size_t l = 0; l < views.size(); ++l) {
    const auto& v = views[l];
    const ConstMat w(net.params.data() + v.w_offset, v.out, v.in);
    const ConstVec b(net.params.data() + v.b_offset, v.out);
    Eigen::MatrixXd z = (w * a).colwise() + b;
    a = l + 1 < views.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a.row(0).transpose();
}

MlpLoss mlp_loss_and_gradient(const MlpState& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  check_shapes(net, x);
  const auto views = layout(net.layer_sizes);
  const double n = static_cast<double>(x.rows());

  std::vector<Eigen::MatrixXd> acts{x.transpose()};
  std::vector<Eigen::MatrixXd> pre;
  for (std::size_t l = 0; l < views.size(); ++l) {
    const auto& v = views[l];
    const ConstMat w(net.params.data() + v.w_offset, v.out, v.in);
    const ConstVec b(net.params.data() + v.b_offset, v.out);
    pre.push_back((w * acts.back()).colwise() + b);
    acts.push_back(l + 1 < views.size() ? Eigen::MatrixXd(pre.back().cwiseMax(0.0)) : pre.back());
  }

  const Eigen::RowVectorXd resid = acts.back().row(0) - y.transpose();
  MlpLoss out;
  out.loss = 0.5 * resid.squaredNorm() / n;
  out.gradient = Eigen::VectorXd::Zero(net.params.size());

  Eigen::MatrixXd delta = resid / n;  // dLoss/dz for the output layer, 1 x n
  for (std::size_t l = views.size(); l-- > 0;) {
    const auto& v = views[l];
    Eigen::Map<Eigen::MatrixXd>(out.gradient.data() + v.w_offset, v.out, v.in) = delta * acts[l].transpose();
    Eigen::Map<Eigen::VectorXd>(out.gradient.data() + v.b_offset, v.out) = delta.rowwise().sum();
    if (l == 0) break;
    const ConstMat w(net.params.data() + v.w_offset, v.out, v.in);
    delta = (w.transpose() * delta).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return out;
}

namespace detail {

MlpState fit_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<int>& hidden, int epochs,
                 const AdamConfig& adam_config, std::uint64_t seed, TrainingDiagnostics& diag) {
  std::vector<int> sizes{static_cast<int>(x.cols())};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  MlpState net = init_mlp(sizes, seed);
  Adam adam(net.params.size(), adam_config);
  diag.loss_history.clear();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const MlpLoss loss = mlp_loss_and_gradient(net, x, y);
    diag.loss_history.push_back(2.0 * loss.loss);
    if (!std::isfinite(loss.loss)) {
      fail(ErrorKind::NumericalDivergence, "MLP loss became non-finite at epoch " + std::to_string(epoch + 1));
    }
    adam.step(net.params, loss.gradient);
  }
  diag.iterations = epochs;
  return net;
}

}  // namespace detail
}  // namespace cyclelife
