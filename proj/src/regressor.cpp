#include "cyclelife/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "cyclelife/error.hpp"
#include "model_fitters.hpp"

namespace cyclelife {
namespace {

struct ParamRule {
  const char* key;
  double value;
  double min;
  double max;
  bool integer;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<ParamRule> rules_for(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear:
      return {{"jitter", 1e-10, 0.0, kInf, false}};
    case ModelKind::Ridge:
      return {{"alpha", 1.0, 0.0, kInf, false}};
    case ModelKind::Lasso:
      return {{"alpha", 0.01, 0.0, kInf, false}, {"tol", 1e-6, 0.0, kInf, false},
              {"max_iter", 10000, 1, 1e9, true}};
    case ModelKind::ElasticNet:
      return {{"alpha", 0.01, 0.0, kInf, false}, {"l1_ratio", 0.5, 0.0, 1.0, false},
              {"tol", 1e-6, 0.0, kInf, false}, {"max_iter", 10000, 1, 1e9, true}};
    case ModelKind::SGD:
      return {{"learning_rate", 1e-3, 0.0, kInf, false}, {"epochs", 1000, 1, 1e9, true}};
    case ModelKind::DecisionTree:
      return {{"max_depth", 0, 0, 1e6, true}, {"min_samples_split", 2, 2, 1e9, true},
              {"min_samples_leaf", 1, 1, 1e9, true}};
    case ModelKind::RandomForest:
      return {{"n_estimators", 100, 1, 1e6, true}, {"max_features", 0, 0, 1e6, true},
              {"max_depth", 0, 0, 1e6, true}, {"min_samples_split", 2, 2, 1e9, true},
              {"min_samples_leaf", 1, 1, 1e9, true}};
    case ModelKind::GradientBoost:
      return {{"n_estimators", 100, 1, 1e6, true}, {"learning_rate", 0.1, 0.0, 1.0, false},
              {"max_depth", 3, 1, 1e6, true}};
    case ModelKind::AdaBoost:
      return {{"n_estimators", 50, 1, 1e6, true}, {"max_depth", 3, 1, 1e6, true},
              {"learning_rate", 1.0, 0.0, kInf, false}};
    case ModelKind::XGBoostStyle:
      return {{"n_estimators", 100, 1, 1e6, true}, {"learning_rate", 0.3, 0.0, 1.0, false},
              {"lambda", 1.0, 0.0, kInf, false},   {"gamma", 0.0, 0.0, kInf, false},
              {"max_depth", 6, 1, 1e6, true},      {"min_child_weight", 1.0, 0.0, kInf, false}};
    case ModelKind::KNN:
      return {{"k", 5, 1, 1e9, true}};
    case ModelKind::SVR:
      return {{"C", 100.0, 0.0, kInf, false},  {"epsilon", 0.1, 0.0, kInf, false},
              {"gamma", 0.0, 0.0, kInf, false}, {"tol", 1e-3, 0.0, kInf, false},
              {"max_passes", 10000, 1, 1e9, true}};
    case ModelKind::RANSAC:
      return {{"iterations", 100, 1, 1e9, true}, {"min_samples", 0, 0, 1e9, true},
              {"mad_multiplier", 3.0, 0.0, kInf, false}};
    case ModelKind::MLP:
      return {{"hidden_1", 64, 1, 1e6, true},          {"hidden_2", 32, 0, 1e6, true},
              {"learning_rate", 1e-3, 0.0, kInf, false}, {"beta1", 0.9, 0.0, 1.0, false},
              {"beta2", 0.999, 0.0, 1.0, false},         {"epsilon", 1e-8, 0.0, kInf, false},
              {"epochs", 500, 1, 1e9, true}};
  }
  return {};
}

struct KindName {
  ModelKind kind;
  const char* id;
  const char* display;
};

constexpr KindName kNames[] = {
    {ModelKind::Linear, "Linear", "Linear"},
    {ModelKind::Ridge, "Ridge", "Ridge"},
    {ModelKind::Lasso, "Lasso", "Lasso"},
    {ModelKind::ElasticNet, "ElasticNet", "Elastic Net"},
    {ModelKind::SGD, "SGD", "SGD"},
    {ModelKind::DecisionTree, "DecisionTree", "Decision Tree"},
    {ModelKind::RandomForest, "RandomForest", "Random Forest"},
    {ModelKind::GradientBoost, "GradientBoost", "Gradient Boost"},
    {ModelKind::AdaBoost, "AdaBoost", "AdaBoost"},
    {ModelKind::XGBoostStyle, "XGBoostStyle", "XGBoost"},
    {ModelKind::KNN, "KNN", "KNN"},
    {ModelKind::SVR, "SVR", "SVM"},
    {ModelKind::RANSAC, "RANSAC", "RANSAC"},
    {ModelKind::MLP, "MLP", "MLP"},
};

int as_int(double v) { return static_cast<int>(std::lround(v)); }

}  // namespace

std::string_view to_string(ModelKind kind) {
  for (const auto& n : kNames) {
    if (n.kind == kind) return n.id;
  }
  return "?";
}

std::string_view display_name(ModelKind kind) {
  for (const auto& n : kNames) {
    if (n.kind == kind) return n.display;
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (const auto& n : kNames) {
    if (name == n.id) return n.kind;
  }
  fail(ErrorKind::InvalidArgument, "unknown model kind '" + std::string(name) + "'");
}

Hyperparams default_hyperparams(ModelKind kind) {
  Hyperparams out;
  for (const auto& r : rules_for(kind)) out.emplace(r.key, r.value);
  return out;
}

bool requires_standardized_inputs(ModelKind kind) {
  switch (kind) {
    case ModelKind::Lasso:
    case ModelKind::ElasticNet:
    case ModelKind::SGD:
    case ModelKind::KNN:
    case ModelKind::SVR:
    case ModelKind::MLP:
      return true;
    default:
      return false;
  }
}

RegressorSpec RegressorSpec::make(ModelKind kind, std::uint64_t seed) {
  RegressorSpec spec;
  spec.kind = kind;
  spec.hyperparams = default_hyperparams(kind);
  spec.seed = seed;
  spec.standardize_inputs = requires_standardized_inputs(kind);
  return spec;
}

RegressorSpec RegressorSpec::with(const Hyperparams& overrides) const {
  RegressorSpec out = *this;
  for (const auto& [k, v] : overrides) out.hyperparams[k] = v;
  out.validate();
  return out;
}

double RegressorSpec::param(std::string_view key) const {
  const auto it = hyperparams.find(key);
  if (it != hyperparams.end()) return it->second;
  const auto defaults = default_hyperparams(kind);
  const auto d = defaults.find(key);
  if (d == defaults.end()) {
    fail(ErrorKind::InvalidArgument, std::string(to_string(kind)) + " has no hyperparameter '" + std::string(key) + "'");
  }
  return d->second;
}

std::string RegressorSpec::display_label() const { return label.empty() ? std::string(display_name(kind)) : label; }

void RegressorSpec::validate() const {
  const auto rules = rules_for(kind);
  for (const auto& [key, value] : hyperparams) {
    const auto it = std::find_if(rules.begin(), rules.end(), [&](const ParamRule& r) { return key == r.key; });
    if (it == rules.end()) {
      fail(ErrorKind::InvalidArgument, std::string(to_string(kind)) + " has no hyperparameter '" + key + "'");
    }
    if (!std::isfinite(value) || value < it->min || value > it->max || (it->integer && std::round(value) != value)) {
      fail(ErrorKind::InvalidArgument,
           std::string(to_string(kind)) + " hyperparameter '" + key + "' out of range");
    }
  }
  if (requires_standardized_inputs(kind) && !standardize_inputs) {
    fail(ErrorKind::InvalidArgument, std::string(to_string(kind)) + " requires standardized inputs");
  }
}

TrainedRegressor::TrainedRegressor(RegressorSpec spec, std::optional<Standardizer> scaler, FittedState state,
                                   TrainingDiagnostics diagnostics, Eigen::Index n_features)
    : spec_(std::move(spec)),
      scaler_(std::move(scaler)),
      state_(std::move(state)),
      diagnostics_(std::move(diagnostics)),
      n_features_(n_features) {}

Eigen::VectorXd TrainedRegressor::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != n_features_) {
    fail(ErrorKind::DimensionMismatch, "model trained on " + std::to_string(n_features_) + " columns, got " +
                                           std::to_string(x.cols()));
  }
  return detail::predict_all(state_, scaler_ ? scaler_->apply(x) : x);
}

Eigen::VectorXd predict(const TrainedRegressor& model, const Eigen::MatrixXd& x) { return model.predict(x); }

namespace detail {

double predict_row(const FittedState& state, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  struct Visitor {
    const Eigen::Ref<const Eigen::RowVectorXd>& row;
    double operator()(const LinearState& s) const { return row.dot(s.weights) + s.bias; }
    double operator()(const TreeEnsembleState& s) const {
      switch (s.combine) {
        case TreeEnsembleState::Combine::Mean: {
          double sum = 0.0;
          for (const auto& t : s.trees) sum += t.predict(row);
          return sum / static_cast<double>(s.trees.size());
        }
        case TreeEnsembleState::Combine::Sum: {
          double sum = s.base;
          for (const auto& t : s.trees) sum += t.predict(row);
          return sum;
        }
        case TreeEnsembleState::Combine::WeightedMedian: {
          std::vector<std::pair<double, double>> preds;  // (prediction, weight)
          double total = 0.0;
          for (std::size_t i = 0; i < s.trees.size(); ++i) {
            preds.emplace_back(s.trees[i].predict(row), s.tree_weights[i]);
            total += s.tree_weights[i];
          }
          std::stable_sort(preds.begin(), preds.end(),
                           [](const auto& a, const auto& b) { return a.first < b.first; });
          double cumulative = 0.0;
          for (const auto& [p, w] : preds) {
            cumulative += w;
            if (cumulative >= 0.5 * total) return p;
          }
          return preds.back().first;
        }
      }
      return 0.0;
    }
    double operator()(const KnnState& s) const { return knn_predict(s, row); }
    double operator()(const SvrState& s) const { return svr_predict(s, row); }
    double operator()(const MlpState& s) const { return mlp_forward(s, Eigen::MatrixXd(row))(0); }
  };
  return std::visit(Visitor{row}, state);
}

Eigen::VectorXd predict_all(const FittedState& state, const Eigen::MatrixXd& z) {
  if (const auto* mlp = std::get_if<MlpState>(&state)) return mlp_forward(*mlp, z);
  if (const auto* lin = std::get_if<LinearState>(&state)) return (z * lin->weights).array() + lin->bias;
  Eigen::VectorXd out(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) out(i) = predict_row(state, z.row(i));
  return out;
}

}  // namespace detail

TrainedRegressor train(const RegressorSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  spec.validate();
  if (x.rows() < 2) fail(ErrorKind::InvalidArgument, "training needs at least 2 rows");
  if (x.rows() != y.size()) fail(ErrorKind::DimensionMismatch, "x and y row counts differ");
  if (x.cols() < 1) fail(ErrorKind::InvalidArgument, "training needs at least one column");
  if (!x.allFinite() || !y.allFinite()) fail(ErrorKind::InvalidArgument, "training data contains non-finite values");

  std::optional<Standardizer> scaler;
  Eigen::MatrixXd z = x;
  if (spec.standardize_inputs) {
    scaler = Standardizer::fit(x);
    z = scaler->apply(x);
  }

  TrainingDiagnostics diag;
  const auto p = [&](std::string_view key) { return spec.param(key); };
  FittedState state;
  switch (spec.kind) {
    case ModelKind::Linear:
      state = detail::fit_ols(z, y, p("jitter"));
      break;
    case ModelKind::Ridge:
      state = detail::fit_ridge(z, y, p("alpha"));
      break;
    case ModelKind::Lasso:
      state = detail::fit_coordinate_descent(z, y, p("alpha"), 1.0, p("tol"), as_int(p("max_iter")), diag);
      break;
    case ModelKind::ElasticNet:
      state = detail::fit_coordinate_descent(z, y, p("alpha"), p("l1_ratio"), p("tol"), as_int(p("max_iter")), diag);
      break;
    case ModelKind::SGD:
      state = detail::fit_sgd(z, y, p("learning_rate"), as_int(p("epochs")), spec.seed, diag);
      break;
    case ModelKind::DecisionTree: {
      CartParams cart{as_int(p("max_depth")), as_int(p("min_samples_split")), as_int(p("min_samples_leaf")), 0};
      state = detail::fit_decision_tree(z, y, cart);
      break;
    }
    case ModelKind::RandomForest: {
      int max_features = as_int(p("max_features"));
      if (max_features == 0) max_features = std::max(1, static_cast<int>(z.cols()) / 3);
      CartParams cart{as_int(p("max_depth")), as_int(p("min_samples_split")), as_int(p("min_samples_leaf")),
                      max_features};
      state = detail::fit_random_forest(z, y, as_int(p("n_estimators")), cart, spec.seed);
      break;
    }
    case ModelKind::GradientBoost:
      state = detail::fit_gradient_boost(z, y, as_int(p("n_estimators")), p("learning_rate"), as_int(p("max_depth")),
                                         diag);
      break;
    case ModelKind::AdaBoost:
      state = detail::fit_adaboost_r2(z, y, as_int(p("n_estimators")), as_int(p("max_depth")), p("learning_rate"),
                                      spec.seed, diag);
      break;
    case ModelKind::XGBoostStyle: {
      SecondOrderTreeParams tree{as_int(p("max_depth")), p("lambda"), p("gamma"), p("min_child_weight"),
                                 p("learning_rate")};
      state = detail::fit_xgboost_style(z, y, as_int(p("n_estimators")), tree, diag);
      break;
    }
    case ModelKind::KNN:
      state = detail::fit_knn(z, y, as_int(p("k")));
      break;
    case ModelKind::SVR: {
      detail::SvrConfig cfg{p("C"), p("epsilon"), p("gamma"), p("tol"), as_int(p("max_passes"))};
      state = detail::fit_svr(z, y, cfg, diag);
      break;
    }
    case ModelKind::RANSAC: {
      RansacConfig cfg{as_int(p("iterations")), as_int(p("min_samples")), p("mad_multiplier"), spec.seed};
      TrainedRegressor inner = ransac_fit(z, y, cfg);
      state = inner.state();
      diag = inner.diagnostics();
      break;
    }
    case ModelKind::MLP: {
      std::vector<int> hidden{as_int(p("hidden_1"))};
      if (as_int(p("hidden_2")) > 0) hidden.push_back(as_int(p("hidden_2")));
      AdamConfig adam{p("learning_rate"), p("beta1"), p("beta2"), p("epsilon")};
      state = detail::fit_mlp(z, y, hidden, as_int(p("epochs")), adam, spec.seed, diag);
      break;
    }
  }

  const Eigen::VectorXd fitted = detail::predict_all(state, z);
  diag.final_training_loss = (fitted - y).squaredNorm() / static_cast<double>(y.size());
  if (!fitted.allFinite()) fail(ErrorKind::NumericalDivergence, "training produced non-finite predictions");
  return TrainedRegressor(spec, std::move(scaler), std::move(state), std::move(diag), x.cols());
}

// ---------------------------------------------------------------------------
// Serialization
//
// {
//   "format": "cyclelife-model", "version": 1,
//   "spec": {"kind", "label", "seed", "standardize_inputs", "hyperparams": {...}},
//   "n_features": p,
//   "scaler": null | {"mean": [...], "std": [...]},
//   "diagnostics": {"iterations", "final_training_loss", "converged", "inliers": [...]},
//   "state": {"type": "linear" | "trees" | "knn" | "svr" | "mlp", ...}
// }
// Trees are stored as node arrays [feature, threshold, left, right, value].

namespace {

using nlohmann::json;
constexpr const char* kModelFormat = "cyclelife-model";
constexpr int kModelVersion = 1;

json vec_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_to_json(m.row(r).transpose()));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Eigen::MatrixXd mat_from_json(const json& j) {
  Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& data = j.at("data");
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) = vec_from_json(data.at(static_cast<std::size_t>(r))).transpose();
  return m;
}

json tree_to_json(const RegressionTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes()) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  return nodes;
}

RegressionTree tree_from_json(const json& j) {
  std::vector<TreeNode> nodes;
  for (const auto& n : j) {
    nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                     n.at(4).get<double>()});
  }
  return RegressionTree(std::move(nodes));
}

const char* combine_name(TreeEnsembleState::Combine c) {
  switch (c) {
    case TreeEnsembleState::Combine::Mean: return "mean";
    case TreeEnsembleState::Combine::Sum: return "sum";
    case TreeEnsembleState::Combine::WeightedMedian: return "weighted_median";
  }
  return "?";
}

TreeEnsembleState::Combine parse_combine(const std::string& s) {
  if (s == "mean") return TreeEnsembleState::Combine::Mean;
  if (s == "sum") return TreeEnsembleState::Combine::Sum;
  if (s == "weighted_median") return TreeEnsembleState::Combine::WeightedMedian;
  fail(ErrorKind::ParseError, "unknown tree combine rule '" + s + "'");
}

json state_to_json(const FittedState& state) {
  struct Visitor {
    json operator()(const LinearState& s) const {
      return {{"type", "linear"}, {"weights", vec_to_json(s.weights)}, {"bias", s.bias}};
    }
    json operator()(const TreeEnsembleState& s) const {
      json trees = json::array();
      for (const auto& t : s.trees) trees.push_back(tree_to_json(t));
      return {{"type", "trees"},
              {"combine", combine_name(s.combine)},
              {"base", s.base},
              {"tree_weights", s.tree_weights},
              {"trees", trees}};
    }
    json operator()(const KnnState& s) const {
      return {{"type", "knn"}, {"k", s.k}, {"x", mat_to_json(s.x)}, {"y", vec_to_json(s.y)}};
    }
    json operator()(const SvrState& s) const {
      return {{"type", "svr"},
              {"gamma", s.gamma},
              {"bias", s.bias},
              {"coef", vec_to_json(s.coef)},
              {"support", mat_to_json(s.support)}};
    }
    json operator()(const MlpState& s) const {
      return {{"type", "mlp"}, {"layer_sizes", s.layer_sizes}, {"params", vec_to_json(s.params)}};
    }
  };
  return std::visit(Visitor{}, state);
}

FittedState state_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "linear") return LinearState{vec_from_json(j.at("weights")), j.at("bias").get<double>()};
  if (type == "trees") {
    TreeEnsembleState s;
    s.combine = parse_combine(j.at("combine").get<std::string>());
    s.base = j.at("base").get<double>();
    s.tree_weights = j.at("tree_weights").get<std::vector<double>>();
    for (const auto& t : j.at("trees")) s.trees.push_back(tree_from_json(t));
    return s;
  }
  if (type == "knn") return KnnState{mat_from_json(j.at("x")), vec_from_json(j.at("y")), j.at("k").get<int>()};
  if (type == "svr") {
    return SvrState{mat_from_json(j.at("support")), vec_from_json(j.at("coef")), j.at("bias").get<double>(),
                    j.at("gamma").get<double>()};
  }
  if (type == "mlp") return MlpState{j.at("layer_sizes").get<std::vector<int>>(), vec_from_json(j.at("params"))};
  fail(ErrorKind::ParseError, "unknown model state type '" + type + "'");
}

}  // namespace

std::string serialize_model(const TrainedRegressor& model) {
  const auto& spec = model.spec();
  json hp = json::object();
  for (const auto& [k, v] : spec.hyperparams) hp[k] = v;
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["spec"] = {{"kind", std::string(to_string(spec.kind))},
               {"label", spec.label},
               {"seed", spec.seed},
               {"standardize_inputs", spec.standardize_inputs},
               {"hyperparams", hp}};
  j["n_features"] = model.n_features();
  if (model.scaler()) {
    j["scaler"] = {{"mean", vec_to_json(model.scaler()->mean())}, {"std", vec_to_json(model.scaler()->std())}};
  } else {
    j["scaler"] = nullptr;
  }
  const auto& d = model.diagnostics();
  j["diagnostics"] = {{"iterations", d.iterations},
                      {"final_training_loss", d.final_training_loss},
                      {"converged", d.converged},
                      {"inliers", d.inliers}};
  j["state"] = state_to_json(model.state());
  return j.dump(1) + "\n";
}

TrainedRegressor deserialize_model(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kModelFormat) fail(ErrorKind::ParseError, "not a cyclelife model file");
    if (j.at("version").get<int>() != kModelVersion) {
      fail(ErrorKind::SchemaVersionMismatch, "unsupported model version " + j.at("version").dump());
    }
    const auto& js = j.at("spec");
    RegressorSpec spec;
    spec.kind = parse_model_kind(js.at("kind").get<std::string>());
    spec.label = js.at("label").get<std::string>();
    spec.seed = js.at("seed").get<std::uint64_t>();
    spec.standardize_inputs = js.at("standardize_inputs").get<bool>();
    for (const auto& [k, v] : js.at("hyperparams").items()) spec.hyperparams[k] = v.get<double>();
    spec.validate();

    std::optional<Standardizer> scaler;
    if (!j.at("scaler").is_null()) {
      scaler = Standardizer(vec_from_json(j.at("scaler").at("mean")), vec_from_json(j.at("scaler").at("std")));
    }
    TrainingDiagnostics diag;
    const auto& jd = j.at("diagnostics");
    diag.iterations = jd.at("iterations").get<int>();
    diag.final_training_loss = jd.at("final_training_loss").get<double>();
    diag.converged = jd.at("converged").get<bool>();
    diag.inliers = jd.at("inliers").get<std::vector<std::size_t>>();
    return TrainedRegressor(spec, std::move(scaler), state_from_json(j.at("state")), std::move(diag),
                            j.at("n_features").get<Eigen::Index>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("malformed model file: ") + e.what());
  }
}

}  // namespace cyclelife
