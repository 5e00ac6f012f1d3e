#include "cyclelife/config.hpp"

#include <json.hpp>
#include <set>

#include "cyclelife/error.hpp"
#include "cyclelife/evaluation.hpp"

namespace cyclelife {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  fail(ErrorKind::InvalidConfig, where + ": " + what);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) bad(where, "unknown key '" + k + "'");
  }
}

template <typename T>
T get(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    bad(where, "wrong type (" + std::string(j.type_name()) + ")");
  }
}

int get_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) bad(where, "expected an integer");
  return j.get<int>();
}

std::uint64_t get_seed(const json& j, const std::string& where) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    bad(where, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

template <typename T, typename Parse>
std::vector<T> get_list(const json& j, const std::string& where, Parse parse) {
  if (!j.is_array()) bad(where, "expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    try {
      out.push_back(parse(j[i], at));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InvalidConfig) throw;
      bad(at, e.what());
    }
  }
  return out;
}

SplitPolicy parse_split(const json& j, std::uint64_t seed) {
  only_keys(j, "split", {"kind", "test_fraction", "seed"});
  SplitPolicy p;
  p.seed = seed;
  if (j.contains("kind")) {
    const auto kind = get<std::string>(j["kind"], "split.kind");
    if (kind == "random_fraction") p.kind = SplitPolicy::Kind::RandomFraction;
    else if (kind == "index_parity") p.kind = SplitPolicy::Kind::IndexParity;
    else bad("split.kind", "expected random_fraction or index_parity, got '" + kind + "'");
  }
  if (j.contains("test_fraction")) p.test_fraction = get<double>(j["test_fraction"], "split.test_fraction");
  if (!(p.test_fraction > 0.0 && p.test_fraction < 1.0)) bad("split.test_fraction", "must lie in (0, 1)");
  if (j.contains("seed")) p.seed = get_seed(j["seed"], "split.seed");
  return p;
}

RegressorSpec parse_model(const json& j, const std::string& where, std::uint64_t seed) {
  if (j.is_string()) return RegressorSpec::make(parse_model_kind(j.get<std::string>()), seed);
  only_keys(j, where, {"kind", "label", "hyperparams", "seed", "standardize_inputs"});
  if (!j.contains("kind")) bad(where, "missing 'kind'");
  RegressorSpec spec = RegressorSpec::make(parse_model_kind(get<std::string>(j["kind"], where + ".kind")), seed);
  if (j.contains("label")) spec.label = get<std::string>(j["label"], where + ".label");
  if (j.contains("seed")) spec.seed = get_seed(j["seed"], where + ".seed");
  if (j.contains("standardize_inputs")) {
    spec.standardize_inputs = get<bool>(j["standardize_inputs"], where + ".standardize_inputs");
  }
  if (j.contains("hyperparams")) {
    const auto& h = j["hyperparams"];
    if (!h.is_object()) bad(where + ".hyperparams", "expected an object");
    for (const auto& [k, v] : h.items()) {
      if (!v.is_number()) bad(where + ".hyperparams." + k, "expected a number");
      spec.hyperparams[k] = v.get<double>();
    }
  }
  spec.validate();
  return spec;
}

SequenceSection parse_sequence(const json& j) {
  only_keys(j, "sequence", {"cells", "hidden_sizes", "attention", "channels", "epochs", "batch_size", "learning_rate",
                            "beta1", "beta2", "epsilon", "normalized_targets", "clip_norm"});
  SequenceSection s;
  if (j.contains("cells")) {
    s.cells = get_list<CellKind>(j["cells"], "sequence.cells",
                                 [](const json& v, const std::string& at) { return parse_cell_kind(get<std::string>(v, at)); });
  }
  if (j.contains("hidden_sizes")) {
    s.hidden_sizes = get_list<int>(j["hidden_sizes"], "sequence.hidden_sizes", [](const json& v, const std::string& at) {
      const int h = get_int(v, at);
      if (h < 1) bad(at, "hidden size must be >= 1");
      return h;
    });
  }
  if (j.contains("attention")) {
    s.attention = get_list<bool>(j["attention"], "sequence.attention",
                                 [](const json& v, const std::string& at) { return get<bool>(v, at); });
  }
  if (j.contains("channels")) {
    s.channels = get_list<Channel>(j["channels"], "sequence.channels", [](const json& v, const std::string& at) {
      return parse_channel(get<std::string>(v, at));
    });
  }
  if (s.cells.empty() || s.hidden_sizes.empty() || s.attention.empty() || s.channels.empty()) {
    bad("sequence", "cells, hidden_sizes, attention and channels must be non-empty");
  }
  if (j.contains("epochs")) s.epochs = get_int(j["epochs"], "sequence.epochs");
  if (j.contains("batch_size")) s.batch_size = get_int(j["batch_size"], "sequence.batch_size");
  if (s.epochs < 1) bad("sequence.epochs", "must be >= 1");
  if (s.batch_size < 1) bad("sequence.batch_size", "must be >= 1");
  if (j.contains("learning_rate")) s.adam.learning_rate = get<double>(j["learning_rate"], "sequence.learning_rate");
  if (j.contains("beta1")) s.adam.beta1 = get<double>(j["beta1"], "sequence.beta1");
  if (j.contains("beta2")) s.adam.beta2 = get<double>(j["beta2"], "sequence.beta2");
  if (j.contains("epsilon")) s.adam.epsilon = get<double>(j["epsilon"], "sequence.epsilon");
  if (!(s.adam.learning_rate > 0.0)) bad("sequence.learning_rate", "must be > 0");
  if (!(s.adam.beta1 >= 0.0 && s.adam.beta1 < 1.0) || !(s.adam.beta2 >= 0.0 && s.adam.beta2 < 1.0)) {
    bad("sequence", "Adam betas must lie in [0, 1)");
  }
  if (!(s.adam.epsilon > 0.0)) bad("sequence.epsilon", "must be > 0");
  if (j.contains("normalized_targets")) {
    s.normalized_targets = get<bool>(j["normalized_targets"], "sequence.normalized_targets");
  }
  if (j.contains("clip_norm") && !j["clip_norm"].is_null()) {
    s.clip_norm = get<double>(j["clip_norm"], "sequence.clip_norm");
    if (!(*s.clip_norm > 0.0)) bad("sequence.clip_norm", "must be > 0");
  }
  return s;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(j, "config", {"dataset", "out", "seed", "jobs", "split", "repeats", "feature_groups", "features", "models",
                          "formats", "sequence", "dataset_fingerprint"});
  RunConfig c;
  if (j.contains("dataset")) c.dataset = get<std::string>(j["dataset"], "dataset");
  if (j.contains("out")) c.out = get<std::string>(j["out"], "out");
  if (c.out.empty()) bad("out", "must not be empty");
  if (j.contains("seed")) c.seed = get_seed(j["seed"], "seed");
  if (j.contains("jobs")) {
    const int jobs = get_int(j["jobs"], "jobs");
    if (jobs < 1) bad("jobs", "must be >= 1");
    c.jobs = static_cast<unsigned>(jobs);
  }
  c.split = parse_split(j.contains("split") ? j["split"] : json::object(), c.seed);
  if (j.contains("repeats")) c.repeats = get_int(j["repeats"], "repeats");
  if (c.repeats < 1) bad("repeats", "must be >= 1");
  if (j.contains("feature_groups")) {
    c.groups = get_list<FeatureGroup>(j["feature_groups"], "feature_groups", [](const json& v, const std::string& at) {
      return parse_feature_group(get<std::string>(v, at));
    });
    if (c.groups.empty()) bad("feature_groups", "must be non-empty");
  }
  if (j.contains("features")) {
    only_keys(j["features"], "features", {"log_variance"});
    if (j["features"].contains("log_variance")) {
      c.features.log_variance = get<bool>(j["features"]["log_variance"], "features.log_variance");
    }
  }
  if (j.contains("models")) {
    c.models = get_list<RegressorSpec>(j["models"], "models", [&](const json& v, const std::string& at) {
      return parse_model(v, at, c.seed);
    });
    if (c.models.empty()) bad("models", "must be non-empty");
  } else {
    for (const auto k : kAllModelKinds) c.models.push_back(RegressorSpec::make(k, c.seed));
  }
  std::set<std::string> labels;
  for (const auto& m : c.models) {
    if (!labels.insert(m.display_label()).second) bad("models", "duplicate model label '" + m.display_label() + "'");
  }
  if (j.contains("formats")) {
    c.formats = get_list<std::string>(j["formats"], "formats", [](const json& v, const std::string& at) {
      auto f = get<std::string>(v, at);
      parse_report_format(f);
      return f;
    });
  }
  if (j.contains("sequence") && !j["sequence"].is_null()) c.sequence = parse_sequence(j["sequence"]);
  if (j.contains("dataset_fingerprint")) {
    const auto text = get<std::string>(j["dataset_fingerprint"], "dataset_fingerprint");
    try {
      std::size_t used = 0;
      c.dataset_fingerprint = std::stoull(text, &used, 16);
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      bad("dataset_fingerprint", "expected a hexadecimal string");
    }
  }
  return c;
}

std::string config_to_json(const RunConfig& c) {
  json j = json::object();
  j["dataset"] = c.dataset;
  j["out"] = c.out;
  j["seed"] = c.seed;
  j["split"] = {{"kind", c.split.kind == SplitPolicy::Kind::RandomFraction ? "random_fraction" : "index_parity"},
                {"test_fraction", c.split.test_fraction},
                {"seed", c.split.seed}};
  j["repeats"] = c.repeats;
  j["feature_groups"] = json::array();
  for (const auto g : c.groups) j["feature_groups"].push_back(std::string(to_string(g)));
  j["features"] = {{"log_variance", c.features.log_variance}};
  j["models"] = json::array();
  for (const auto& m : c.models) {
    json jm = {{"kind", std::string(to_string(m.kind))},
               {"seed", m.seed},
               {"standardize_inputs", m.standardize_inputs},
               {"hyperparams", json::object()}};
    if (!m.label.empty()) jm["label"] = m.label;
    for (const auto& [k, v] : m.hyperparams) jm["hyperparams"][k] = v;
    j["models"].push_back(jm);
  }
  j["formats"] = c.formats;
  if (c.sequence) {
    const auto& s = *c.sequence;
    json js;
    js["cells"] = json::array();
    for (const auto k : s.cells) js["cells"].push_back(std::string(to_string(k)));
    js["hidden_sizes"] = s.hidden_sizes;
    js["attention"] = s.attention;
    js["channels"] = json::array();
    for (const auto ch : s.channels) js["channels"].push_back(std::string(to_string(ch)));
    js["epochs"] = s.epochs;
    js["batch_size"] = s.batch_size;
    js["learning_rate"] = s.adam.learning_rate;
    js["beta1"] = s.adam.beta1;
    js["beta2"] = s.adam.beta2;
    js["epsilon"] = s.adam.epsilon;
    js["normalized_targets"] = s.normalized_targets;
    js["clip_norm"] = s.clip_norm ? json(*s.clip_norm) : json(nullptr);
    j["sequence"] = js;
  }
  if (c.dataset_fingerprint) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(*c.dataset_fingerprint));
    j["dataset_fingerprint"] = buf;
  }
  return j.dump(2) + "\n";
}

}  // namespace cyclelife
