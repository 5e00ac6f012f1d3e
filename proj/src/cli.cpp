#include "cyclelife/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <ostream>

#include "cyclelife/config.hpp"
#include "cyclelife/evaluation.hpp"
#include "cyclelife/features.hpp"
#include "cyclelife/parallel.hpp"
#include "cyclelife/sequence.hpp"
#include "cyclelife/text_io.hpp"

namespace cyclelife {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::MissingManifest:
    case ErrorKind::InvalidConfig:
    case ErrorKind::UnsupportedFormat:
    case ErrorKind::IoError:
    case ErrorKind::MissingChannel:
      return kExitUsage;
    default:
      return kExitDataFailure;
  }
}

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
};

void write_output(const fs::path& dir, const std::string& relative, std::string_view contents) {
  const fs::path path = dir / relative;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) fail(ErrorKind::IoError, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  text::write_file(path, contents);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Flags override file values before validation, so the echoed config is what actually ran.
RunConfig load_config(const GlobalFlags& flags) {
  if (flags.config.empty()) fail(ErrorKind::InvalidConfig, "--config is required for this subcommand");
  std::string text;
  try {
    text = text::read_file(flags.config);
  } catch (const Error& e) {
    fail(ErrorKind::InvalidConfig, e.what());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidConfig, flags.config + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::InvalidConfig, flags.config + " must hold a JSON object");
  if (flags.out) j["out"] = *flags.out;
  if (flags.jobs) j["jobs"] = *flags.jobs;
  if (flags.seed) {
    j["seed"] = *flags.seed;
    if (j.contains("split") && j["split"].is_object()) j["split"].erase("seed");
    if (j.contains("models") && j["models"].is_array()) {
      for (auto& m : j["models"]) {
        if (m.is_object()) m.erase("seed");
      }
    }
  }
  return parse_run_config(j.dump());
}

Dataset load_checked(const RunConfig& config) {
  if (config.dataset.empty()) fail(ErrorKind::InvalidConfig, "config has no 'dataset'");
  Dataset ds = load_dataset(config.dataset);
  if (config.dataset_fingerprint && *config.dataset_fingerprint != fingerprint(ds)) {
    fail(ErrorKind::ValidationFailure, "dataset fingerprint " + hex64(fingerprint(ds)) + " does not match the config's " +
                                           hex64(*config.dataset_fingerprint));
  }
  return ds;
}

std::string echo_with_fingerprint(RunConfig config, const Dataset& ds) {
  config.dataset_fingerprint = fingerprint(ds);
  return config_to_json(config);
}

int cmd_validate(const GlobalFlags& flags, const std::string& dataset_arg, std::ostream& out) {
  std::string path = dataset_arg;
  if (path.empty()) {
    if (flags.config.empty()) fail(ErrorKind::InvalidArgument, "validate needs a dataset path or --config");
    path = load_config(flags).dataset;
  }
  try {
    const Dataset ds = load_dataset(path);
    out << "ok: " << ds.cells.size() << " cells, fingerprint " << hex64(fingerprint(ds)) << "\n";
    return kExitOk;
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) out << v.cell_id << ": " << v.rule << "\n";
    return kExitDataFailure;
  }
}

int cmd_features(const std::string& dataset, const std::string& out_csv, bool log_variance, std::ostream& out) {
  const Dataset ds = load_dataset(dataset);
  const std::string csv = features_csv(ds, FeatureOptions{log_variance});
  text::write_file(out_csv, csv);
  out << "wrote " << ds.cells.size() << " rows to " << out_csv << "\n";
  return kExitOk;
}

int cmd_benchmark(const GlobalFlags& flags, std::ostream& out, std::ostream& err) {
  const RunConfig config = load_config(flags);
  parallel::set_max_jobs(config.jobs);
  const Dataset ds = load_checked(config);
  const BenchmarkReport report =
      run_benchmark(ds, config.models, config.groups, config.repeats, config.split, config.features);

  const fs::path dir = config.out;
  write_output(dir, "config_echo.json", echo_with_fingerprint(config, ds));
  for (const auto& file : render_report(report, config.formats)) write_output(dir, file.relative_path, file.contents);
  write_output(dir, "predictions.csv", render_predictions_csv(report));

  out << render_markdown(report);
  for (const auto& e : report.excluded_cells) err << "excluded " << e << "\n";
  return kExitOk;
}

std::string run_name(const SequenceModelSpec& s) {
  std::string name = slug(to_string(s.cell)) + "_h" + std::to_string(s.hidden_size);
  if (s.attention) name += "_attn";
  return name;
}

int cmd_train_sequence(const GlobalFlags& flags, std::ostream& out, std::ostream& err) {
  const RunConfig config = load_config(flags);
  if (!config.sequence) fail(ErrorKind::InvalidConfig, "config has no 'sequence' section");
  parallel::set_max_jobs(config.jobs);
  const SequenceSection& seq = *config.sequence;
  const Dataset ds = load_checked(config);

  const SplitIndices split = split_indices(ds.cells.size(), repeat_policy(config.split, 0));
  const SeriesSet series = build_series(ds, seq.channels, split.train);
  std::vector<SeriesSample> train, test;
  for (const auto i : split.train) train.push_back(series.samples[i]);
  for (const auto i : split.test) test.push_back(series.samples[i]);

  std::vector<SequenceModelSpec> specs;
  for (const auto cell : seq.cells) {
    for (const int h : seq.hidden_sizes) {
      for (const bool attn : seq.attention) {
        specs.push_back({cell, h, attn, static_cast<int>(seq.channels.size()), config.seed});
      }
    }
  }
  TrainRunConfig run;
  run.epochs = seq.epochs;
  run.batch_size = seq.batch_size;
  run.adam = seq.adam;
  run.normalized_targets = seq.normalized_targets;
  run.clip_norm = seq.clip_norm;

  struct Outcome {
    SequenceTrainResult result;
    std::optional<std::string> divergence;
  };
  std::vector<Outcome> outcomes(specs.size());
  parallel::for_each_index(specs.size(), [&](std::size_t k) {
    try {
      outcomes[k].result = train_sequence(specs[k], train, run, test);
    } catch (const DivergenceError& e) {
      outcomes[k].result = e.partial();
      outcomes[k].divergence = e.what();
    }
  });

  const fs::path dir = config.out;
  write_output(dir, "config_echo.json", echo_with_fingerprint(config, ds));
  bool diverged = false;
  out << "Model | Epochs | Train MAPE | Test MAPE\n--- | --- | --- | ---\n";
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto name = run_name(specs[k]);
    const auto& o = outcomes[k];
    write_output(dir, "sequence/" + name + "_history.csv", history_csv(o.result.history));
    if (o.divergence) {
      diverged = true;
      err << name << ": " << *o.divergence << " (partial history saved)\n";
      out << name << " | diverged | - | -\n";
      continue;
    }
    write_output(dir, "sequence/" + name + "_model.json", serialize_sequence_model(o.result.model));
    const auto& last = o.result.history.back();
    char line[160];
    std::snprintf(line, sizeof line, " | %d | %.2f | %.2f\n", last.epoch, last.mape, last.val_mape.value_or(0.0));
    out << name << line;
  }
  return diverged ? kExitDataFailure : kExitOk;
}

int cmd_report(const GlobalFlags& flags, const std::string& run_dir, const std::string& formats_arg, std::ostream& out) {
  std::vector<std::string> formats;
  for (const auto part : text::split(formats_arg, ',')) {
    const auto f = text::trim(part);
    if (!f.empty()) formats.emplace_back(f);
  }
  for (const auto& f : formats) parse_report_format(f);
  if (formats.empty()) return kExitOk;

  const fs::path dir = run_dir;
  const std::string csv = text::read_file(dir / "report.csv");
  const std::string predictions = fs::exists(dir / "predictions.csv") ? text::read_file(dir / "predictions.csv") : "";
  const BenchmarkReport report = report_from_csv(csv, predictions);
  const fs::path out_dir = flags.out ? fs::path(*flags.out) : dir;
  for (const auto& file : render_report(report, formats)) {
    write_output(out_dir, file.relative_path, file.contents);
    if (file.relative_path == "report.md") out << file.contents;
  }
  return kExitOk;
}

int cmd_synth(const GlobalFlags& flags, int cells, int points, std::ostream& out) {
  if (!flags.out) fail(ErrorKind::InvalidArgument, "synth needs --out");
  if (cells < 1) fail(ErrorKind::InvalidArgument, "--cells must be >= 1");
  VoltageGrid grid;
  grid.points = points;
  grid.validate();
  const Dataset ds = generate_synthetic(cells, grid, flags.seed.value_or(0));
  save_dataset(ds, *flags.out);
  out << "wrote " << ds.cells.size() << " synthetic cells to " << *flags.out << ", fingerprint "
      << hex64(fingerprint(ds)) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Battery cycle-life prediction toolkit", "cyclelife"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags flags;
  std::string out_flag;
  std::uint64_t seed_flag = 0;
  unsigned jobs_flag = 1;
  app.add_option("--config", flags.config, "Run config (JSON)");
  auto* out_opt = app.add_option("--out", out_flag, "Output directory (overrides the config)");
  auto* seed_opt = app.add_option("--seed", seed_flag, "Global seed (overrides the config)");
  auto* jobs_opt = app.add_option("--jobs", jobs_flag, "Worker threads; results do not depend on it")
                       ->check(CLI::PositiveNumber);

  std::string dataset_arg, features_out, run_dir, formats_arg = "markdown";
  bool log_variance = false;
  int synth_cells = 124, synth_points = 500;

  auto* validate = app.add_subcommand("validate", "Check a dataset against every structural rule");
  validate->add_option("dataset", dataset_arg, "Dataset directory (defaults to the config's)");

  auto* features = app.add_subcommand("features", "Write the eleven-feature CSV");
  features->add_option("dataset", dataset_arg, "Dataset directory")->required();
  features->add_option("output", features_out, "Output CSV path")->required();
  features->add_flag("--log-variance", log_variance, "Use log10 of the dQ variance");

  auto* benchmark = app.add_subcommand("benchmark", "Run the model x feature-group grid");
  auto* train_seq = app.add_subcommand("train-seq", "Train the recurrent models from the config's sequence section");

  auto* report = app.add_subcommand("report", "Re-render a finished benchmark run");
  report->add_option("run_dir", run_dir, "Benchmark output directory")->required();
  report->add_option("--formats", formats_arg, "Comma-separated: markdown, csv, svg_scatter");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset in the canonical format");
  synth->add_option("--cells", synth_cells, "Number of cells");
  synth->add_option("--points", synth_points, "Voltage grid points");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (*out_opt) flags.out = out_flag;
  if (*seed_opt) flags.seed = seed_flag;
  if (*jobs_opt) flags.jobs = jobs_flag;
  parallel::set_max_jobs(flags.jobs.value_or(1));

  try {
    if (*validate) return cmd_validate(flags, dataset_arg, out);
    if (*features) return cmd_features(dataset_arg, features_out, log_variance, out);
    if (*benchmark) return cmd_benchmark(flags, out, err);
    if (*train_seq) return cmd_train_sequence(flags, out, err);
    if (*report) return cmd_report(flags, run_dir, formats_arg, out);
    if (*synth) return cmd_synth(flags, synth_cells, synth_points, out);
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) err << v.cell_id << ": " << v.rule << "\n";
    return kExitDataFailure;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataFailure;
  }
  return kExitUsage;
}

}  // namespace cyclelife
