// Canonical on-disk dataset layout:
//
//   manifest.json                 schema_version, grid, nominal_capacity, cells[]
//   cells/<id>/summary.csv        cycle,qd_ah,qc_ah,tavg_c,ir_ohm,charge_time_min
//   cells/<id>/qdv_<cycle>.csv    one capacity value per line, grid order
#include <charconv>
#include <cmath>
#include <json.hpp>
#include <string>

#include "cyclelife/core_data.hpp"
#include "cyclelife/error.hpp"
#include "cyclelife/text_io.hpp"

namespace cyclelife {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kSummaryHeader = "cycle,qd_ah,qc_ah,tavg_c,ir_ohm,charge_time_min";

std::vector<CycleSummary> parse_summary(const std::string& contents) {
  std::vector<CycleSummary> rows;
  std::size_t line_no = 0;
  for (const auto raw : text::split(contents, '\n')) {
    const auto line = text::trim(raw);
    ++line_no;
    if (line_no == 1) {
      if (line != kSummaryHeader) fail(ErrorKind::ParseError, "unexpected summary header");
      continue;
    }
    if (line.empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 6) {
      fail(ErrorKind::ParseError, "summary line " + std::to_string(line_no) + " has " +
                                      std::to_string(f.size()) + " fields");
    }
    CycleSummary s;
    s.cycle_index = static_cast<int>(text::parse_int(f[0]));
    s.discharge_capacity = text::parse_double(f[1]);
    s.charge_capacity = text::parse_double(f[2]);
    s.avg_temperature = text::parse_double(f[3]);
    s.internal_resistance = text::parse_double(f[4]);
    s.charge_time = text::parse_double(f[5]);
    rows.push_back(s);
  }
  if (line_no == 0) fail(ErrorKind::ParseError, "empty summary file");
  return rows;
}

std::vector<double> parse_curve(const std::string& contents) {
  std::vector<double> values;
  for (const auto raw : text::split(contents, '\n')) {
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    values.push_back(text::parse_double(line));
  }
  return values;
}

// Returns the cycle number encoded in "qdv_<cycle>.csv", or 0 if the name does not match.
int curve_cycle_from_name(const std::string& name) {
  constexpr std::string_view prefix = "qdv_";
  constexpr std::string_view suffix = ".csv";
  if (name.size() <= prefix.size() + suffix.size() || !name.starts_with(prefix) ||
      !name.ends_with(suffix)) {
    return 0;
  }
  const std::string_view digits(name.data() + prefix.size(), name.size() - prefix.size() - suffix.size());
  int cycle = 0;
  const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), cycle);
  if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size()) return 0;
  return cycle;
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::is_regular_file(manifest_path)) {
    fail(ErrorKind::MissingManifest, "no manifest.json in " + dir.string());
  }

  json manifest;
  try {
    manifest = json::parse(text::read_file(manifest_path));
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("malformed manifest.json: ") + e.what());
  }

  Dataset ds;
  std::vector<Violation> violations;
  try {
    ds.schema_version = manifest.at("schema_version").get<std::string>();
    if (ds.schema_version != kSchemaVersion) {
      fail(ErrorKind::SchemaVersionMismatch, "schema version " + ds.schema_version +
                                                 " is not supported (expected " + kSchemaVersion + ")");
    }
    const auto& g = manifest.at("grid");
    ds.grid.v_min = g.at("v_min").get<double>();
    ds.grid.v_max = g.at("v_max").get<double>();
    ds.grid.points = g.at("points").get<int>();
    const double default_nominal = manifest.value("nominal_capacity", 1.1);
    if (manifest.contains("provenance")) {
      for (const auto& [k, v] : manifest.at("provenance").items()) {
        ds.provenance[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
    }

    for (const auto& entry : manifest.at("cells")) {
      CellRecord cell;
      cell.cell_id = entry.at("id").get<std::string>();
      cell.cycle_life = entry.at("cycle_life").get<int>();
      cell.nominal_capacity = entry.value("nominal_capacity", default_nominal);
      const fs::path cell_dir = dir / "cells" / cell.cell_id;

      const fs::path summary_path = cell_dir / "summary.csv";
      if (!fs::is_regular_file(summary_path)) {
        violations.push_back({cell.cell_id, "missing summary.csv"});
      } else {
        try {
          cell.summaries = parse_summary(text::read_file(summary_path));
        } catch (const Error& e) {
          violations.push_back({cell.cell_id, std::string("malformed summary.csv: ") + e.what()});
        }
      }

      if (fs::is_directory(cell_dir)) {
        for (const auto& file : fs::directory_iterator(cell_dir)) {
          const int cycle = curve_cycle_from_name(file.path().filename().string());
          if (cycle <= 0) continue;
          try {
            cell.curves[cycle] = DischargeCurve{cycle, parse_curve(text::read_file(file.path()))};
          } catch (const Error& e) {
            violations.push_back({cell.cell_id, "malformed curve " + std::to_string(cycle) + ": " + e.what()});
          }
        }
      }
      ds.cells.push_back(std::move(cell));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("malformed manifest.json: ") + e.what());
  }

  try {
    validate_dataset(ds);
  } catch (const ValidationError& e) {
    violations.insert(violations.end(), e.violations().begin(), e.violations().end());
  }
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "cells", ec);
  if (ec) fail(ErrorKind::IoError, "cannot create " + (dir / "cells").string() + ": " + ec.message());

  json manifest;
  manifest["schema_version"] = ds.schema_version;
  manifest["grid"] = {{"v_min", ds.grid.v_min}, {"v_max", ds.grid.v_max}, {"points", ds.grid.points}};
  manifest["nominal_capacity"] = ds.cells.empty() ? 1.1 : ds.cells.front().nominal_capacity;
  manifest["provenance"] = json::object();
  for (const auto& [k, v] : ds.provenance) manifest["provenance"][k] = v;
  manifest["cells"] = json::array();

  for (const auto& cell : ds.cells) {
    manifest["cells"].push_back(
        {{"id", cell.cell_id}, {"cycle_life", cell.cycle_life}, {"nominal_capacity", cell.nominal_capacity}});
    const fs::path cell_dir = dir / "cells" / cell.cell_id;
    fs::create_directories(cell_dir, ec);
    if (ec) fail(ErrorKind::IoError, "cannot create " + cell_dir.string() + ": " + ec.message());

    std::string summary(kSummaryHeader);
    summary += '\n';
    for (const auto& s : cell.summaries) {
      summary += std::to_string(s.cycle_index);
      for (const double v : {s.discharge_capacity, s.charge_capacity, s.avg_temperature,
                             s.internal_resistance, s.charge_time}) {
        summary += ',';
        summary += text::format_double(v);
      }
      summary += '\n';
    }
    text::write_file(cell_dir / "summary.csv", summary);

    for (const auto& [cycle, curve] : cell.curves) {
      std::string body;
      body.reserve(curve.q_at_v.size() * 20);
      for (const double q : curve.q_at_v) {
        body += text::format_double(q);
        body += '\n';
      }
      text::write_file(cell_dir / ("qdv_" + std::to_string(cycle) + ".csv"), body);
    }
  }
  text::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace cyclelife
