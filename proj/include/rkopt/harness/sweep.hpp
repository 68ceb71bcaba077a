#pragma once

#include "rkopt/error.hpp"
#include "rkopt/harness/config.hpp"
#include "rkopt/harness/run.hpp"
#include "rkopt/harness/text.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace rkopt::harness {

/// Ordered axes: each key maps to the values it takes.
using Grid = std::vector<std::pair<std::string, std::vector<std::string>>>;

/// Shorthand grid keys.
inline std::string canonical_grid_key(const std::string& key) {
  if (key == "lr" || key == "h") return "optimizer.h";
  return key;
}

/// `key = v1, v2, ...` lines, or a JSON object of lists (nested objects give
/// dotted keys). Values containing commas, such as model.widths, need the
/// JSON form.
inline Grid parse_grid(std::string_view text_in) {
  Grid grid;
  const auto add = [&](std::string key, std::vector<std::string> values) {
    key = canonical_grid_key(key);
    if (values.empty()) throw ConfigError("grid axis '" + key + "' has no values");
    for (const auto& [k, v] : grid) {
      if (k == key) throw ConfigError("grid axis '" + key + "' given twice");
    }
    grid.emplace_back(std::move(key), std::move(values));
  };
  const auto body = text::trim(text_in);
  if (body.starts_with("{")) {
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(body);
    } catch (const nlohmann::ordered_json::exception& e) {
      throw ConfigError(std::string("invalid JSON grid: ") + e.what());
    }
    const auto walk = [&](auto&& self, const nlohmann::ordered_json& node, const std::string& prefix) -> void {
      if (node.is_object()) {
        for (const auto& [k, v] : node.items()) self(self, v, prefix.empty() ? k : prefix + "." + k);
        return;
      }
      std::vector<std::string> values;
      const auto str = [](const nlohmann::ordered_json& e) { return e.is_string() ? e.get<std::string>() : e.dump(); };
      if (node.is_array()) {
        for (const auto& e : node) values.push_back(str(e));
      } else {
        values.push_back(str(node));
      }
      add(prefix, std::move(values));
    };
    walk(walk, j, "");
    return grid;
  }
  for (const auto& [key, value] : parse_settings(text_in)) add(key, text::split(value, ','));
  return grid;
}

inline Grid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read grid " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_grid(ss.str());
}

/// Cartesian product in row-major order (last axis fastest). An empty grid
/// yields one empty assignment.
inline std::vector<Settings> expand_grid(const Grid& grid) {
  std::vector<Settings> out{Settings{}};
  for (const auto& [key, values] : grid) {
    std::vector<Settings> next;
    next.reserve(out.size() * values.size());
    for (const auto& partial : out) {
      for (const auto& v : values) {
        auto s = partial;
        s[key] = v;
        next.push_back(std::move(s));
      }
    }
    out = std::move(next);
  }
  return out;
}

enum class SweepStatus { ok, diverged, error };

inline std::string_view to_string(SweepStatus s) {
  switch (s) {
    case SweepStatus::ok: return "ok";
    case SweepStatus::diverged: return "diverged";
    case SweepStatus::error: return "error";
  }
  return "error";
}

struct SweepRow {
  std::size_t index = 0;
  Settings assignment;  // grid values for this point
  SweepStatus status = SweepStatus::ok;
  std::string message;
  RunSummary summary;
};

struct SweepGroup {
  Settings assignment;  // grid values other than seed
  std::size_t n = 0;
  double mean_best_test_acc = 0.0;
  double stderr_best_test_acc = 0.0;  // sample sd / √n; 0 when n = 1
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepGroup> groups;
  std::filesystem::path table_path;
  std::filesystem::path summary_path;
};

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace detail

/// Groups rows that finished (ok or diverged) by every grid axis except seed.
inline std::vector<SweepGroup> summarize(const Grid& grid, const std::vector<SweepRow>& rows) {
  std::map<Settings, std::vector<double>> by_group;
  std::vector<Settings> order;
  for (const auto& row : rows) {
    if (row.status == SweepStatus::error) continue;
    Settings key;
    for (const auto& [axis, values] : grid) {
      if (axis != "seed") key[axis] = row.assignment.at(axis);
    }
    auto [it, inserted] = by_group.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(row.summary.best_test_acc);
  }
  std::vector<SweepGroup> groups;
  for (const auto& key : order) {
    const auto& xs = by_group.at(key);
    SweepGroup g;
    g.assignment = key;
    g.n = xs.size();
    double sum = 0.0;
    for (double x : xs) sum += x;
    g.mean_best_test_acc = sum / static_cast<double>(g.n);
    if (g.n > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - g.mean_best_test_acc) * (x - g.mean_best_test_acc);
      g.stderr_best_test_acc = std::sqrt(ss / static_cast<double>(g.n - 1)) / std::sqrt(static_cast<double>(g.n));
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

/// Runs every grid point (each in <out_dir>/run_<index>) on `jobs` threads.
/// Writes <out_dir>/sweep.csv and <out_dir>/sweep_summary.csv. Failures are
/// recorded in their row and do not stop the sweep. Each run uses the seed
/// from its own settings, so runs differing only in h share an initialization.
inline SweepResult sweep(const Settings& base, const Grid& grid, unsigned jobs = 1) {
  const RunConfig base_config = config_from_settings(base);
  const std::filesystem::path root = base_config.out_dir;
  const auto points = expand_grid(grid);

  // Unknown keys break every point and abort; other config errors are per-row.
  std::vector<std::optional<RunConfig>> configs(points.size());
  std::vector<std::string> config_errors(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    Settings s = base;
    for (const auto& [k, v] : points[i]) s[k] = v;
    s["out_dir"] = (root / ("run_" + std::to_string(i))).string();
    try {
      configs[i] = config_from_settings(s);
    } catch (const UnknownKeyError&) {
      throw;
    } catch (const ConfigError& e) {
      config_errors[i] = e.what();
    }
  }

  SweepResult result;
  result.rows.resize(points.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      SweepRow& row = result.rows[i];
      row.index = i;
      row.assignment = points[i];
      if (!configs[i]) {
        row.status = SweepStatus::error;
        row.message = config_errors[i];
        continue;
      }
      try {
        row.summary = run(*configs[i]);
        row.status = row.summary.diverged ? SweepStatus::diverged : SweepStatus::ok;
        row.message = row.summary.message;
      } catch (const std::exception& e) {
        row.status = SweepStatus::error;
        row.message = e.what();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, points.size()))));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
  }

  std::filesystem::create_directories(root);
  result.table_path = root / "sweep.csv";
  {
    std::ofstream out(result.table_path);
    out << "run";
    for (const auto& [axis, values] : grid) out << ',' << detail::csv_field(axis);
    out << ",status,best_test_acc,best_step,final_train_loss,final_test_loss,csv_path,message\n";
    for (const auto& row : result.rows) {
      out << row.index;
      for (const auto& [axis, values] : grid) out << ',' << detail::csv_field(row.assignment.at(axis));
      out << ',' << to_string(row.status) << ',' << text::format_double(row.summary.best_test_acc) << ','
          << row.summary.best_step << ',' << text::format_double(row.summary.final_train_loss) << ','
          << text::format_double(row.summary.final_test_loss) << ','
          << detail::csv_field(row.summary.csv_path.string()) << ',' << detail::csv_field(row.message) << '\n';
    }
  }
  result.groups = summarize(grid, result.rows);
  result.summary_path = root / "sweep_summary.csv";
  {
    std::ofstream out(result.summary_path);
    bool first = true;
    for (const auto& [axis, values] : grid) {
      if (axis == "seed") continue;
      out << (first ? "" : ",") << detail::csv_field(axis);
      first = false;
    }
    out << (first ? "" : ",") << "n,mean_best_test_acc,stderr_best_test_acc\n";
    for (const auto& g : result.groups) {
      for (const auto& [axis, values] : grid) {
        if (axis != "seed") out << detail::csv_field(g.assignment.at(axis)) << ',';
      }
      out << g.n << ',' << text::format_double(g.mean_best_test_acc) << ','
          << text::format_double(g.stderr_best_test_acc) << '\n';
    }
  }
  return result;
}

}  // namespace rkopt::harness
