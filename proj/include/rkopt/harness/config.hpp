#pragma once

#include "rkopt/error.hpp"
#include "rkopt/harness/text.hpp"
#include "rkopt/model.hpp"
#include "rkopt/optimizers.hpp"
#include "rkopt/tableau.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace rkopt::harness {

/// Flat dotted-key view of a configuration, e.g. {"optimizer.h": "0.003"}.
using Settings = std::map<std::string, std::string>;

enum class DatasetKind { mnist, fashion_mnist, synthetic };
enum class SyntheticKind { quadratic, blobs };

struct SyntheticConfig {
  SyntheticKind kind = SyntheticKind::quadratic;
  std::vector<double> diag{1.0};  // quadratic: D; its length is the dimension
  double init = 1.0;              // quadratic: θ0 = init·(1, ..., 1)
  std::size_t train_n = 512;      // blobs
  std::size_t test_n = 512;       // blobs
  double spread = 0.08;           // blobs
};

struct RunConfig {
  DatasetKind dataset = DatasetKind::synthetic;
  std::filesystem::path data_dir;  // empty: data/<dataset>
  std::size_t train_n = 0;         // 0: whole split
  std::size_t test_n = 0;
  std::uint64_t subset_seed = 0;
  std::size_t batch_size = 0;      // 0: full batch
  bool drop_last = false;
  SyntheticConfig synthetic;
  MlpSpec model;
  std::optional<std::uint64_t> model_init_seed;  // defaults to `seed`
  OptimizerSpec optimizer = OptimizerSpec::with_defaults(Algorithm::vanilla_rk, 0.1);
  std::size_t steps = 100;
  std::size_t eval_every = 10;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs/run";

  std::uint64_t init_seed() const { return model_init_seed.value_or(seed); }
};

inline std::string_view to_string(DatasetKind d) {
  switch (d) {
    case DatasetKind::mnist: return "mnist";
    case DatasetKind::fashion_mnist: return "fashion_mnist";
    case DatasetKind::synthetic: return "synthetic";
  }
  return "unknown";
}

inline DatasetKind parse_dataset(std::string_view s) {
  if (s == "mnist") return DatasetKind::mnist;
  if (s == "fashion_mnist") return DatasetKind::fashion_mnist;
  if (s == "synthetic") return DatasetKind::synthetic;
  throw ConfigError("unknown dataset '" + std::string(s) + "'");
}

/// "rk4", "heun", ... or "rk2:<alpha>" for the second-order family.
inline ButcherTableau parse_tableau(std::string_view s) {
  if (s.starts_with("rk2:")) return make_second_order_family(text::parse_double(s.substr(4), "optimizer.tableau"));
  return make_standard(s);
}

inline std::string tableau_key(const ButcherTableau& t) {
  if (t.name().starts_with("rk2(alpha=")) return "rk2:" + text::format_double(t.b(1));
  return t.name();
}

struct IdxFiles {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};

/// Locates the four standard IDX files in `dir`, preferring .gz.
inline IdxFiles locate_idx_files(const std::filesystem::path& dir) {
  const auto pick = [&](const std::string& stem) {
    for (const auto& candidate : {dir / (stem + ".gz"), dir / stem}) {
      if (std::filesystem::exists(candidate)) return candidate;
    }
    throw ConfigError("missing " + (dir / stem).string() + "[.gz]; try `rkopt fetch-data`");
  };
  return {pick("train-images-idx3-ubyte"), pick("train-labels-idx1-ubyte"), pick("t10k-images-idx3-ubyte"),
          pick("t10k-labels-idx1-ubyte")};
}

inline std::filesystem::path resolved_data_dir(const RunConfig& c) {
  if (!c.data_dir.empty()) return c.data_dir;
  return std::filesystem::path("data") / std::string(to_string(c.dataset));
}

namespace detail {

inline std::vector<double> parse_double_list(std::string_view s, std::string_view what) {
  std::vector<double> out;
  for (const auto& item : text::split(s, ',')) out.push_back(text::parse_double(item, what));
  return out;
}

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

}  // namespace detail

/// Builds a validated RunConfig. Unknown keys and malformed values raise ConfigError.
inline RunConfig config_from_settings(const Settings& settings) {
  RunConfig c;
  std::set<std::string> used;
  const auto get = [&](const std::string& key) -> const std::string* {
    auto it = settings.find(key);
    if (it == settings.end()) return nullptr;
    used.insert(key);
    return &it->second;
  };
  const auto num = [&](const std::string& key, auto& field) {
    if (const auto* v = get(key)) field = text::parse_double(*v, key);
  };
  const auto uint = [&](const std::string& key, auto& field) {
    if (const auto* v = get(key)) field = static_cast<std::remove_reference_t<decltype(field)>>(text::parse_uint(*v, key));
  };

  try {
    if (const auto* v = get("dataset")) c.dataset = parse_dataset(*v);
    if (const auto* v = get("data.dir")) c.data_dir = *v;
    uint("data.train_n", c.train_n);
    uint("data.test_n", c.test_n);
    uint("data.subset_seed", c.subset_seed);
    uint("data.batch_size", c.batch_size);
    if (const auto* v = get("data.drop_last")) c.drop_last = text::parse_bool(*v, "data.drop_last");

    if (const auto* v = get("synthetic.kind")) {
      if (*v == "quadratic") c.synthetic.kind = SyntheticKind::quadratic;
      else if (*v == "blobs") c.synthetic.kind = SyntheticKind::blobs;
      else throw ConfigError("unknown synthetic.kind '" + *v + "'");
    }
    if (const auto* v = get("synthetic.diag")) c.synthetic.diag = detail::parse_double_list(*v, "synthetic.diag");
    num("synthetic.init", c.synthetic.init);
    uint("synthetic.train_n", c.synthetic.train_n);
    uint("synthetic.test_n", c.synthetic.test_n);
    num("synthetic.spread", c.synthetic.spread);

    if (const auto* v = get("model.widths")) {
      c.model.layer_widths.clear();
      for (const auto& w : text::split(*v, ',')) {
        c.model.layer_widths.push_back(static_cast<int>(text::parse_uint(w, "model.widths")));
      }
    }
    if (const auto* v = get("model.activation")) c.model.activation = parse_activation(*v);
    if (const auto* v = get("model.init_seed")) c.model_init_seed = text::parse_uint(*v, "model.init_seed");

    Algorithm algo = Algorithm::vanilla_rk;
    if (const auto* v = get("optimizer.algorithm")) algo = parse_algorithm(*v);
    OptimizerSpec& o = c.optimizer;
    o = OptimizerSpec{};
    o.algorithm = algo;
    num("optimizer.h", o.h);
    if (const auto* v = get("optimizer.tableau")) o.tableau = parse_tableau(*v);
    if (const auto* v = get("optimizer.beta")) o.beta = text::parse_double(*v, "optimizer.beta");
    const auto* b1 = get("optimizer.beta1");
    const auto* b2 = get("optimizer.beta2");
    const auto* eps = get("optimizer.eps");
    if (b1 || b2 || eps) {
      AdamParams p;
      if (b1) p.beta1 = text::parse_double(*b1, "optimizer.beta1");
      if (b2) p.beta2 = text::parse_double(*b2, "optimizer.beta2");
      if (eps) p.eps = text::parse_double(*eps, "optimizer.eps");
      o.adam = p;
    }
    if (const auto* v = get("optimizer.adagrad_eps")) o.adagrad_eps = text::parse_double(*v, "optimizer.adagrad_eps");
    const char* dal_keys[] = {"optimizer.dal.p", "optimizer.dal.c", "optimizer.dal.hvp", "optimizer.dal.delta",
                              "optimizer.dal.fallback_h"};
    bool any_dal = false;
    for (const char* k : dal_keys) any_dal = any_dal || settings.count(k);
    if (any_dal) {
      DalConfig d;
      num("optimizer.dal.p", d.p);
      num("optimizer.dal.c", d.c);
      num("optimizer.dal.delta", d.delta);
      num("optimizer.dal.fallback_h", d.fallback_h);
      if (const auto* v = get("optimizer.dal.hvp")) {
        if (*v == "exact") d.hvp_method = HvpMethod::exact;
        else if (*v == "finite_diff") d.hvp_method = HvpMethod::finite_diff;
        else throw ConfigError("optimizer.dal.hvp must be exact or finite_diff");
      }
      o.dal = d;
    }
    if (const auto* v = get("optimizer.schedule")) {
      if (*v == "constant") o.schedule = LrSchedule::constant;
      else if (*v == "cosine") o.schedule = LrSchedule::cosine;
      else throw ConfigError("optimizer.schedule must be constant or cosine");
    }
    // Required-but-absent fields take the algorithm defaults.
    const OptimizerSpec defaults = OptimizerSpec::with_defaults(algo, o.h);
    if (!o.tableau && defaults.tableau) o.tableau = defaults.tableau;
    if (!o.beta && defaults.beta) o.beta = defaults.beta;
    if (!o.adam && defaults.adam) o.adam = defaults.adam;
    if (!o.dal && defaults.dal) o.dal = defaults.dal;
    if (!o.adagrad_eps && defaults.adagrad_eps) o.adagrad_eps = defaults.adagrad_eps;

    uint("steps", c.steps);
    uint("eval_every", c.eval_every);
    uint("seed", c.seed);
    if (const auto* v = get("out_dir")) c.out_dir = *v;

    o.validate();
    c.model.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  for (const auto& [key, value] : settings) {
    if (!used.count(key)) throw UnknownKeyError("unknown configuration key '" + key + "'");
  }
  if (c.steps == 0) throw ConfigError("steps must be positive");
  if (c.eval_every == 0) throw ConfigError("eval_every must be positive");
  if (c.steps < c.eval_every) throw ConfigError("steps must be >= eval_every");
  if (c.dataset == DatasetKind::synthetic && c.synthetic.kind == SyntheticKind::quadratic) {
    if (c.synthetic.diag.empty()) throw ConfigError("synthetic.diag must not be empty");
    for (double d : c.synthetic.diag) {
      if (!(d > 0.0)) throw ConfigError("synthetic.diag entries must be positive");
    }
  }
  c.model.init_seed = c.init_seed();
  return c;
}

/// Normalized settings; config_from_settings(to_settings(c)) reproduces c.
inline Settings to_settings(const RunConfig& c) {
  using text::format_double;
  Settings s;
  s["dataset"] = to_string(c.dataset);
  if (!c.data_dir.empty()) s["data.dir"] = c.data_dir.string();
  s["data.train_n"] = std::to_string(c.train_n);
  s["data.test_n"] = std::to_string(c.test_n);
  s["data.subset_seed"] = std::to_string(c.subset_seed);
  s["data.batch_size"] = std::to_string(c.batch_size);
  s["data.drop_last"] = c.drop_last ? "true" : "false";
  s["synthetic.kind"] = c.synthetic.kind == SyntheticKind::quadratic ? "quadratic" : "blobs";
  std::vector<std::string> diag;
  for (double d : c.synthetic.diag) diag.push_back(format_double(d));
  s["synthetic.diag"] = detail::join(diag);
  s["synthetic.init"] = format_double(c.synthetic.init);
  s["synthetic.train_n"] = std::to_string(c.synthetic.train_n);
  s["synthetic.test_n"] = std::to_string(c.synthetic.test_n);
  s["synthetic.spread"] = format_double(c.synthetic.spread);
  std::vector<std::string> widths;
  for (int w : c.model.layer_widths) widths.push_back(std::to_string(w));
  s["model.widths"] = detail::join(widths);
  s["model.activation"] = to_string(c.model.activation);
  if (c.model_init_seed) s["model.init_seed"] = std::to_string(*c.model_init_seed);

  const auto& o = c.optimizer;
  s["optimizer.algorithm"] = to_string(o.algorithm);
  s["optimizer.h"] = format_double(o.h);
  if (o.tableau) s["optimizer.tableau"] = tableau_key(*o.tableau);
  if (o.beta) s["optimizer.beta"] = format_double(*o.beta);
  if (o.adam) {
    s["optimizer.beta1"] = format_double(o.adam->beta1);
    s["optimizer.beta2"] = format_double(o.adam->beta2);
    s["optimizer.eps"] = format_double(o.adam->eps);
  }
  if (o.adagrad_eps) s["optimizer.adagrad_eps"] = format_double(*o.adagrad_eps);
  if (o.dal) {
    s["optimizer.dal.p"] = format_double(o.dal->p);
    s["optimizer.dal.c"] = format_double(o.dal->c);
    s["optimizer.dal.hvp"] = o.dal->hvp_method == HvpMethod::exact ? "exact" : "finite_diff";
    s["optimizer.dal.delta"] = format_double(o.dal->delta);
    s["optimizer.dal.fallback_h"] = format_double(o.dal->fallback_h);
  }
  s["optimizer.schedule"] = o.schedule == LrSchedule::constant ? "constant" : "cosine";
  s["steps"] = std::to_string(c.steps);
  s["eval_every"] = std::to_string(c.eval_every);
  s["seed"] = std::to_string(c.seed);
  s["out_dir"] = c.out_dir.string();
  return s;
}

namespace detail {

inline void flatten_json(const nlohmann::json& j, const std::string& prefix, Settings& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten_json(v, prefix.empty() ? k : prefix + "." + k, out);
    return;
  }
  if (prefix.empty()) throw ConfigError("JSON configuration must be an object");
  if (j.is_string()) {
    out[prefix] = j.get<std::string>();
  } else if (j.is_array()) {
    std::vector<std::string> items;
    for (const auto& e : j) items.push_back(e.is_string() ? e.get<std::string>() : e.dump());
    out[prefix] = join(items);
  } else {
    out[prefix] = j.dump();
  }
}

}  // namespace detail

/// key = value lines with optional [section] headers (keys inside become
/// section.key); '#' and ';' start comment lines. Text starting with '{' is
/// read as JSON with nested objects flattened to dotted keys.
inline Settings parse_settings(std::string_view text_in) {
  Settings out;
  const auto body = text::trim(text_in);
  if (body.starts_with("{")) {
    try {
      detail::flatten_json(nlohmann::json::parse(body), "", out);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid JSON configuration: ") + e.what());
    }
    return out;
  }
  std::string section;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(text_in, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      section = std::string(text::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    std::string key(text::trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    out[key] = std::string(text::trim(line.substr(eq + 1)));
  }
  return out;
}

inline Settings load_settings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_settings(ss.str());
}

inline std::string render_settings(const Settings& s) {
  std::string out;
  for (const auto& [k, v] : s) out += k + " = " + v + "\n";
  return out;
}

}  // namespace rkopt::harness
