#include "fetch.hpp"

#include "rkopt/harness/config.hpp"
#include "rkopt/harness/run.hpp"
#include "rkopt/harness/sweep.hpp"
#include "rkopt/harness/verify.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>
#include <thread>

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kDiverged = 3, kVerifyFailed = 4 };

using namespace rkopt;
using namespace rkopt::harness;

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out) {
  Settings s = load_settings(config_path);
  if (seed) s["seed"] = std::to_string(*seed);
  if (!out.empty()) s["out_dir"] = out;
  const RunConfig c = config_from_settings(s);
  const RunSummary r = run(c);
  std::cout << "csv              " << r.csv_path.string() << '\n'
            << "steps            " << r.steps_completed << '\n'
            << "best_test_acc    " << text::format_double(r.best_test_acc) << " (step " << r.best_step << ")\n"
            << "final_train_loss " << text::format_double(r.final_train_loss) << '\n'
            << "final_test_loss  " << text::format_double(r.final_test_loss) << '\n';
  if (r.diverged) {
    std::cerr << "diverged: " << r.message << '\n';
    return kDiverged;
  }
  return kOk;
}

int cmd_sweep(const std::string& config_path, const std::string& grid_path, unsigned jobs) {
  const Settings base = load_settings(config_path);
  const Grid grid = load_grid(grid_path);
  const SweepResult r = sweep(base, grid, jobs);
  bool any_error = false, any_diverged = false;
  for (const auto& row : r.rows) {
    std::cout << "run_" << row.index << ' ' << to_string(row.status) << " best_test_acc="
              << text::format_double(row.summary.best_test_acc);
    if (!row.message.empty()) std::cout << " (" << row.message << ')';
    std::cout << '\n';
    any_error = any_error || row.status == SweepStatus::error;
    any_diverged = any_diverged || row.status == SweepStatus::diverged;
  }
  std::cout << "table   " << r.table_path.string() << '\n' << "summary " << r.summary_path.string() << '\n';
  if (any_error) return kConfig;
  return any_diverged ? kDiverged : kOk;
}

int cmd_verify() {
  const OrderReport r = verify_orders();
  print_report(r, std::cout);
  return r.all_pass() ? kOk : kVerifyFailed;
}

int cmd_fetch(const std::string& dataset, const std::string& dir, const std::string& base_url) {
  auto source = fetch::source_for(dataset);
  if (!base_url.empty()) source.base_url = base_url;
  fetch::fetch_dataset(source, dir, std::cout);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runge-Kutta optimizer experiments"};
  app.require_subcommand(1);

  std::string config_path, grid_path, out_dir, dataset, data_dir, base_url;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;

  auto* run_cmd = app.add_subcommand("run", "Train one configuration");
  run_cmd->add_option("--config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed, "Override seed");
  run_cmd->add_option("--out", out_dir, "Override out_dir");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run the Cartesian product of a grid");
  sweep_cmd->add_option("--config", config_path, "Base configuration file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--grid", grid_path, "Grid file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--jobs", jobs, "Concurrent runs")->default_val(std::max(1u, std::thread::hardware_concurrency()));

  auto* verify_cmd = app.add_subcommand("verify-orders", "Fit one-step error slopes of the built-in tableaux");

  auto* fetch_cmd = app.add_subcommand("fetch-data", "Download IDX archives with checksum verification");
  fetch_cmd->add_option("--dataset", dataset)->required()->check(CLI::IsMember({"mnist", "fashion_mnist"}));
  fetch_cmd->add_option("--dir", data_dir)->required();
  fetch_cmd->add_option("--base-url", base_url, "Mirror serving the same file names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run_cmd) return cmd_run(config_path, seed, out_dir);
    if (*sweep_cmd) return cmd_sweep(config_path, grid_path, jobs);
    if (*verify_cmd) return cmd_verify();
    if (*fetch_cmd) return cmd_fetch(dataset, data_dir, base_url);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
