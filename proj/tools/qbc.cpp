#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "qbc/dump.hpp"
#include "qbc/error.hpp"
#include "qbc/scenario.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kConfigError = 2;

int cmd_run(const std::string& config_path, const std::string& out_dir, const std::optional<std::uint64_t>& seed) {
  qbc::scenario::Config config;
  try {
    config = qbc::scenario::load_config(config_path);
  } catch (const qbc::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  if (seed) config.network.seed = *seed;
  try {
    const auto report = qbc::scenario::run_scenario(config);
    qbc::scenario::write_outputs(report, out_dir);
    const auto& s = report.summary;
    std::cout << (config.name.empty() ? "scenario" : config.name) << ": blocks_confirmed="
              << s["blocks_confirmed"] << " forks_resolved=" << s["forks_resolved"]
              << " tamper_detections=" << s["tamper_detections"] << " invariant_failures="
              << s["invariant_failures"] << "\n";
    for (const auto& f : report.failures) std::cerr << "  failure: " << f << "\n";
    return report.exit_code() == 0 ? kOk : kRuntimeFailure;
  } catch (const qbc::Error& e) {
    if (e.code() == qbc::Errc::ConfigInvalid) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfigError;
    }
    std::cerr << "run failed: " << e.what() << "\n";
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

int cmd_dump(const std::string& path) {
  try {
    std::cout << qbc::dump::pretty(qbc::dump::load_ledger(path));
    return kOk;
  } catch (const qbc::Error& e) {
    std::cerr << e.what() << "\n";
    return kRuntimeFailure;
  }
}

int cmd_diff(const std::string& a, const std::string& b) {
  try {
    const auto rep = qbc::dump::diff(qbc::dump::load_ledger(a), qbc::dump::load_ledger(b));
    if (rep.identical()) {
      std::cout << "identical\n";
      return kOk;
    }
    for (const auto& d : rep.differences) std::cout << d << "\n";
    return kRuntimeFailure;
  } catch (const qbc::Error& e) {
    std::cerr << e.what() << "\n";
    return kRuntimeFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qbc: quantum blockchain simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run a scenario");
  run->add_option("--config", config_path, "Scenario JSON")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Override the config seed");

  std::string ledger_path;
  auto* dump = app.add_subcommand("dump", "Print a ledger dump");
  dump->add_option("ledger", ledger_path, "Ledger JSON")->required();

  std::string a, b;
  auto* diff = app.add_subcommand("diff", "Compare two ledger dumps");
  diff->add_option("a", a)->required();
  diff->add_option("b", b)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  if (*run) return cmd_run(config_path, out_dir, seed);
  if (*dump) return cmd_dump(ledger_path);
  return cmd_diff(a, b);
}
