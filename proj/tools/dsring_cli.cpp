// Command-line front end: one subcommand per scenario runner.
//
//   dsring <subcommand> --config scenario.json [--seed S] [--out DIR] [--threads T]
//
// Exit status: 0 when every pass flag holds, 2 when a threshold fails, 1 on error.

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dsring/experiments.hpp"
#include "dsring/io.hpp"

namespace ex = dsring::experiments;

namespace {

using Runner = std::function<ex::RunReport(const ex::ScenarioConfig&, const ex::Output&)>;

const std::map<std::string, std::pair<Runner, const char*>>& runners() {
  static const std::map<std::string, std::pair<Runner, const char*>> table = {
      {"convolve", {ex::run_convolve, "free convolution of two symmetrized laws on the imaginary axis"}},
      {"brown", {ex::run_brown, "Brown measure field of the operator model"}},
      {"simulate", {ex::run_simulate, "eigenvalues and probe singular values of Y = U Sigma V* + A"}},
      {"compare", {ex::run_compare, "eigenvalue cloud against the Brown field (KS and energy distance)"}},
      {"jordan", {ex::run_jordan, "Jordan block against an independent Haar unitary"}},
      {"local-law", {ex::run_local_law, "G^lambda(i eta) error scaling in N"}},
      {"local-window", {ex::run_local_window, "linear statistics on shrinking windows"}},
      {"lsv", {ex::run_lsv, "least singular value sweep over a lambda grid"}},
      {"audit", {ex::run_assumption_audit, "sup of |G| of the symmetrized |A - lambda| law over probes"}},
  };
  return table;
}

void print_summary(const ex::RunReport& r) {
  std::printf("%s [%s]: %s (%.2f s)\n", r.id.c_str(), r.kind.c_str(), r.passed() ? "PASS" : "FAIL", r.seconds);
  for (const auto& [name, value] : r.metrics) {
    const auto flag = r.flags.find(name);
    const auto limit = r.thresholds.find(name);
    std::printf("  %-28s %.17g", name.c_str(), value);
    if (limit != r.thresholds.end()) std::printf("  (threshold %.6g)", limit->second);
    if (flag != r.flags.end()) std::printf("  %s", flag->second ? "ok" : "FAILED");
    std::printf("\n");
  }
  for (const auto& [name, ok] : r.flags) {
    if (!r.metrics.contains(name)) std::printf("  %-28s %s\n", name.c_str(), ok ? "ok" : "FAILED");
  }
  for (const std::string& note : r.notes) std::printf("  note: %s\n", note.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brown measure prediction and random matrix validation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::optional<int> threads;

  for (const auto& [name, entry] : runners()) {
    CLI::App* sub = app.add_subcommand(name, entry.second);
    sub->add_option("--config", config_path, "scenario JSON")->required();
    sub->add_option("--seed", seed, "override the ensemble seed");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    ex::ScenarioConfig config = ex::load_config(config_path);
    if (seed) {
      if (!config.ensemble) throw dsring::DomainError("--seed given but the config has no ensemble");
      config.ensemble->seed = *seed;
    }
    if (threads) config.threads = *threads;

    const ex::Output out{out_dir};
    dsring::io::ensure_directory(out.dir);
    const std::string name = app.get_subcommands().front()->get_name();
    const ex::RunReport report = runners().at(name).first(config, out);
    print_summary(report);
    return report.passed() ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
