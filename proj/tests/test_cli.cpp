#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dsring_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(DSRING_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

json jordan_ensemble(int n) {
  return {{"N", n}, {"seed", 3}, {"trials", 2}, {"sigma", {{"kind", "explicit"}, {"values", {1.0}}}},
          {"a", {{"kind", "jordan_block"}}}};
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  const fs::path dir = scratch("usage");
  CHECK(run("") == 1);
  CHECK(run("frobnicate --config x.json") == 1);
  CHECK(run("brown") == 1);
  CHECK(run("brown --config " + (dir / "missing.json").string()) == 1);
  const fs::path bad = write_config(dir, {{"kind", "single_ring"}, {"grid_nodse", 51}});
  CHECK(run("brown --config " + bad.string() + " --out " + dir.string()) == 1);
  CHECK(run("brown --config " + bad.string() + " --threads 0") == 1);
}

TEST_CASE("brown writes the field and a report") {
  const fs::path dir = scratch("brown");
  const fs::path cfg = write_config(
      dir, {{"kind", "single_ring"}, {"model", {{"kind", "scalar_zero"}, {"sigma", {{"atoms", {{1.0, 1.0}}}}}}}});
  CHECK(run("brown --config " + cfg.string() + " --out " + dir.string() + " --threads 2") == 0);
  CHECK(count_lines(dir / "field.csv") == 201 * 201 + 1);
  std::ifstream in(dir / "report.json");
  const json report = json::parse(in);
  CHECK(report.at("passed").get<bool>());
  CHECK(report.at("config").at("threads") == 2);
}

TEST_CASE("simulate honours the seed override") {
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  const fs::path cfg = write_config(a, {{"kind", "jordan"}, {"ensemble", jordan_ensemble(40)}, {"probes", {{0.5, 0.0}}}});
  CHECK(run("simulate --config " + cfg.string() + " --out " + a.string()) == 0);
  CHECK(run("simulate --config " + cfg.string() + " --out " + b.string() + " --seed 99") == 0);
  CHECK(count_lines(a / "eigenvalues.csv") == 81);
  CHECK(count_lines(a / "svals.csv") == 81);
  std::ifstream ra(a / "report.json"), rb(b / "report.json");
  CHECK(json::parse(ra).at("config").at("ensemble").at("seed") == 3);
  CHECK(json::parse(rb).at("config").at("ensemble").at("seed") == 99);
}

TEST_CASE("threshold failures exit with 2") {
  const fs::path dir = scratch("audit");
  const fs::path cfg = write_config(dir, {{"kind", "assumption_audit"},
                                          {"ensemble", jordan_ensemble(100)},
                                          {"N_list", {100, 200}},
                                          {"probe_circles", {{{"radius", 0.5}, {"count", 8}}}},
                                          {"thresholds", {{"kappa2", 1e-6}}}});
  CHECK(run("audit --config " + cfg.string() + " --out " + dir.string()) == 2);
  std::ifstream in(dir / "report.json");
  CHECK_FALSE(json::parse(in).at("passed").get<bool>());
}
