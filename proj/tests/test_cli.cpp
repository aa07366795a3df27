#include "doctest.h"
#include "oracles.hpp"

#include "ucgp/cgm.hpp"
#include "ucgp/config.hpp"
#include "ucgp/core.hpp"
#include "ucgp/reference.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace ucgp;
namespace fs = std::filesystem;

namespace {

int cli(const fs::path& cwd, const std::string& args) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" UCGP_CLI_PATH "' " + args + " >cli.log 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

nlohmann::json tiny_config() {
  return {{"seed", 5},
          {"output_dir", "out"},
          {"k", 2},
          {"n_eot", 1},
          {"synth", {{"count", 4}, {"clean_count", 4}, {"width", 48}, {"height", 64}}},
          {"metade", {{"population", 4}, {"generations", 1}, {"batch_size", 0}}}};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("exit codes for bad invocations") {
  const auto dir = oracle::scratch("cli_codes");
  write_json(dir / "c.json", tiny_config());
  CHECK(cli(dir, "") == 1);
  CHECK(cli(dir, "optimize") == 1);                              // --config missing
  CHECK(cli(dir, "frobnicate --config c.json") == 1);
  CHECK(cli(dir, "render --config c.json") == 1);                // --patch missing
  CHECK(cli(dir, "render --config c.json --patch nope.json") == 2);
  CHECK(cli(dir, "evaluate --config missing.json --patch x.json") == 2);
  CHECK(cli(dir, "stats --config c.json") == 2);                 // no dataset yet
  CHECK(cli(dir, "synth --config c.json --workers 0") == 1);

  auto no_seed = tiny_config();
  no_seed.erase("seed");
  write_json(dir / "noseed.json", no_seed);
  CHECK(cli(dir, "synth --config noseed.json") == 1);
  CHECK(slurp(dir / "cli.log").find("seed") != std::string::npos);

  auto bad = tiny_config();
  bad["cgm"] = {{"grid_dim", 0}};
  write_json(dir / "bad.json", bad);
  CHECK(cli(dir, "synth --config bad.json") == 1);
  std::ofstream(dir / "junk.json") << "{ not json";
  CHECK(cli(dir, "synth --config junk.json") == 1);
}

TEST_CASE("synth, stats, optimize, evaluate on a tiny run") {
  const auto dir = oracle::scratch("cli_flow");
  write_json(dir / "c.json", tiny_config());
  REQUIRE(cli(dir, "synth --config c.json") == 0);
  CHECK(load_dataset(dir / "out/synth/dataset.json").items.size() == 4);

  REQUIRE(cli(dir, "stats --config c.json") == 0);
  const std::string ref1 = slurp(dir / "out/reference.json");
  fs::remove(dir / "out/reference.json");
  REQUIRE(cli(dir, "stats --config c.json") == 0);
  CHECK(slurp(dir / "out/reference.json") == ref1);

  REQUIRE(cli(dir, "optimize --config c.json") == 0);
  for (const char* f : {"patch.json", "history.jsonl", "fitness_report.json"}) CHECK(fs::exists(dir / "out" / f));
  const auto history = lines(slurp(dir / "out/history.jsonl"));
  REQUIRE(history.size() == 2);
  CHECK(nlohmann::json::parse(history[1])["best"] <= nlohmann::json::parse(history[0])["best"]);
  const auto report = nlohmann::json::parse(slurp(dir / "out/fitness_report.json"));
  for (const char* key : {"total", "l_subspace", "l_topo", "l_budget"}) CHECK(report.contains(key));
  CHECK(load_patch(dir / "out/patch.json").first.gates.size() == 25);

  REQUIRE(cli(dir, "evaluate --config c.json --patch out/patch.json") == 0);
  for (const char* f : {"outcomes.csv", "outcomes.json", "summary.json"}) CHECK(fs::exists(dir / "out" / f));
  CHECK(lines(slurp(dir / "out/outcomes.csv")).size() == 5);

  REQUIRE(cli(dir, "paste --config c.json --patch out/patch.json") == 0);
  CHECK(std::distance(fs::directory_iterator(dir / "out/pasted"), fs::directory_iterator{}) == 4);

  REQUIRE(cli(dir, "export --config c.json --patch out/patch.json --size-mm 150") == 0);
  CHECK(slurp(dir / "out/patch.svg").find("<svg") != std::string::npos);
  CHECK(cli(dir, "export --config c.json --patch out/patch.json --size-mm -1") == 1);

  // A seed override changes the search.
  REQUIRE(cli(dir, "optimize --config c.json --seed 6 --out other") == 2);  // other/ has no data
  auto moved = tiny_config();
  moved["dataset"] = "out/synth/dataset.json";
  moved["clean"] = "out/synth/clean.json";
  write_json(dir / "m.json", moved);
  REQUIRE(cli(dir, "optimize --config m.json --seed 6 --out other") == 0);
  CHECK(fs::exists(dir / "other/patch.json"));
  CHECK(slurp(dir / "other/history.jsonl") != slurp(dir / "out/history.jsonl"));

  // Nothing lands outside the output directories.
  std::set<std::string> top;
  for (const auto& e : fs::directory_iterator(dir)) top.insert(e.path().filename().string());
  CHECK(top == std::set<std::string>{"c.json", "m.json", "cli.log", "out", "other"});
}

TEST_CASE("the clean filter drops low-confidence images before the statistics") {
  const auto dir = oracle::scratch("cli_filter");
  auto cfg = tiny_config();
  cfg["synth"]["clean_count"] = 12;
  write_json(dir / "c.json", cfg);
  REQUIRE(cli(dir, "synth --config c.json") == 0);
  REQUIRE(cli(dir, "stats --config c.json") == 0);
  const auto kept = load_reference(dir / "out/reference.json").features.size();
  CHECK(kept >= 3);
  CHECK(kept <= 12);
  cfg["clean_min_prob"] = 0.0;
  write_json(dir / "c.json", cfg);
  REQUIRE(cli(dir, "stats --config c.json") == 0);
  CHECK(load_reference(dir / "out/reference.json").features.size() == 12);
  cfg["k"] = 12;  // needs 13 images after filtering
  cfg["clean_min_prob"] = 0.5;
  write_json(dir / "c.json", cfg);
  CHECK(cli(dir, "stats --config c.json") == 1);
  CHECK(slurp(dir / "cli.log").find("after filtering") != std::string::npos);
  cfg["clean_min_prob"] = 1.5;
  write_json(dir / "c.json", cfg);
  CHECK(cli(dir, "stats --config c.json") == 1);
}

TEST_CASE("full-batch history never gets worse") {
  const auto dir = oracle::scratch("cli_history");
  auto cfg = tiny_config();
  cfg["metade"] = {{"population", 6}, {"generations", 8}, {"batch_size", 0}};
  write_json(dir / "c.json", cfg);
  REQUIRE(cli(dir, "synth --config c.json") == 0);
  REQUIRE(cli(dir, "optimize --config c.json") == 0);
  const auto h = lines(slurp(dir / "out/history.jsonl"));
  REQUIRE(h.size() == 9);
  for (std::size_t i = 1; i < h.size(); ++i)
    CHECK(nlohmann::json::parse(h[i])["best"] <= nlohmann::json::parse(h[i - 1])["best"]);
}

TEST_CASE("render of the empty patch is black; export refuses crossings") {
  const auto dir = oracle::scratch("cli_render");
  write_json(dir / "c.json", tiny_config());
  CgmConfig cgm;
  save_patch(decode(std::vector<double>(genome_dim(cgm), 0.0), cgm), cgm, dir / "empty.json");
  REQUIRE(cli(dir, "render --config c.json --patch empty.json --side 64") == 0);
  const IrImage alpha = load_image(dir / "out/patch_alpha.png");
  CHECK(alpha.width() == 64);
  double mx = 0;
  for (double v : alpha.values()) mx = std::max(mx, v);
  CHECK(mx == 0.0);

  cgm.curvature_limit = 0.95;
  bool found = false;
  for (double s0 : {-1.0, 1.0})
    for (double s1 : {-1.0, 1.0}) {
      auto g = std::vector<double>(genome_dim(cgm), 0.0);
      std::fill(g.begin(), g.begin() + 25, 1.0);
      g[25 + 0] = s0;
      g[25 + 30] = s1;
      const auto p = decode(g, cgm);
      if (!found && check_topology(p, cgm) == Topology::self_intersecting) {
        save_patch(p, cgm, dir / "crossing.json");
        found = true;
      }
    }
  REQUIRE(found);
  CHECK(cli(dir, "export --config c.json --patch crossing.json") == 3);
  CHECK_FALSE(fs::exists(dir / "out/patch.svg"));
}

TEST_CASE("shipped default config loads") {
  const auto cfg = load_run_config(fs::path(UCGP_CONFIG_DIR) / "default.json");
  CHECK(cfg.seed != 0);
  CHECK(cfg.setup.cgm.grid_dim == 5);
  CHECK(cfg.metade.population == 50);
}
