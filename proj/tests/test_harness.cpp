#include "safefilter/harness/csv.hpp"
#include "safefilter/harness/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace safefilter;
using namespace safefilter::harness;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_di_config() {
  ExperimentConfig c;
  c.seed = 7;
  c.env.name = "double_integrator";
  c.env.noise_std = 0.01;
  c.model.type = "oracle";
  c.model.sigma_floor = {0.005, 0.005};
  c.objective.cost = "margin";
  c.objective.slope = 8.0;
  c.objective.gamma = 0.9;
  c.grid.lower = {-1.6, -1.6};
  c.grid.upper = {1.6, 1.6};
  c.grid.points = {17, 17};
  c.value.gh_points = 3;
  c.value.tol = 1e-8;
  c.backup.action_points = 7;
  c.filter.particles = 200;
  c.filter.iterations = 3;
  c.cert.enabled = false;
  c.episodes.warmup = 2;
  c.episodes.count = 2;
  c.episodes.horizon = 50;
  c.planner.particles = 64;
  c.planner.iterations = 3;
  c.planner.horizon = 10;
  c.validate();
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config round-trips through its canonical form") {
  ExperimentConfig c = tiny_di_config();
  std::string first = c.to_json_text();
  ExperimentConfig parsed = ExperimentConfig::from_json_text(first);
  CHECK(parsed.to_json_text() == first);
  CHECK(parsed.seed == 7);
  CHECK(parsed.env.noise_std.value() == 0.01);
  CHECK(parsed.grid.points == std::vector<int>{17, 17});
}

TEST_CASE("unknown config keys are rejected at every level") {
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json_text(R"({"sede": 1})"),
                       doctest::Contains("unknown key"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      ExperimentConfig::from_json_text(R"({"objective": {"gama": 0.99}})"),
      doctest::Contains("unknown key"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      ExperimentConfig::from_json_text(R"({"filter": {"particle_count": 10}})"),
      doctest::Contains("unknown key"), std::invalid_argument);
}

TEST_CASE("config invariants are checked at load time") {
  // xi at or above xi_bar is rejected (margin cost: xi_bar = 0.5)
  CHECK_THROWS(ExperimentConfig::from_json_text(R"({"objective": {"xi_absolute": 0.5}})"));
  CHECK_THROWS(ExperimentConfig::from_json_text(R"({"objective": {"xi_absolute": 0.7}})"));
  CHECK_NOTHROW(ExperimentConfig::from_json_text(R"({"objective": {"xi_absolute": 0.2}})"));
  CHECK_THROWS(ExperimentConfig::from_json_text(R"({"objective": {"gamma": 1.0}})"));
  CHECK_THROWS(ExperimentConfig::from_json_text(R"({"environment": {"name": "cartpole"}})"));
  CHECK_THROWS(ExperimentConfig::from_json_text(R"({"episodes": {"count": 0}})"));
}

TEST_CASE("format_double renders shortest exact decimal") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(100.0) == "100");
  double pi = 3.141592653589793;
  CHECK(std::strtod(format_double(pi).c_str(), nullptr) == pi);
  double tricky = 0.1 + 0.2;
  CHECK(std::strtod(format_double(tricky).c_str(), nullptr) == tricky);
}

TEST_CASE("pipeline is deterministic: identical config and seed give identical artifacts") {
  ExperimentConfig c = tiny_di_config();
  TempDir a("sf_determinism_a"), b("sf_determinism_b");

  PipelineResult ra = run_pipeline(c, a.path);
  PipelineResult rb = run_pipeline(c, b.path);

  CHECK(static_cast<int>(ra.metrics.size()) == c.episodes.count);
  CHECK(slurp(a.path / "metrics.csv") == slurp(b.path / "metrics.csv"));
  CHECK(slurp(a.path / "diagnostics.csv") == slurp(b.path / "diagnostics.csv"));
  CHECK(slurp(a.path / "summary.json") == slurp(b.path / "summary.json"));
  CHECK(slurp(a.path / "vp_grid.csv") == slurp(b.path / "vp_grid.csv"));
  (void)rb;

  // a different seed must actually change the outcome
  ExperimentConfig c2 = c;
  c2.seed = 8;
  TempDir d("sf_determinism_c");
  run_pipeline(c2, d.path);
  CHECK(slurp(a.path / "metrics.csv") != slurp(d.path / "metrics.csv"));
}

TEST_CASE("unfiltered pipeline skips the backup stages and still writes metrics") {
  ExperimentConfig c = tiny_di_config();
  c.filter.enabled = false;
  TempDir dir("sf_unfiltered");
  PipelineResult result = run_pipeline(c, dir.path);
  CHECK(static_cast<int>(result.metrics.size()) == c.episodes.count);
  CHECK_FALSE(fs::exists(dir.path / "backup_policy.json"));
  CHECK(fs::exists(dir.path / "metrics.csv"));
  for (const EpisodeMetrics& m : result.metrics) CHECK(m.interventions == 0);
}

TEST_CASE("stage failures carry the stage name; partial artifacts are retained") {
  ExperimentConfig c = tiny_di_config();
  c.model.type = "ensemble";
  c.model.pretrain_iters = 2;
  c.episodes.warmup = 0;  // empty buffer: the fit stage must fail
  TempDir dir("sf_stagefail");
  CHECK_THROWS_WITH_AS(run_pipeline(c, dir.path), doctest::Contains("stage fit-model"),
                       std::runtime_error);
  CHECK(fs::exists(dir.path / "config.json"));
  CHECK(fs::exists(dir.path / "buffer.csv"));
}

TEST_CASE("compare summarizes runs and names missing metrics") {
  ExperimentConfig c = tiny_di_config();
  TempDir dir("sf_compare");
  run_pipeline(c, dir.path);

  auto rows = compare({dir.path});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].episodes == c.episodes.count);
  std::string table = compare_table(rows);
  CHECK(table.find("mean_return") != std::string::npos);

  std::ostringstream csv;
  write_compare_csv(csv, rows);
  CHECK(csv.str().find("run,mean_return") == 0);

  TempDir empty("sf_compare_empty");
  CHECK_THROWS_WITH_AS(compare({empty.path}), doctest::Contains("metrics"), std::runtime_error);
  CHECK_THROWS(compare({}));
}

TEST_CASE("individual stages run against a prepared directory") {
  ExperimentConfig c = tiny_di_config();
  TempDir dir("sf_stages");
  c.save((dir.path / "config.json").string());
  stage_collect(c, dir.path);
  CHECK(fs::exists(dir.path / "buffer.csv"));
  stage_fit_model(c, dir.path);
  CHECK(fs::exists(dir.path / "model.json"));
  stage_learn_backup(c, dir.path);
  CHECK(fs::exists(dir.path / "backup_policy.json"));
  stage_solve_value(c, dir.path);
  CHECK(fs::exists(dir.path / "vp_grid.json"));
  stage_episodes(c, dir.path);
  CHECK(fs::exists(dir.path / "metrics.csv"));
  CHECK(read_metrics_csv(dir.path / "metrics.csv").size() ==
        static_cast<std::size_t>(c.episodes.count));
}

TEST_CASE("solve-value without a backup policy reports the missing artifact") {
  ExperimentConfig c = tiny_di_config();
  TempDir dir("sf_missing");
  CHECK_THROWS(stage_solve_value(c, dir.path));
}
