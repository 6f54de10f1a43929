#include <doctest.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "hubopt/solve.hpp"
#include "oracle.hpp"

using namespace hubopt;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  fs::path p = fs::temp_directory_path() /
               ("hubopt_ext_" + std::to_string(getpid()) + "_" + tag + "_" +
                std::to_string(counter++));
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  REQUIRE(out.good());
  out << content;
}

// Stub "solver" that ignores the model and copies a canned solution file.
std::string stub_command(const fs::path& dir, const std::string& canned) {
  write_file(dir / "canned.sol", canned);
  write_file(dir / "stub.sh",
             "#!/bin/sh\ncp '" + (dir / "canned.sol").string() + "' \"$2\"\n");
  return "/bin/sh " + (dir / "stub.sh").string() + " {mps} {sol}";
}

SparseLP two_var_lp() {
  SparseLP lp;
  lp.name = "pair";
  lp.ncols = 2;
  lp.c = {1.0, 1.0};
  lp.lb = {0.0, 0.0};
  lp.ub = {5.0, 5.0};
  lp.sense = {Sense::Ge};
  lp.rhs = {2.0};
  lp.a_row = {0, 0};
  lp.a_col = {0, 1};
  lp.a_val = {1.0, 1.0};
  return lp;
}

} // namespace

TEST_CASE("external bridge round-trips a canned solution") {
  fs::path dir = fresh_dir("ok");
  SparseLP lp = two_var_lp();
  ExternalSolverConfig cfg;
  cfg.command = stub_command(dir, "=optimal=\n# note\nC0 0.5\nC1 1.5\n");
  Solution sol = solve_external(lp, cfg, dir.string());
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x == std::vector<double>{0.5, 1.5});
  CHECK(sol.objective == doctest::Approx(2.0));
  CHECK(sol.max_row_residual == 0.0);
  CHECK(sol.max_bound_violation == 0.0);
  CHECK(fs::exists(dir / "pair.mps"));
  fs::remove_all(dir);
}

TEST_CASE("external bridge forwards infeasible and unbounded verdicts") {
  SparseLP lp = two_var_lp();
  {
    fs::path dir = fresh_dir("inf");
    ExternalSolverConfig cfg;
    cfg.command = stub_command(dir, "=infeasible=\n");
    CHECK(solve_external(lp, cfg, dir.string()).status ==
          SolveStatus::Infeasible);
    fs::remove_all(dir);
  }
  {
    fs::path dir = fresh_dir("unb");
    ExternalSolverConfig cfg;
    cfg.command = stub_command(dir, "=unbounded=\n");
    CHECK(solve_external(lp, cfg, dir.string()).status ==
          SolveStatus::Unbounded);
    fs::remove_all(dir);
  }
}

TEST_CASE("external bridge rejects incomplete or malformed solutions") {
  SparseLP lp = two_var_lp();
  SUBCASE("missing column") {
    fs::path dir = fresh_dir("miss");
    ExternalSolverConfig cfg;
    cfg.command = stub_command(dir, "C0 0.5\n");
    CHECK_THROWS_WITH_AS(solve_external(lp, cfg, dir.string()),
                         doctest::Contains("missing column C1"), Error);
    fs::remove_all(dir);
  }
  SUBCASE("unknown column name") {
    fs::path dir = fresh_dir("unk");
    ExternalSolverConfig cfg;
    cfg.command = stub_command(dir, "C0 0.5\nC9 1.0\nC1 0.5\n");
    CHECK_THROWS_WITH_AS(solve_external(lp, cfg, dir.string()),
                         doctest::Contains("unknown column"), Error);
    fs::remove_all(dir);
  }
  SUBCASE("malformed value") {
    fs::path dir = fresh_dir("bad");
    ExternalSolverConfig cfg;
    cfg.command = stub_command(dir, "C0 zero\nC1 1\n");
    CHECK_THROWS_WITH_AS(solve_external(lp, cfg, dir.string()),
                         doctest::Contains("malformed value"), Error);
    fs::remove_all(dir);
  }
  SUBCASE("no solution file") {
    fs::path dir = fresh_dir("nofile");
    write_file(dir / "noop.sh", "#!/bin/sh\nexit 0\n");
    ExternalSolverConfig cfg;
    cfg.command = "/bin/sh " + (dir / "noop.sh").string() + " {mps} {sol}";
    CHECK_THROWS_WITH_AS(solve_external(lp, cfg, dir.string()),
                         doctest::Contains("no solution file"), Error);
    fs::remove_all(dir);
  }
}

TEST_CASE("external bridge surfaces a failing command with its output") {
  fs::path dir = fresh_dir("fail");
  write_file(dir / "fail.sh", "#!/bin/sh\necho boom-diagnostic\nexit 3\n");
  ExternalSolverConfig cfg;
  cfg.command = "/bin/sh " + (dir / "fail.sh").string() + " {mps} {sol}";
  SparseLP lp = two_var_lp();
  try {
    solve_external(lp, cfg, dir.string());
    FAIL("expected an Error");
  } catch (const Error& e) {
    std::string what = e.what();
    CHECK(what.find("exit 3") != std::string::npos);
    CHECK(what.find("boom-diagnostic") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("external bridge kills a solver that exceeds its timeout") {
  fs::path dir = fresh_dir("slow");
  write_file(dir / "slow.sh", "#!/bin/sh\nsleep 30\n");
  ExternalSolverConfig cfg;
  cfg.command = "/bin/sh " + (dir / "slow.sh").string() + " {mps} {sol}";
  cfg.timeout_seconds = 0.2;
  SparseLP lp = two_var_lp();
  CHECK_THROWS_WITH_AS(solve_external(lp, cfg, dir.string()),
                       doctest::Contains("timeout"), Error);
  fs::remove_all(dir);
}

TEST_CASE("environment override takes precedence over the configured command") {
  fs::path dir = fresh_dir("env");
  // Override omits the placeholders; the bridge appends both paths.
  write_file(dir / "envstub.sh",
             "#!/bin/sh\nprintf 'C0 2\\nC1 0\\n' > \"$2\"\n");
  setenv("HUBOPT_EXTERNAL_SOLVER",
         ("/bin/sh " + (dir / "envstub.sh").string()).c_str(), 1);
  ExternalSolverConfig cfg;
  cfg.command = "/bin/false";
  SparseLP lp = two_var_lp();
  Solution sol = solve_external(lp, cfg, dir.string());
  unsetenv("HUBOPT_EXTERNAL_SOLVER");
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x == std::vector<double>{2.0, 0.0});
  fs::remove_all(dir);
}

TEST_CASE("scipy bridge agrees with the embedded simplex") {
  fs::path dir = fresh_dir("scipy");
  ExternalSolverConfig cfg;
  cfg.command = "python3 " HUBOPT_SOURCE_DIR "/tools/external_solve.py"
                " {mps} {sol}";
  cfg.timeout_seconds = 120.0;

  std::mt19937 rng(555u);
  int optimal = 0, infeasible = 0;
  for (int trial = 0; trial < 8; ++trial) {
    SparseLP lp = hubopt::testing::random_boxed_lp(rng);
    lp.name = "t" + std::to_string(trial);
    CAPTURE(trial);
    Solution embedded = solve_simplex(lp);
    Solution external = solve_external(lp, cfg, dir.string());
    REQUIRE(embedded.status == external.status);
    if (embedded.status == SolveStatus::Optimal) {
      ++optimal;
      CHECK(std::abs(embedded.objective - external.objective) <= 1e-7);
      CHECK(check_feasibility(lp, external.x, 1e-6).empty());
    } else {
      ++infeasible;
    }
  }
  CHECK(optimal >= 2);
  fs::remove_all(dir);
}
