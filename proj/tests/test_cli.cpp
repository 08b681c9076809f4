#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(MKVSIM_PATH) + " " + args + " >" +
                          out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mkvsim_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("simulate smoke run writes trajectory and manifest") {
  const fs::path dir = fresh_dir("smoke");
  const auto r = run("simulate --scenario example_4_1 --particles 4 "
                     "--steps 50 --horizon 1 --out-dir " +
                     (dir / "out").string(), dir);
  CHECK(r.exit_code == 0);
  REQUIRE(fs::exists(dir / "out" / "trajectory.csv"));
  REQUIRE(fs::exists(dir / "out" / "manifest.json"));
  const std::string csv = slurp(dir / "out" / "trajectory.csv");
  CHECK(csv.rfind("time,particle_id,x1\n", 0) == 0);
  // 51 grid times x 4 particles + header.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 51 * 4);

  const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(manifest.at("seed") == 0);
  CHECK(manifest.at("outputs").size() == 1);
  CHECK(manifest.at("config").at("command") == "simulate");
}

TEST_CASE("missing config file exits 2 and names the path") {
  const fs::path dir = fresh_dir("missing");
  const auto r = run("simulate --scenario /no/such/config.json --out-dir " +
                     (dir / "out").string(), dir);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("/no/such/config.json") != std::string::npos);
}

TEST_CASE("unknown builtin exits 2") {
  const fs::path dir = fresh_dir("unknown");
  const auto r = run("simulate --scenario totally_made_up --out-dir " +
                     (dir / "out").string(), dir);
  CHECK(r.exit_code == 2);
}

TEST_CASE("cubic blow-up on a coarse grid exits 3 naming particle and step") {
  const fs::path dir = fresh_dir("diverge");
  const fs::path config = dir / "cubic.json";
  {
    std::ofstream f(config);
    f << R"({
      "model": {"d": 1, "m": 1, "T": 10.0, "kappa": 2.0, "r": 4.0},
      "coefficients": {"b": ["x^3"], "sigma": ["0"], "h": ["0"]},
      "initial": {"kind": "deterministic", "value": [2.0]}
    })";
  }
  const auto r = run("simulate --scenario " + config.string() +
                     " --steps 20 --particles 1 --out-dir " +
                     (dir / "out").string(), dir);
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("particle 0") != std::string::npos);
  CHECK(r.err.find("step") != std::string::npos);
}

TEST_CASE("reruns with the same seed are byte-identical across threads") {
  const fs::path dir = fresh_dir("determinism");
  const std::string base = "simulate --scenario example_4_1 --particles 16 "
                           "--steps 100 --horizon 1 --seed 7 ";
  const auto a = run(base + "--threads 1 --out-dir " + (dir / "a").string(), dir);
  const auto b = run(base + "--threads 8 --out-dir " + (dir / "b").string(), dir);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(dir / "a" / "trajectory.csv") ==
        slurp(dir / "b" / "trajectory.csv"));
}

TEST_CASE("averaging study emits reports with a monotone verdict") {
  const fs::path dir = fresh_dir("average");
  const auto r = run("average --scenario example_4_1 --particles 16 "
                     "--steps 200 --horizon 1 "
                     "--replications 3 --format json --out-dir " +
                     (dir / "out").string(), dir);
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(dir / "out" / "report.json"));
  REQUIRE(fs::exists(dir / "out" / "report.csv"));
  const auto report = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  CHECK(report.at("kind") == "averaging");
  CHECK(report.at("points").size() == 2);
  CHECK(report.contains("verdict"));
  // --format json echoes the JSON report.
  CHECK(r.out.rfind("{", 0) == 0);
}

TEST_CASE("verify passes a true bound and fails a false one with exit 4") {
  const fs::path dir = fresh_dir("verify");
  const auto good = run("verify --scenario remark_2_1_drift --out-dir " +
                        (dir / "good").string(), dir);
  CHECK(good.exit_code == 0);
  const auto report =
      nlohmann::json::parse(slurp(dir / "good" / "verify_report.json"));
  CHECK(report.at("all_passed").get<bool>());

  const auto bad = run("verify --scenario remark_2_1_drift "
                       "--bound one_sided_drift=0 --out-dir " +
                       (dir / "bad").string(), dir);
  CHECK(bad.exit_code == 4);
}

TEST_CASE("refine study reports strictly decreasing distances") {
  const fs::path dir = fresh_dir("refine");
  const auto r = run("refine --scenario example_4_1 --particles 8 "
                     "--replications 1 --horizon 1 --out-dir " +
                     (dir / "out").string(), dir);
  REQUIRE(r.exit_code == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  CHECK(report.at("kind") == "refinement");
  CHECK(report.at("points").size() == 4);
}

TEST_CASE("bad flag values exit 2") {
  const fs::path dir = fresh_dir("badflag");
  const auto r = run("simulate --format yaml --out-dir " +
                     (dir / "out").string(), dir);
  CHECK(r.exit_code == 2);
}
