// Drives the installed command line binary end to end. The binary's path
// arrives as the first program argument (wired up by the build), so these
// tests exercise argument parsing, exit codes, and on-disk outputs exactly
// as a user would hit them.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string g_cli;  // path to the binary under test

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

RunResult run_cli(const std::string& args, const std::string& stdin_file = "") {
  const fs::path dir = fs::temp_directory_path();
  const fs::path out = dir / "mixcs_cli_stdout.txt";
  const fs::path err = dir / "mixcs_cli_stderr.txt";
  std::string cmd = g_cli + " " + args + " >" + out.string() + " 2>" +
                    err.string();
  cmd += stdin_file.empty() ? " </dev/null" : (" <" + stdin_file);
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  Scratch() : dir(fs::temp_directory_path() / "mixcs_cli_scratch") {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string path(const char* name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("top level: help, version, and the no-subcommand error") {
  RunResult help = run_cli("--help");
  CHECK(help.code == 0);
  CHECK(help.out.find("stream") != std::string::npos);
  CHECK(help.out.find("coverage") != std::string::npos);

  RunResult version = run_cli("--version");
  CHECK(version.code == 0);
  CHECK(version.out.find("mixcs") != std::string::npos);

  CHECK(run_cli("").code == 2);
  CHECK(run_cli("frobnicate").code == 2);
}

TEST_CASE("stream: file and stdin input, method selection, --out") {
  Scratch s;
  spit(s.path("obs.txt"), "0.5 -1.25 2.25\n");

  RunResult r = run_cli("stream " + s.path("obs.txt") + " --method ville");
  REQUIRE(r.code == 0);
  CHECK(count_lines(r.out) == 4);
  CHECK(r.out.rfind("n,method,lo,hi\n", 0) == 0);
  CHECK(r.out.find("1,ville,") != std::string::npos);
  CHECK(r.out.find("3,ville,") != std::string::npos);

  // same observations through stdin, default method
  RunResult rs = run_cli("stream -", s.path("obs.txt"));
  REQUIRE(rs.code == 0);
  CHECK(count_lines(rs.out) == 4);
  CHECK(rs.out.find("eville_grid") != std::string::npos);

  // --out writes the identical bytes instead of printing
  RunResult rf = run_cli("stream " + s.path("obs.txt") +
                         " --method ville --out " + s.path("traj.csv"));
  REQUIRE(rf.code == 0);
  CHECK(rf.out.empty());
  CHECK(slurp(s.path("traj.csv")) == r.out);
}

TEST_CASE("stream: prior selection via inline json") {
  Scratch s;
  spit(s.path("obs.txt"), "1.0 2.0\n");
  RunResult r = run_cli(
      "stream " + s.path("obs.txt") +
      " --prior-json \"{\\\"kind\\\":\\\"improper\\\",\\\"kappa\\\":0}\""
      " --method improper_closed_form");
  REQUIRE(r.code == 0);
  CHECK(count_lines(r.out) == 3);
  CHECK(r.out.find("improper_closed_form") != std::string::npos);

  // malformed prior json and an incompatible prior/method pair both fail
  CHECK(run_cli("stream " + s.path("obs.txt") +
                " --prior-json \"{oops\"").code == 2);
  CHECK(run_cli("stream " + s.path("obs.txt") +
                " --prior-json \"{\\\"kind\\\":\\\"improper\\\","
                "\\\"kappa\\\":0}\" --method ville").code == 2);
}

TEST_CASE("stream: bad inputs exit with the configuration code") {
  Scratch s;
  spit(s.path("obs.txt"), "1.0\n");
  spit(s.path("junk.txt"), "1.0 potato 2.0\n");
  spit(s.path("empty.txt"), "\n");
  CHECK(run_cli("stream " + s.path("obs.txt") + " --alpha 1.5").code == 2);
  CHECK(run_cli("stream " + s.path("obs.txt") + " --method bogus").code == 2);
  CHECK(run_cli("stream " + s.path("nosuch.txt")).code == 2);
  CHECK(run_cli("stream " + s.path("junk.txt")).code == 2);
  CHECK(run_cli("stream " + s.path("empty.txt")).code == 2);
}

TEST_CASE("fig1: config file in, csv + sidecar out") {
  Scratch s;
  spit(s.path("fig1.json"), R"({"n_max": 4, "theta_stars": [0, 2]})");
  const std::string out = s.path("tables");
  RunResult r =
      run_cli("fig1 --config " + s.path("fig1.json") + " --out-dir " + out);
  REQUIRE(r.code == 0);

  const std::string csv = slurp(fs::path(out) / "fig1.csv");
  CHECK(count_lines(csv) == 7 * 2 * 4 + 1);

  nlohmann::json side =
      nlohmann::json::parse(slurp(fs::path(out) / "fig1.json"));
  CHECK(side.at("command") == "fig1");
  CHECK(side.at("config").at("n_max") == 4);
  CHECK(side.contains("version"));

  // bad configs: unknown key, invalid json, missing file
  spit(s.path("bad.json"), R"({"n_maxx": 4})");
  RunResult bad = run_cli("fig1 --config " + s.path("bad.json"));
  CHECK(bad.code == 2);
  CHECK(bad.err.find("unknown field") != std::string::npos);
  spit(s.path("broken.json"), "{oops");
  CHECK(run_cli("fig1 --config " + s.path("broken.json")).code == 2);
  CHECK(run_cli("fig1 --config " + s.path("nofile.json")).code == 2);
}

TEST_CASE("coverage: seed override lands in the sidecar, reruns are "
          "byte-identical") {
  Scratch s;
  spit(s.path("cov.json"),
       R"({"prior": {"kind": "improper", "kappa": 0},
           "method": "improper_closed_form", "alpha": 0.5,
           "n_max": 30, "seed": 5, "replications": 150})");

  RunResult a = run_cli("coverage --config " + s.path("cov.json") +
                        " --out-dir " + s.path("a"));
  RunResult b = run_cli("coverage --config " + s.path("cov.json") +
                        " --out-dir " + s.path("b"));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(s.dir / "a" / "coverage.csv") ==
        slurp(s.dir / "b" / "coverage.csv"));
  CHECK(slurp(s.dir / "a" / "coverage.json") ==
        slurp(s.dir / "b" / "coverage.json"));

  nlohmann::json side =
      nlohmann::json::parse(slurp(s.dir / "a" / "coverage.json"));
  CHECK(side.at("config").at("seed") == 5);

  RunResult c = run_cli("coverage --config " + s.path("cov.json") +
                        " --seed 123 --out-dir " + s.path("c"));
  REQUIRE(c.code == 0);
  nlohmann::json cside =
      nlohmann::json::parse(slurp(s.dir / "c" / "coverage.json"));
  CHECK(cside.at("config").at("seed") == 123);
}

TEST_CASE("unseeded studies reject --seed; seeded ones accept it") {
  CHECK(run_cli("volume --seed 1").code == 2);
  CHECK(run_cli("disconnected --seed 1").code == 2);
}

TEST_CASE("pvalue, disconnected, convergence: tables land under --out-dir") {
  Scratch s;

  spit(s.path("pv.json"),
       R"({"ybars": [0.25], "curve_points": 5, "threshold_points": 3})");
  RunResult pv = run_cli("pvalue --config " + s.path("pv.json") +
                         " --out-dir " + s.path("pv"));
  REQUIRE(pv.code == 0);
  for (const char* f : {"pvalue_curves.csv", "pvalue_curves.json",
                        "pvalue_thresholds.csv", "pvalue_thresholds.json"})
    CHECK(fs::exists(s.dir / "pv" / f));

  spit(s.path("disc.json"),
       R"({"ybars": [1.5], "alpha_min": 0.35, "alpha_max": 0.45,
           "alpha_points": 3, "grid_points": 801})");
  RunResult dc = run_cli("disconnected --config " + s.path("disc.json") +
                         " --out-dir " + s.path("dc"));
  REQUIRE(dc.code == 0);
  nlohmann::json side =
      nlohmann::json::parse(slurp(s.dir / "dc" / "disconnected.json"));
  CHECK(side.at("bands").size() == 1);

  spit(s.path("conv.json"),
       R"({"ns": [1], "ybars": [10], "theta_stars": [10],
           "replications": 3})");
  // nested out-dir components are created on demand
  RunResult cv = run_cli("convergence --config " + s.path("conv.json") +
                         " --out-dir " + s.path("cv/deep/dir"));
  REQUIRE(cv.code == 0);
  CHECK(fs::exists(s.dir / "cv" / "deep" / "dir" / "convergence_sweep.csv"));
  CHECK(fs::exists(s.dir / "cv" / "deep" / "dir" / "convergence_mc.csv"));
}

int main(int argc, char** argv) {
  std::vector<char*> pass;
  pass.push_back(argv[0]);
  for (int i = 1; i < argc; ++i) {
    if (g_cli.empty() && argv[i][0] != '-') {
      g_cli = argv[i];
    } else {
      pass.push_back(argv[i]);
    }
  }
  if (g_cli.empty()) {
    std::fprintf(stderr, "usage: test_cli <path-to-mixcs-binary> "
                         "[doctest options]\n");
    return 1;
  }
  doctest::Context ctx;
  ctx.applyCommandLine(static_cast<int>(pass.size()), pass.data());
  return ctx.run();
}
