// End-to-end tests of the tapamp binary: exit codes, file outputs, and the
// byte-identical replay contract.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = TAPAMP_CLI_PATH;

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
  std::string stderr_text;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << text;
}

RunResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd =
      kCli + " " + args + " >" + out.string() + " 2>" + err.string();
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.stdout_text = slurp(out);
  r.stderr_text = slurp(err);
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("tapamp_cli_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

TEST_CASE("simulate: beta = 0 closed form and determinism contract") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "config.json";
  spit(cfg, R"({"beta":0,"h":0.5,"n":100,"k":5,"replicas":2})");

  const auto r1 = run_cli("simulate --config " + cfg.string() + " --out " +
                              (tmp.path / "a").string() + " --threads 1",
                          tmp.path);
  REQUIRE(r1.exit_code == 0);
  const nlohmann::json rep = nlohmann::json::parse(slurp(tmp.path / "a" / "report.json"));
  const double want = std::tanh(0.5) * std::tanh(0.5);
  for (int a = 1; a < 5; ++a)
    for (int b = 1; b < 5; ++b)
      CHECK(rep.at("results")[0].at("q_mc_mean")[a][b].get<double>() ==
            doctest::Approx(want).epsilon(1e-12));

  // replay with a different thread count is byte-identical
  const auto r2 = run_cli("simulate --config " + cfg.string() + " --out " +
                              (tmp.path / "b").string() + " --threads 2",
                          tmp.path);
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(tmp.path / "a" / "report.json") == slurp(tmp.path / "b" / "report.json"));
  CHECK(slurp(tmp.path / "a" / "q_mc.csv") == slurp(tmp.path / "b" / "q_mc.csv"));
}

TEST_CASE("simulate: missing required field names it, exit 2") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "config.json";
  spit(cfg, R"({"h":0.5,"n":100,"k":5,"replicas":2})");
  const auto r = run_cli("simulate --config " + cfg.string() + " --out " +
                             (tmp.path / "out").string(),
                         tmp.path);
  CHECK(r.exit_code == 2);
  CHECK(r.stderr_text.find("beta") != std::string::npos);
}

TEST_CASE("simulate: refuses to overwrite without --force") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "config.json";
  spit(cfg, R"({"beta":0,"h":0.1,"n":20,"k":3,"replicas":2})");
  const std::string out = (tmp.path / "out").string();
  CHECK(run_cli("simulate --config " + cfg.string() + " --out " + out, tmp.path).exit_code == 0);
  const auto again = run_cli("simulate --config " + cfg.string() + " --out " + out, tmp.path);
  CHECK(again.exit_code == 2);
  CHECK(again.stderr_text.find("force") != std::string::npos);
  CHECK(run_cli("simulate --config " + cfg.string() + " --out " + out + " --force", tmp.path)
            .exit_code == 0);
}

TEST_CASE("simulate: overrides and snapshot") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "config.json";
  spit(cfg, R"({"beta":0,"h":0.5,"n":30,"k":3,"replicas":2})");
  const auto r = run_cli("simulate --config " + cfg.string() + " --out " +
                             (tmp.path / "out").string() +
                             " --snapshot params.h=0.25 replicas=3",
                         tmp.path);
  REQUIRE(r.exit_code == 0);
  const nlohmann::json rep = nlohmann::json::parse(slurp(tmp.path / "out" / "report.json"));
  CHECK(rep.at("config").at("h") == 0.25);
  CHECK(rep.at("config").at("replicas") == 3);
  const nlohmann::json snap = nlohmann::json::parse(slurp(tmp.path / "out" / "snapshot.json"));
  CHECK(snap.at("k") == 3);
  CHECK(snap.at("choice") == "classical");
}

TEST_CASE("simulate: resource guard maps to exit 3") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "config.json";
  spit(cfg, R"({"beta":1,"h":0.1,"n":500,"k":3,"replicas":2,"track_derivatives":true})");
  const auto r = run_cli("simulate --config " + cfg.string() + " --out " +
                             (tmp.path / "out").string(),
                         tmp.path);
  CHECK(r.exit_code == 3);
}

TEST_CASE("phase: sweep rows at pinned points") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "phase.json";
  spit(cfg, R"({"beta":[0.5,1.0],"h":[0.0,0.3]})");
  const auto r = run_cli("phase --config " + cfg.string() + " --out " + tmp.path.string(),
                         tmp.path);
  REQUIRE(r.exit_code == 0);
  std::istringstream csv(slurp(tmp.path / "phase.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "beta,h,q,q_tilde,at_residual,chi_q");
  int rows = 0;
  double worst_order = -1.0;
  while (std::getline(csv, line)) {
    ++rows;
    double beta, h, q, qt, resid, chi;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    ls >> beta >> h >> q >> qt >> resid >> chi;
    CHECK(qt <= q + 1e-10);
    if (beta == 0.5 && h == 0.0) {
      CHECK(q == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(resid == doctest::Approx(-0.75).epsilon(1e-9));
    }
    if (beta == 1.0 && h == 0.0) CHECK(std::abs(resid) < 1e-8);
    worst_order = std::max(worst_order, beta);
  }
  CHECK(rows == 4);
}

TEST_CASE("phase: empty grid exits 2") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "phase.json";
  spit(cfg, R"({"beta":[],"h":[0.1]})");
  CHECK(run_cli("phase --config " + cfg.string() + " --out " + tmp.path.string(), tmp.path)
            .exit_code == 2);
}

TEST_CASE("scaling: single size is a design error, beta = 0 is degenerate") {
  TempDir tmp;
  const fs::path one = tmp.path / "one.json";
  spit(one, R"({"beta":1,"h":0.3,"n_list":[100],"k":3,"replicas":4,"error_iterate":3})");
  CHECK(run_cli("scaling --config " + one.string() + " --out " + (tmp.path / "a").string(),
                tmp.path)
            .exit_code == 2);

  const fs::path zero = tmp.path / "zero.json";
  spit(zero,
       R"({"beta":0,"h":0.3,"n_list":[24,48,96],"k":3,"replicas":3,"error_iterate":3,"quantity":"epsilon"})");
  const auto r = run_cli("scaling --config " + zero.string() + " --out " +
                             (tmp.path / "b").string(),
                         tmp.path);
  REQUIRE(r.exit_code == 0);
  CHECK(r.stdout_text.find("degenerate") != std::string::npos);
  CHECK(slurp(tmp.path / "b" / "scaling.csv").find("true") != std::string::npos);
}

TEST_CASE("verify: --list prints the criterion identifiers") {
  TempDir tmp;
  const auto r = run_cli("verify --list", tmp.path);
  CHECK(r.exit_code == 0);
  int count = 0;
  std::istringstream is(r.stdout_text);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++count;
  CHECK(count == 12);
  CHECK(r.stdout_text.find("quadrature-exactness") != std::string::npos);
  CHECK(r.stdout_text.find("determinism-replay") != std::string::npos);
}

TEST_CASE("verify: fast subset passes") {
  TempDir tmp;
  const auto r = run_cli(
      "verify --only quadrature-exactness --only at-boundary-zero-field --only "
      "gaussian-derivative-identities",
      tmp.path);
  CHECK(r.exit_code == 0);
  CHECK(r.stdout_text.find("FAIL") == std::string::npos);
}

TEST_CASE("verify: injected Onsager sign flip breaks the AT dichotomy") {
  TempDir tmp;
  const auto r = run_cli(
      "verify --inject-onsager-sign-flip --only pseudo-convergence-dichotomy", tmp.path);
  CHECK(r.exit_code == 1);
  CHECK(r.stdout_text.find("FAIL pseudo-convergence-dichotomy") != std::string::npos);
}
