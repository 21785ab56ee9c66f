#include <doctest.h>

#include "lsfm/commands.hpp"
#include "lsfm/csv.hpp"

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace lsfm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lsfm_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) { return read_text(p); }

}  // namespace

TEST_CASE("simulate is byte-stable for a fixed seed") {
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  REQUIRE(cli({"simulate", "--out", a.string(), "--seed", "5", "design=4", "design.n_patients=6"}).code == 0);
  REQUIRE(cli({"simulate", "--out", b.string(), "--seed", "5", "design=4", "design.n_patients=6"}).code == 0);
  for (const char* f : {"dataset.cfg", "responses.csv", "patients.csv", "sites.csv", "truth.csv",
                        "truth_mu.csv", "graph_edges.csv", "graph_sites.csv"}) {
    INFO(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const fs::path c = scratch("sim_c");
  REQUIRE(cli({"simulate", "--out", c.string(), "--seed", "6", "design=4", "design.n_patients=6"}).code == 0);
  CHECK(slurp(a / "responses.csv") != slurp(c / "responses.csv"));
}

TEST_CASE("mean regression on the null-spatial design detects the largest effect") {
  const fs::path data = scratch("d1"), out = scratch("d1_fit");
  REQUIRE(cli({"simulate", "--out", data.string(), "--seed", "2", "design=1"}).code == 0);
  const Run r = cli({"fit", "--data", data.string(), "--out", out.string(), "variant=1",
                     "fit.n_iter=3000", "fit.burn_in=500"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("beta[x6]") != std::string::npos);
  const CsvTable summary = read_csv(out / "summary.csv");
  bool found = false;
  for (const auto& row : summary.rows) {
    if (row[0] != "beta[x6]") continue;
    found = true;
    CHECK(std::stod(row[3]) > 0.0);  // q2.5
  }
  CHECK(found);
  CHECK(fs::exists(out / "manifest.cfg"));
  CHECK(fs::exists(out / "draws.csv"));
}

TEST_CASE("a dataset breaking the all-or-nothing rule exits with the data code") {
  const fs::path data = scratch("bad");
  REQUIRE(cli({"simulate", "--out", data.string(), "--seed", "3", "design=5", "design.n_patients=4",
               "design.granularity=tooth"}).code == 0);
  std::string teeth = slurp(data / "teeth.csv");
  // Mark an observed tooth as missing while its responses stay in place.
  const auto pos = teeth.find(",1\n");
  REQUIRE(pos != std::string::npos);
  teeth.replace(pos, 3, ",0\n");
  write_atomic(data / "teeth.csv", teeth);
  const Run r = cli({"fit", "--data", data.string(), "--out", scratch("bad_fit").string(),
                     "fit.n_iter=20", "fit.burn_in=5"});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("tooth") != std::string::npos);
}

TEST_CASE("configuration errors exit with the config code and name the key") {
  const Run r = cli({"simulate", "--out", scratch("cfg").string(), "design.n_patient=3"});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("design.n_patient") != std::string::npos);
  const Run missing = cli({"fit", "fit.n_iter=10"});
  CHECK(missing.code == kExitConfig);
  CHECK(missing.err.find("out") != std::string::npos);
  CHECK(cli({"frobnicate"}).code == kExitConfig);
  CHECK(cli({"--version"}).code == kExitOk);
}

TEST_CASE("re-running from a manifest reproduces the fit") {
  const fs::path data = scratch("m_data"), a = scratch("m_a"), b = scratch("m_b");
  REQUIRE(cli({"simulate", "--out", data.string(), "--seed", "9", "design=5", "design.n_patients=8"}).code == 0);
  REQUIRE(cli({"fit", "--data", data.string(), "--out", a.string(), "--seed", "4", "variant=5",
               "fit.n_iter=150", "fit.burn_in=50", "--threads", "2"}).code == 0);
  REQUIRE(cli({"fit", "--config", (a / "manifest.cfg").string(), "--out", b.string()}).code == 0);
  for (const char* f : {"draws.csv", "summary.csv", "deviance.csv", "posterior_means.csv"})
    CHECK(slurp(a / f) == slurp(b / f));

  const fs::path diag = scratch("m_diag");
  const Run d = cli({"diagnose", "--chain", a.string(), "--out", diag.string()});
  REQUIRE(d.code == 0);
  CHECK(fs::exists(diag / "influence.csv"));
  CHECK(fs::exists(diag / "site_weights.csv"));
  CHECK_FALSE(fs::exists(diag / "dic.csv"));
  CHECK(slurp(diag / "diagnostics.cfg").find("dic=unsupported") != std::string::npos);
  CHECK(read_csv(diag / "influence.csv").rows.size() == 8);
}

TEST_CASE("diagnose reports DIC for a single-response fit without informative missingness") {
  const fs::path data = scratch("dic_data"), fit = scratch("dic_fit"), diag = scratch("dic_diag");
  REQUIRE(cli({"simulate", "--out", data.string(), "--seed", "1", "design=2", "design.n_patients=6"}).code == 0);
  REQUIRE(cli({"fit", "--data", data.string(), "--out", fit.string(), "variant=3", "fit.n_iter=200",
               "fit.burn_in=50"}).code == 0);
  const Run d = cli({"diagnose", "--chain", fit.string(), "--out", diag.string(), "diagnose.dic=on"});
  REQUIRE(d.code == 0);
  const CsvTable t = read_csv(diag / "dic.csv");
  REQUIRE(t.rows.size() == 1);
  CHECK(std::isfinite(std::stod(t.rows[0][0])));
  const fs::path mr = scratch("dic_mr");
  REQUIRE(cli({"fit", "--data", data.string(), "--out", mr.string(), "variant=1", "fit.n_iter=100",
               "fit.burn_in=10"}).code == 0);
  CHECK(cli({"diagnose", "--chain", mr.string(), "--out", scratch("dic_mr_d").string()}).code == kExitConfig);
}

TEST_CASE("a tiny simulation study writes its metrics") {
  const fs::path out = scratch("study");
  const Run r = cli({"sim-study", "--out", out.string(), "study.designs=4", "study.models=1,4",
                     "study.replicates=2", "study.n_iter=100", "study.burn_in=20"});
  REQUIRE(r.code == 0);
  CHECK(read_csv(out / "metrics.csv").rows.size() == 2);
  CHECK(fs::exists(out / "metrics.txt"));
  CHECK(fs::exists(out / "manifest.cfg"));
}

TEST_CASE("the installed binary maps errors to exit codes") {
  const char* bin = std::getenv("LSFM_CLI");
  if (!bin) {
    MESSAGE("LSFM_CLI not set; skipping binary checks");
    return;
  }
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  const std::string exe = std::string("\"") + bin + "\"";
  CHECK(status(exe + " --version") == 0);
  CHECK(status(exe + " simulate --out " + scratch("bin").string() + " bogus.key=1") == kExitConfig);
  CHECK(status(exe + " simulate --out " + scratch("bin2").string() + " design.n_patients=3") == kExitOk);
  CHECK(status(exe + " fit --data " + scratch("nowhere").string() + " --out " + scratch("bin3").string()) ==
        kExitData);
}
