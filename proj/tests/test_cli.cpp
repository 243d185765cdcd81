#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "tcclime/dataset_io.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tcclime_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(TCCLIME_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::size_t lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("simulate writes the default layout", "[cli]") {
  const auto dir = scratch("sim_default");
  REQUIRE(run("simulate --out " + (dir / "s").string(), dir / "log") == 0);
  const auto target = tcclime::read_dataset_csv((dir / "s" / "target.csv").string());
  CHECK(target.n() == 200);
  CHECK(target.p() == 100);
  for (int k = 1; k <= 5; ++k) {
    CHECK(fs::exists(dir / "s" / ("aux" + std::to_string(k) + ".csv")));
    CHECK(fs::exists(dir / "s" / ("sigma_aux" + std::to_string(k) + ".csv")));
  }
  const auto m = nlohmann::json::parse(slurp(dir / "s" / "manifest.json"));
  CHECK(m["informative"] == nlohmann::json::array({1, 2, 3}));
  CHECK(m["aux"].size() == 5);
  CHECK(m["aux"][3]["informative"] == false);
}

TEST_CASE("simulate honours sizes and reruns byte-identically", "[cli]") {
  const auto dir = scratch("sim_small");
  const std::string base = "simulate --p 12 --K 2 --n 50 --n-k 40 --informative 1 --seed 9 --out ";
  REQUIRE(run(base + (dir / "a").string(), dir / "log") == 0);
  REQUIRE(run(base + (dir / "b").string(), dir / "log") == 0);
  const auto t = tcclime::read_dataset_csv((dir / "a" / "target.csv").string());
  CHECK(t.p() == 12);
  CHECK(t.n() == 50);
  CHECK(tcclime::read_dataset_csv((dir / "a" / "aux2.csv").string()).n() == 40);
  CHECK(!fs::exists(dir / "a" / "aux3.csv"));
  for (const char* f : {"target.csv", "aux1.csv", "aux2.csv", "omega.csv", "manifest.json"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
}

TEST_CASE("estimate CC and CTC with sidecars", "[cli]") {
  const auto dir = scratch("estimate");
  const auto s = dir / "s";
  REQUIRE(run("simulate --p 12 --K 2 --n 90 --n-k 90 --informative 1,2 --transform exp --seed 4 --out " + s.string(),
              dir / "log") == 0);
  const std::string data = " --target " + (s / "target.csv").string() + " --aux " + (s / "aux1.csv").string() + "," +
                           (s / "aux2.csv").string();

  REQUIRE(run("estimate --method CC --no-cv --c-n 0.5" + data + " --out " + (dir / "cc.csv").string(), dir / "log") == 0);
  const auto cc = nlohmann::json::parse(slurp(dir / "cc.csv.json"));
  CHECK(cc["method"] == "CC");
  CHECK(cc["c_n"] == 0.5);
  CHECK(cc["lambda_delta"] == 0.0);
  CHECK(tcclime::read_matrix_csv((dir / "cc.csv").string()).rows() == 12);

  REQUIRE(run("estimate --method CTC --informative 1,2" + data + " --out " + (dir / "ctc.csv").string() +
                  " --cv-trace " + (dir / "trace.csv").string(),
              dir / "log") == 0);
  const auto ctc = nlohmann::json::parse(slurp(dir / "ctc.csv.json"));
  CHECK(ctc["cross_validated"] == true);
  CHECK(ctc["informative"] == nlohmann::json::array({1, 2}));
  CHECK(ctc["fold_estimation"].size() == 60);
  CHECK(ctc["fold_aggregation"].size() == 30);
  for (const char* stage : {"correlation", "step1_clime", "step2_delta_initial", "step2_delta_refine", "step3_transfer", "aggregation"})
    CHECK(ctc["stage_seconds"].contains(stage));
  CHECK(lines(dir / "trace.csv") == 1 + 6 * 6);

  SECTION("empty informative set is a usage error") {
    CHECK(run("estimate --method CTC" + data + " --out " + (dir / "x.csv").string(), dir / "log") == 2);
    CHECK(run("estimate --method TC  --informative ''" + data + " --out " + (dir / "x.csv").string(), dir / "log") == 2);
  }
  SECTION("roc subcommand") {
    REQUIRE(run("roc --estimate " + (dir / "ctc.csv").string() + " --truth " + (s / "omega.csv").string() + " --out " +
                    (dir / "roc.csv").string(),
                dir / "log") == 0);
    CHECK(slurp(dir / "log").rfind("auc=", 0) == 0);
    CHECK(slurp(dir / "roc.csv").rfind("threshold,fpr,tpr\n", 0) == 0);
  }
}

TEST_CASE("benchmark smoke suite is worker-count independent", "[cli]") {
  const auto dir = scratch("bench");
  const std::string base = "benchmark --methods CC,CTC --trials 3 --p 20 --n 60 --n-k 60 --K 2 --n-info 1 "
                           "--transforms exp --no-cv --c-n 0.5 --seed 5 --out ";
  REQUIRE(run(base + (dir / "one").string() + " --parallel 1", dir / "log") == 0);
  REQUIRE(run(base + (dir / "eight").string() + " --parallel 8", dir / "log") == 0);
  CHECK(lines(dir / "one" / "results.csv") == 1 + 6);
  for (const char* f : {"results.csv", "roc_mean.csv", "summary.csv", "manifest.json"})
    CHECK(slurp(dir / "one" / f) == slurp(dir / "eight" / f));
  const auto m = nlohmann::json::parse(slurp(dir / "one" / "manifest.json"));
  CHECK(m["cells"][0]["trial_seeds"].size() == 3);
  CHECK(m["failures"].empty());
}

TEST_CASE("config files and error exit codes", "[cli]") {
  const auto dir = scratch("config");
  {
    std::ofstream cfg(dir / "sim.cfg");
    cfg << "# small run\np = 10\nK = 1\ninformative = 1\nn = 30   # trailing comment\n";
  }
  REQUIRE(run("simulate --config " + (dir / "sim.cfg").string() + " --n 35 --out " + (dir / "s").string(),
              dir / "log") == 0);
  const auto t = tcclime::read_dataset_csv((dir / "s" / "target.csv").string());
  CHECK(t.p() == 10);
  CHECK(t.n() == 35);

  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "no_such_key = 3\n";
  }
  CHECK(run("simulate --config " + (dir / "bad.cfg").string(), dir / "log") == 2);
  CHECK(run("simulate --design wavy", dir / "log") == 2);
  CHECK(run("frobnicate", dir / "log") == 2);

  {
    std::ofstream bad(dir / "bad.csv");
    bad << "a,b,c\n1,2,3\n4,five,6\n";
  }
  CHECK(run("estimate --method CC --no-cv --target " + (dir / "bad.csv").string(), dir / "log") == 3);
  CHECK(slurp(dir / "log").find("row 3") != std::string::npos);
  CHECK(run("estimate --method CC --no-cv --target " + (dir / "missing.csv").string(), dir / "log") == 3);
}
