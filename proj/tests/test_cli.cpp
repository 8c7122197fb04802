// End-to-end checks of the command-line binary: exit codes, file outputs,
// and determinism.  The binary path comes from the build system.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "curstat/manifest.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = CURSTAT_CLI_PATH;

struct RunResult {
  int exit_code = -1;
  std::string out;  // stdout + stderr
};

RunResult run_cli(const std::string& args, const fs::path& scratch) {
  fs::path log = scratch / "run.log";
  std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream buf;
  buf << in.rdbuf();
  r.out = buf.str();
  return r;
}

fs::path make_scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("curstat_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p);
  out << body;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace

TEST_CASE("version flag prints artifact and schema versions") {
  auto scratch = make_scratch("version");
  auto r = run_cli("--version", scratch);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("curstat") != std::string::npos);
  CHECK(r.out.find("config schema") != std::string::npos);
}

TEST_CASE("unknown flags and subcommands exit 2") {
  auto scratch = make_scratch("badflag");
  CHECK(run_cli("simulate-rates --bogus", scratch).exit_code == 2);
  CHECK(run_cli("frobnicate", scratch).exit_code == 2);
  CHECK(run_cli("", scratch).exit_code == 2);  // a subcommand is required
}

TEST_CASE("mle1d on the four-observation example") {
  auto scratch = make_scratch("mle1d");
  write_file(scratch / "obs.csv", "t,delta\n1,0\n2,1\n3,0\n4,1\n");
  auto out = (scratch / "fit.csv").string();
  auto r = run_cli("mle1d -i " + (scratch / "obs.csv").string() + " -o " + out, scratch);
  REQUIRE(r.exit_code == 0);

  auto rows = read_csv(out);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == std::vector<std::string>{"knot", "fhat"});
  CHECK(rows[1] == std::vector<std::string>{"1", "0"});
  CHECK(rows[2] == std::vector<std::string>{"2", "0.5"});
  CHECK(rows[3] == std::vector<std::string>{"3", "0.5"});
  CHECK(rows[4] == std::vector<std::string>{"4", "1"});

  auto man = curstat::RunManifest::read(out + ".manifest.json");
  CHECK(man.command == "mle1d");
  CHECK(man.outputs == std::vector<std::string>{out});
}

TEST_CASE("mle1d single informative row") {
  auto scratch = make_scratch("mle1d_one");
  write_file(scratch / "obs.csv", "t,delta\n1,1\n");
  auto out = (scratch / "fit.csv").string();
  auto r = run_cli("mle1d -i " + (scratch / "obs.csv").string() + " -o " + out, scratch);
  REQUIRE(r.exit_code == 0);
  auto rows = read_csv(out);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1] == std::vector<std::string>{"1", "1"});
}

TEST_CASE("mle1d input errors exit 2") {
  auto scratch = make_scratch("mle1d_bad");
  write_file(scratch / "one_col.csv", "t\n1\n");
  auto out = (scratch / "fit.csv").string();
  CHECK(run_cli("mle1d -i " + (scratch / "one_col.csv").string() + " -o " + out,
                scratch).exit_code == 2);
  CHECK(run_cli("mle1d -i " + (scratch / "missing.csv").string() + " -o " + out,
                scratch).exit_code == 2);
  write_file(scratch / "empty.csv", "t,delta\n");
  CHECK(run_cli("mle1d -i " + (scratch / "empty.csv").string() + " -o " + out,
                scratch).exit_code == 2);
  write_file(scratch / "d2.csv", "t_1,t_2,delta_1,delta_2\n1,1,0,1\n");
  auto r = run_cli("mle1d -i " + (scratch / "d2.csv").string() + " -o " + out, scratch);
  CHECK(r.exit_code == 2);
  CHECK(r.out.find("dimension") != std::string::npos);
}

TEST_CASE("mled solves the disjoint pair and reports diagnostics") {
  auto scratch = make_scratch("mled");
  write_file(scratch / "obs.csv", "t_1,t_2,delta_1,delta_2\n1,1,1,1\n2,2,0,0\n");
  auto dir = (scratch / "out").string();
  auto r = run_cli("mled -i " + (scratch / "obs.csv").string() + " -o " + dir, scratch);
  REQUIRE(r.exit_code == 0);

  auto rows = read_csv(dir + "/weights.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"lo_1", "hi_1", "lo_2", "hi_2", "weight"});
  CHECK(rows[1][4] == "0.5");
  CHECK(rows[2][4] == "0.5");
  CHECK(rows[2][1] == "inf");

  auto diag = nlohmann::json::parse(read_file(dir + "/diagnostics.json"));
  CHECK(diag["converged"].get<bool>());
  CHECK(diag["n"].get<int>() == 2);
  CHECK(diag["d"].get<int>() == 2);
  CHECK(diag["support"].get<int>() == 2);
  CHECK(diag["gap"].get<double>() <= 1e-8);
}

TEST_CASE("mled exit 3 when the iteration cap cuts the solve short") {
  auto scratch = make_scratch("mled_cap");
  write_file(scratch / "obs.csv",
             "t_1,t_2,delta_1,delta_2\n1,1,1,1\n2,2,1,1\n0.5,3,0,1\n");
  auto dir = (scratch / "out").string();
  auto r = run_cli("mled -i " + (scratch / "obs.csv").string() + " -o " + dir +
                       " --max-iter 1", scratch);
  CHECK(r.exit_code == 3);
  auto diag = nlohmann::json::parse(read_file(dir + "/diagnostics.json"));
  CHECK_FALSE(diag["converged"].get<bool>());

  auto r2 = run_cli("mled -i " + (scratch / "obs.csv").string() + " -o " + dir, scratch);
  CHECK(r2.exit_code == 0);
}

TEST_CASE("mled outputs repeat bitwise") {
  auto scratch = make_scratch("mled_det");
  write_file(scratch / "obs.csv",
             "t_1,t_2,delta_1,delta_2\n0.3,0.8,1,0\n0.6,0.2,0,1\n0.9,0.5,1,1\n0.4,0.4,0,0\n");
  auto d1 = (scratch / "a").string(), d2 = (scratch / "b").string();
  REQUIRE(run_cli("mled -i " + (scratch / "obs.csv").string() + " -o " + d1, scratch)
              .exit_code == 0);
  REQUIRE(run_cli("mled -i " + (scratch / "obs.csv").string() + " -o " + d2, scratch)
              .exit_code == 0);
  CHECK(read_file(d1 + "/weights.csv") == read_file(d2 + "/weights.csv"));
  CHECK(read_file(d1 + "/diagnostics.json") == read_file(d2 + "/diagnostics.json"));
}

TEST_CASE("simulate-rates smoke ladder from a text config") {
  auto scratch = make_scratch("rates_smoke");
  write_file(scratch / "bench.cfg",
             "# two-rung smoke ladder\nd = 1\nladder = 20,40\nreplications = 2\n");
  auto dir = (scratch / "out").string();
  auto r = run_cli("simulate-rates -c " + (scratch / "bench.cfg").string() +
                       " -o " + dir, scratch);
  REQUIRE(r.exit_code == 0);

  auto rows = read_csv(dir + "/rates.csv");
  REQUIRE(rows.size() == 5);  // header + 2 sizes x 2 reps
  CHECK(rows[0] == std::vector<std::string>{"n", "rep", "seed", "hellinger", "l2",
                                            "iters", "gap", "converged", "wall_ms"});
  CHECK(rows[1][0] == "20");
  CHECK(rows[3][0] == "40");
  CHECK(rows[1][7] == "1");  // exact solver converges

  auto fit = nlohmann::json::parse(read_file(dir + "/rate_fit.json"));
  CHECK(fit["d"].get<int>() == 1);
  CHECK(fit["medians"].size() == 2);
  CHECK_FALSE(fit.contains("pure_power"));  // below the three-rung minimum

  auto man = curstat::RunManifest::read(dir + "/manifest.json");
  CHECK(man.command == "simulate-rates");
  CHECK(man.config.at("ladder") == "20,40");
  CHECK(man.config.at("replications") == "2");
  CHECK(man.config.at("d") == "1");
}

TEST_CASE("simulate-rates accepts the same config as JSON") {
  auto scratch = make_scratch("rates_json");
  write_file(scratch / "bench.cfg", "d = 1\nladder = 20,40\nreplications = 2\n");
  write_file(scratch / "bench.json",
             R"({"d": 1, "ladder": "20,40", "replications": 2})");
  auto d1 = (scratch / "a").string(), d2 = (scratch / "b").string();
  REQUIRE(run_cli("simulate-rates -c " + (scratch / "bench.cfg").string() + " -o " + d1,
                  scratch).exit_code == 0);
  REQUIRE(run_cli("simulate-rates -c " + (scratch / "bench.json").string() + " -o " + d2,
                  scratch).exit_code == 0);
  CHECK(read_file(d1 + "/rates.csv") == read_file(d2 + "/rates.csv"));
  CHECK(read_file(d1 + "/rate_fit.json") == read_file(d2 + "/rate_fit.json"));
}

TEST_CASE("simulate-rates replays its own manifest") {
  auto scratch = make_scratch("rates_replay");
  auto d1 = (scratch / "a").string(), d2 = (scratch / "b").string();
  REQUIRE(run_cli("simulate-rates --dimension 1 --ladder 25,50 --seed 99 -o " + d1,
                  scratch).exit_code == 0);
  REQUIRE(run_cli("simulate-rates -c " + d1 + "/manifest.json -o " + d2, scratch)
              .exit_code == 0);
  CHECK(read_file(d1 + "/rates.csv") == read_file(d2 + "/rates.csv"));
  CHECK(read_file(d1 + "/rate_fit.json") == read_file(d2 + "/rate_fit.json"));
  auto man = curstat::RunManifest::read(d2 + "/manifest.json");
  CHECK(man.seed == 99);
}

TEST_CASE("simulate-rates flag overrides beat the config file") {
  auto scratch = make_scratch("rates_override");
  write_file(scratch / "bench.cfg",
             "d = 1\nladder = 20,40\nreplications = 2\nseed = 7\n");
  auto dir = (scratch / "out").string();
  REQUIRE(run_cli("simulate-rates -c " + (scratch / "bench.cfg").string() +
                      " --seed 8 --ladder 30,60 -o " + dir, scratch).exit_code == 0);
  auto man = curstat::RunManifest::read(dir + "/manifest.json");
  CHECK(man.seed == 8);
  CHECK(man.config.at("ladder") == "30,60");
  auto rows = read_csv(dir + "/rates.csv");
  CHECK(rows[1][0] == "30");
}

TEST_CASE("simulate-rates rejects unknown config keys by name") {
  auto scratch = make_scratch("rates_badkey");
  write_file(scratch / "bench.cfg", "d = 1\nladder = 20,40\nwibble = 3\n");
  auto r = run_cli("simulate-rates -c " + (scratch / "bench.cfg").string() + " -o " +
                       (scratch / "out").string(), scratch);
  CHECK(r.exit_code == 2);
  CHECK(r.out.find("wibble") != std::string::npos);
}

TEST_CASE("validate-appendix runs reduced-draw suite and writes results") {
  auto scratch = make_scratch("validate");
  auto dir = (scratch / "out").string();
  auto r = run_cli("validate-appendix --draws 20000 -o " + dir, scratch);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("pass") != std::string::npos);
  CHECK(r.out.find("fail\n") == std::string::npos);

  auto doc = nlohmann::json::parse(read_file(dir + "/appendix_results.json"));
  CHECK(doc["all_pass"].get<bool>());
  CHECK(doc["checks"].size() >= 30);

  auto rj = run_cli("validate-appendix --draws 20000 --json -o " + dir, scratch);
  REQUIRE(rj.exit_code == 0);
  auto printed = nlohmann::json::parse(rj.out);
  CHECK(printed["all_pass"].get<bool>());
}
