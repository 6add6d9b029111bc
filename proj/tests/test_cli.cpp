#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "bvsmiss/cli.hpp"
#include "bvsmiss/io.hpp"

namespace fs = std::filesystem;
using bvsmiss::RunConfig;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("bvsmiss_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI binary with stdout and stderr discarded; returns its exit code.
int cli(const std::string& args) {
  const char* bin = std::getenv("BVSMISS_CLI");
  REQUIRE(bin != nullptr);
  const std::string cmd = std::string(bin) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string path(const std::string& name) { return (scratch() / name).string(); }

// Simulated dataset shared by the tests below.
std::string small_data() {
  static const std::string csv = [] {
    const std::string out = path("sim");
    REQUIRE(cli("simulate --seed 5 --n 40 --p 3 --rate 0.15 --out " + out) == 0);
    return out + "/data.csv";
  }();
  return csv;
}

}  // namespace

TEST_CASE("config round-trips through JSON") {
  RunConfig c;
  c.subcommand = "mcmc";
  c.seed = 17;
  c.g = 0.25;
  c.sampler = "gibbs";
  c.sim_sigma = {{1.0, 0.3}, {0.3, 2.0}};
  c.sim_mu = {0.1, -0.2};
  c.stream_mode = "fresh";
  CHECK(bvsmiss::config_from_json(bvsmiss::config_to_json(c)) == c);
  CHECK(bvsmiss::config_from_json(nlohmann::json::object()) == RunConfig{});
  CHECK_THROWS(bvsmiss::config_from_json(nlohmann::json{{"no_such_field", 1}}));
}

TEST_CASE("missing seed is a usage error") {
  CHECK(cli("simulate --n 10 --p 2 --out " + path("noseed")) == 2);
  CHECK(cli("--seed 1") == 2);
}

TEST_CASE("identical seeds give byte-identical outputs") {
  const std::string data = small_data();
  for (const std::string sub : {"enumerate --variant imputation --J 200", "mcmc --sampler sias --J 100 --iterations 400 --burnin 50"}) {
    const std::string a = path("det_a"), b = path("det_b");
    fs::remove_all(a);
    fs::remove_all(b);
    REQUIRE(cli(sub + " --seed 3 --input " + data + " --out " + a) == 0);
    REQUIRE(cli(sub + " --seed 3 --threads 1 --input " + data + " --out " + b) == 0);
    for (const auto& e : fs::directory_iterator(a)) {
      const std::string name = e.path().filename().string();
      if (name == "config.json") continue;
      CHECK_MESSAGE(bvsmiss::read_text_file(e.path().string()) == bvsmiss::read_text_file(b + "/" + name), name);
    }
  }
}

TEST_CASE("config file is read first and flags override it") {
  const std::string cfg = path("cfg.json");
  bvsmiss::write_text_file(cfg, R"({"subcommand": "simulate", "seed": 4, "simulate": {"n": 12, "p": 2}})");
  const std::string out = path("cfg_out");
  REQUIRE(cli("simulate --config " + cfg + " --n 15 --out " + out) == 0);
  const auto written = bvsmiss::config_from_json(nlohmann::json::parse(bvsmiss::read_text_file(out + "/config.json")));
  CHECK(written.sim_n == 15);
  CHECK(written.sim_p == 2);
  CHECK(written.seed == std::uint64_t{4});
  // the written config reproduces the run
  const std::string again = path("cfg_again");
  REQUIRE(cli("simulate --config " + out + "/config.json --out " + again) == 0);
  CHECK(bvsmiss::read_text_file(out + "/data.csv") == bvsmiss::read_text_file(again + "/data.csv"));

  bvsmiss::write_text_file(cfg, R"({"bogus": 1})");
  CHECK(cli("simulate --seed 1 --config " + cfg) == 2);
}

TEST_CASE("enumeration above the cap is refused") {
  const std::string out = path("p16");
  REQUIRE(cli("simulate --seed 2 --n 40 --p 16 --out " + out) == 0);
  CHECK(cli("enumerate --seed 1 --input " + out + "/data.csv --out " + path("p16_enum")) == 3);
}

TEST_CASE("bad arguments") {
  const std::string data = small_data();
  CHECK(cli("mcmc --seed 1 --sampler metropolis --input " + data + " --out " + path("bad")) == 2);
  CHECK(cli("graph-select --seed 1 --collapsed --input " + data + " --out " + path("bad")) != 0);
  CHECK(cli("benchmark --seed 1 --reps 1 --input " + data + " --out " + path("bad")) == 2);
  CHECK(cli("enumerate --seed 1 --input " + path("does_not_exist.csv") + " --out " + path("bad")) == 1);
}

TEST_CASE("benchmark and graph-select outputs") {
  const std::string data = small_data();
  const std::string out = path("bench");
  REQUIRE(cli("benchmark --seed 1 --reps 2 --bench-j 5 --variant imputation --input " + data + " --out " + out) == 0);
  const std::string csv = bvsmiss::read_text_file(out + "/benchmark.csv");
  CHECK(csv.substr(0, csv.find('\n')).find("gamma") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);  // header and 8 models

  const std::string g = path("graph");
  REQUIRE(cli("graph-select --seed 1 --graph-iterations 500 --graph-burnin 50 --input " + data + " --out " + g) == 0);
  CHECK(fs::exists(g + "/edges.csv"));
  CHECK(fs::exists(g + "/graphs.json"));
}
