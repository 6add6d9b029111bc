#pragma once

// Batch front end. A run is fully described by a RunConfig; the JSON form
// written to <out>/config.json parses back to the same config.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace bvsmiss {

struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string na_token = "NA";
  std::string response = "y";
  std::string output_dir = "out";
  std::optional<std::uint64_t> seed;
  int threads = 0;  // 0 leaves the OpenMP default

  std::string variant = "classical";
  std::optional<double> g;  // unset: n (classical, imputation) or 1/n (induced)
  std::string model_prior = "uniform";
  double bb_a = 1.0;
  double bb_b = 1.0;

  int stream_j = 1000;
  int stream_burnin = 200;
  int stream_thin = 1;
  std::string stream_mode = "shared";
  bool jeffreys = false;

  std::string sampler = "sias";  // its | sias | gibbs
  int iterations = 10000;
  int burnin = 1000;
  int thin = 1;
  std::string proposal = "single-flip";  // or add-delete-swap
  double w_add = 0.4;
  double w_delete = 0.4;
  double w_swap = 0.2;
  int chains = 1;
  int p_max = 15;

  bool collapsed = false;
  int graph_iterations = 20000;
  int graph_burnin = 2000;
  std::optional<double> graph_g;  // unset: 1/n
  std::string graph_prior = "uniform";  // or edge-bernoulli
  double graph_rho = 0.5;
  int max_vertices = 8;

  int reps = 200;
  int bench_j = 25;

  int sim_n = 100;
  int sim_p = 3;
  std::vector<double> sim_mu;                  // empty: zeros
  std::vector<std::vector<double>> sim_sigma;  // empty: sim_rho^|i-j|
  double sim_rho = 0.0;
  std::vector<double> sim_beta;  // empty: 1 for the first two covariates
  double sim_alpha = 0.0;
  double sim_sigma2 = 1.0;
  std::string sim_mechanism = "mcar";  // or mar
  double sim_rate = 0.0;
  int sim_driver = 0;
  double sim_intercept = 0.0;
  double sim_slope = 1.0;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

nlohmann::json config_to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);

/// Executes one configured run and returns the process exit code.
int run(const RunConfig& cfg);

/// Parses arguments (config file first, flags override) and runs.
int cli_main(int argc, char** argv);

}  // namespace bvsmiss
