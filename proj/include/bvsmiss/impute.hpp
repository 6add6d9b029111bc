#pragma once

// Posterior simulation of nu = (mu, Sigma) given the observed covariates
// by data augmentation, and imputation of the missing cells.
//
// One augmentation sweep draws nu | X_completed from its conjugate
// posterior and then every missing block from its conditional normal given
// the row's observed cells and nu. The retained pair (nu, X_miss) is
// therefore a draw from p(nu, X_miss | X_obs) once the chain is stationary.
// The response is never read.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "bvsmiss/datamodel.hpp"
#include "bvsmiss/gauss.hpp"

namespace bvsmiss {

using NuDraw = MvnDraw;

struct MissingCell {
  Index row;
  Index col;
};

/// Missing cells in row-major order; ImputationDraw::x_miss is aligned
/// with this list.
std::vector<MissingCell> missing_cells(const Dataset& d);

struct ImputationDraw {
  NuDraw nu;
  VectorXd x_miss;
};

/// d.x with the missing cells filled from x_miss.
MatrixXd complete_matrix(const Dataset& d, const VectorXd& x_miss);

enum class StreamMode { shared, fresh };

struct StreamConfig {
  int j = 1000;
  int burnin = 200;
  int thin = 1;
  StreamMode mode = StreamMode::shared;
  /// Jeffreys prior |Sigma|^{-(p+1)/2}; requires n > p.
  bool jeffreys = false;
  /// NIW prior on nu; unset means default_niw_prior(d).
  std::optional<NiwParams> prior;
  std::uint64_t seed = 1;

  void validate() const;
};

/// m0 = observed column means, k0 = 0.01, v0 = p + 2, S0 = diag of the
/// observed column variances (1 for a constant column).
NiwParams default_niw_prior(const Dataset& d);

/// The configured prior on nu; unset means Jeffreys.
std::optional<NiwParams> nu_prior(const Dataset& d, const StreamConfig& cfg);

/// Conjugate posterior of nu given completed rows x.
NiwParams nu_posterior(const MatrixXd& x, const std::optional<NiwParams>& prior);

/// Markov chain over (nu, X_miss).
class DataAugmentation {
 public:
  DataAugmentation(const Dataset& d, const StreamConfig& cfg, std::uint64_t seed);

  /// nu | X_completed, then X_miss | X_obs, nu.
  void sweep();
  /// Replaces the missing cells of the current completion with those of
  /// x_completed; the next sweep starts from there.
  void restart(const MatrixXd& x_completed);

  const NuDraw& nu() const { return nu_; }
  const MatrixXd& completed() const { return x_; }
  VectorXd x_miss() const;
  ImputationDraw current() const { return {nu_, x_miss()}; }

 private:
  NuDraw draw_nu();
  void impute();

  const Dataset* data_;
  std::vector<MissingnessPattern> patterns_;
  std::vector<MissingCell> cells_;
  std::optional<NiwParams> prior_;
  Rng rng_;
  MatrixXd x_;
  NuDraw nu_;
};

std::vector<NuDraw> da_gibbs_nu(const Dataset& d, const StreamConfig& cfg);

/// Fills each missing block from its conditional normal given nu.
ImputationDraw draw_x_miss(const Dataset& d, const NuDraw& nu, Rng& rng);

/// Uncentered regression y = intercept + x_gamma' beta + N(0, sigma2).
struct RegressionCoefficients {
  double intercept = 0.0;
  VectorXd beta;  // length gamma.size(), in gamma.indices() order
  double sigma2 = 1.0;
};

/// Missing blocks drawn from the conditional normal combined with the
/// regression likelihood of y_i (a rank-one precision update on the
/// coordinates in gamma; coordinates outside gamma enter only through their
/// correlation with those).
ImputationDraw draw_x_miss_given_y(const Dataset& d, const NuDraw& nu, const ModelIndex& gamma,
                                   const RegressionCoefficients& coeffs, Rng& rng);

/// Log density of the missing cells of x_completed under the law sampled
/// by draw_x_miss_given_y.
double log_density_x_miss_given_y(const Dataset& d, const MatrixXd& x_completed,
                                  const NuDraw& nu, const ModelIndex& gamma,
                                  const RegressionCoefficients& coeffs);

struct DrawSet {
  std::vector<ImputationDraw> draws;
  std::vector<MatrixXd> completed;
};

/// Runs one augmentation chain (burnin, thin) and keeps j draws.
DrawSet run_stream_chain(const Dataset& d, const StreamConfig& cfg, std::uint64_t seed);

/// Shared mode serves one materialized draw list to every model; fresh mode
/// derives a per-model list from derive_seed(seed, gamma bits).
class ImputationStream {
 public:
  ImputationStream(Dataset d, StreamConfig cfg);

  const Dataset& data() const { return data_; }
  const StreamConfig& config() const { return cfg_; }
  StreamMode mode() const { return cfg_.mode; }

  std::shared_ptr<const DrawSet> draws_for(const ModelIndex& gamma) const;
  /// The shared draw list (generated on construction in shared mode).
  std::shared_ptr<const DrawSet> shared_draws() const { return shared_; }

 private:
  Dataset data_;
  StreamConfig cfg_;
  std::shared_ptr<const DrawSet> shared_;
};

ImputationStream make_stream(const Dataset& d, const StreamConfig& cfg);

/// Writes one CSV per draw (completed X, header = covariate names) as
/// <prefix><j>.csv; returns the paths.
std::vector<std::string> export_draws_csv(const Dataset& d, const DrawSet& draws,
                                          const std::string& prefix);

}  // namespace bvsmiss
