#pragma once

// Model-space inference over covariate subsets.
//
// Missing-data samplers
// ---------------------
// All three target p(gamma | y, X_obs), proportional to
// pi(gamma) E[m(y | X_completed, gamma, nu)] with the expectation over
// p(nu, X_miss | X_obs), i.e. the normalization of the Rao-Blackwellized
// marginal used by enumerate_models.
//
// sias_embedded proposes (gamma*, nu*, X_miss*) with nu*, X_miss* taken
// from a separately running augmentation chain. If that proposal were an
// exact draw from p(nu, X_miss | X_obs), its density would cancel the
// matching factor of the joint target, leaving
//
//   r = m(y | X*, gamma*, nu*) pi(gamma*) q(gamma | gamma*)
//       / [m(y | X, gamma, nu) pi(gamma) q(gamma* | gamma)].
//
// The chain supplies one thinned sweep per iteration, so the cancellation
// holds only approximately (exactly at infinite thinning).
//
// gibbs_informed runs, per sweep: (1) collapsed MH on gamma given the
// completed X; (2) (intercept, beta, sigma^2) from their conjugate
// conditional; (3) nu | X_completed by conjugate proposal; (4) X_miss by an
// MH step whose proposal is draw_x_miss_given_y. Steps (3) and (4) carry an
// MH correction because the g-prior on beta depends on Sigma (imputation
// variant) or on X_completed (classical and induced variants); with those
// corrections every step leaves the joint posterior invariant.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bvsmiss/datamodel.hpp"
#include "bvsmiss/impute.hpp"
#include "bvsmiss/priors.hpp"

namespace bvsmiss {

enum class ExecPolicy { serial, parallel };

struct RbEstimate {
  double log_mhat = -std::numeric_limits<double>::infinity();
  double mc_se = std::numeric_limits<double>::infinity();
  int j_used = 0;
  bool degenerate = false;
};

/// log of (1/J) sum_j m_j by log-sum-exp, with a batch-means standard error
/// of the log (delta method). J = 1 reports mc_se = +inf.
RbEstimate rb_from_log_terms(const std::vector<double>& log_terms);

/// Per-draw complete-data log marginals of one model over a draw set.
std::vector<double> per_draw_log_marginals(const ModelIndex& gamma, const VectorXd& y,
                                           const DrawSet& draws, const GPrior& variant,
                                           ExecPolicy policy = ExecPolicy::serial);

RbEstimate rb_marginal(const ModelIndex& gamma, const Dataset& d, const ImputationStream& stream,
                       const GPrior& variant, ExecPolicy policy = ExecPolicy::serial);

enum class EstimateMethod { enumerated, frequency, renormalized };
std::string method_name(EstimateMethod m);

struct ModelEntry {
  ModelIndex gamma;
  double log_marginal = 0.0;
  double log_prior = 0.0;
  double prob = 0.0;
  /// Monte Carlo s.e. of prob. Enumeration propagates the per-model
  /// log-marginal errors by the delta method as if independent.
  double mc_se = 0.0;
  double log_marginal_se = 0.0;
};

struct PosteriorSummary {
  int p = 0;
  EstimateMethod method = EstimateMethod::enumerated;
  std::vector<ModelEntry> models;
  VectorXd inclusion;
  VectorXd inclusion_se;  // empty unless the estimator provides one

  double total_prob() const;
  /// Highest probability; ties go to the lexicographically smallest gamma.
  const ModelEntry& modal() const;
  double prob_of(const ModelIndex& gamma) const;
};

/// Normalizes entries' log_marginal + log_prior and fills probabilities and
/// inclusion probabilities.
PosteriorSummary normalize_models(std::vector<ModelEntry> entries, int p, EstimateMethod method);

PosteriorSummary enumerate_models(const Dataset& d, const ImputationStream& stream,
                                  const GPrior& variant, const ModelPrior& model_prior,
                                  int p_max_check = 20, ExecPolicy policy = ExecPolicy::parallel);

/// Complete-data enumeration with exact marginals (Sigma needed only for
/// the imputation variant).
PosteriorSummary enumerate_complete(const VectorXd& y, const MatrixXd& x, const GPrior& variant,
                                    const ModelPrior& model_prior, const SpdMatrix* sigma = nullptr,
                                    ExecPolicy policy = ExecPolicy::parallel);

struct ProposalKernel {
  enum class Kind { single_flip, add_delete_swap };
  Kind kind = Kind::single_flip;
  double w_add = 0.4;
  double w_delete = 0.4;
  double w_swap = 0.2;

  void validate() const;
};

struct ModelProposal {
  ModelIndex gamma;
  double log_q_ratio = 0.0;  // log q(current | proposed) - log q(proposed | current)
};

/// One draw from the proposal; impossible moves return the current model.
ModelProposal propose_model(const ModelIndex& gamma, const ProposalKernel& kernel, Rng& rng);

/// log of the MH acceptance ratio for a proposal.
double log_acceptance(double log_target_current, double log_target_proposed, double log_q_ratio);

struct McmcConfig {
  int iterations = 10000;
  int burnin = 1000;
  int thin = 1;
  ProposalKernel proposal;
  ModelPrior model_prior;
  std::uint64_t seed = 1;
  int chains = 1;
  /// Starting model; unset starts at the null model.
  std::optional<ModelIndex> start;

  void validate() const;
};

struct ChainOutput {
  int p = 0;
  std::vector<ModelIndex> visited;
  std::vector<double> log_marginal;  // per retained visit
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;
  std::string sampler;
};

ChainOutput mc3_complete(const VectorXd& y, const MatrixXd& x, const McmcConfig& cfg,
                         const GPrior& variant, const SpdMatrix* sigma = nullptr);

struct ItsResult {
  PosteriorSummary summary;
  std::vector<ChainOutput> chains;
};

/// Draws J completed datasets from a shared stream, runs mc3_complete on
/// each (chain j seeded with derive_seed(mcmc.seed, j)) and averages the
/// per-dataset frequency estimates with equal weights.
ItsResult its_two_stage(const Dataset& d, const StreamConfig& stream_cfg, const McmcConfig& cfg,
                        const GPrior& variant, ExecPolicy policy = ExecPolicy::parallel);

ChainOutput sias_embedded(const Dataset& d, const McmcConfig& cfg, const StreamConfig& impute_cfg,
                          const GPrior& variant);

ChainOutput gibbs_informed(const Dataset& d, const McmcConfig& cfg, const StreamConfig& impute_cfg,
                           const GPrior& variant);

using MarginalProvider = std::function<double(const ModelIndex&)>;

/// Frequency: visit relative frequencies. Renormalized: normalization of
/// marginal x prior over the distinct visited models; marginals come from
/// `marginals` when given, otherwise from the chain's first recorded value.
PosteriorSummary estimate_probs(const ChainOutput& chain, EstimateMethod method,
                                const ModelPrior& model_prior,
                                const MarginalProvider& marginals = {});

/// Equal-weight average of several summaries (models matched by gamma).
PosteriorSummary pool_summaries(const std::vector<PosteriorSummary>& parts, int p,
                                EstimateMethod method);

double total_variation(const PosteriorSummary& a, const PosteriorSummary& b);

/// Batch-means standard error of the mean of a series.
double batch_means_se(const std::vector<double>& series);
/// Effective sample size from initial positive autocorrelation pairs.
double effective_sample_size(const std::vector<double>& series);

struct BenchmarkRow {
  ModelIndex gamma;
  double mean_shared = 0.0;
  double mean_fresh = 0.0;
  double var_shared = 0.0;
  double var_fresh = 0.0;
  double ratio = 0.0;  // var_shared / var_fresh; NaN when both are zero
};

struct BenchmarkReport {
  int reps = 0;
  int j = 0;
  std::vector<BenchmarkRow> rows;
};

/// reps independent shared and fresh streams (replicate r seeded with
/// derive_seed(base.seed, r)); per-model empirical variance of the
/// enumerated posterior probabilities.
BenchmarkReport variance_benchmark(const Dataset& d, int reps, int j, const GPrior& variant,
                                   const ModelPrior& model_prior, const StreamConfig& base,
                                   ExecPolicy policy = ExecPolicy::parallel);

}  // namespace bvsmiss
