#include "bvsmiss/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "bvsmiss/error.hpp"
#include "parallel.hpp"

namespace bvsmiss {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& v, double* max_out = nullptr) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (max_out) *max_out = m;
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Always consumes exactly one uniform so samplers sharing a seed stay in
// lockstep regardless of the outcome.
bool mh_accept(double log_ratio, Rng& rng) {
  const double u = rng.uniform();
  return log_ratio >= 0.0 || std::log(u) < log_ratio;
}

void check_p(int p) {
  if (p < 0 || p > ModelIndex::kMaxVariables) throw ContractError("unsupported number of covariates");
}

bool recorded(int it, const McmcConfig& cfg) {
  return it >= cfg.burnin && (it - cfg.burnin + 1) % cfg.thin == 0;
}

ModelIndex start_model(const McmcConfig& cfg, int p) {
  if (!cfg.start) return ModelIndex::null_model(p);
  if (cfg.start->p() != p) throw ContractError("starting model has the wrong number of covariates");
  return *cfg.start;
}

void sort_entries(std::vector<ModelEntry>& e) {
  std::sort(e.begin(), e.end(),
            [](const ModelEntry& a, const ModelEntry& b) { return lex_less(a.gamma, b.gamma); });
}

VectorXd weighted_inclusion(const std::vector<ModelEntry>& e, int p) {
  VectorXd inc = VectorXd::Zero(p);
  for (const auto& m : e)
    for (int k = 0; k < p; ++k)
      if (m.gamma.contains(k)) inc(k) += m.prob;
  return inc;
}

// Delta-method s.e. of normalized probabilities from per-model log errors.
void fill_prob_se(std::vector<ModelEntry>& e) {
  double cross = 0.0;
  bool cross_inf = false;
  for (const auto& m : e) {
    if (m.prob == 0.0) continue;
    if (!std::isfinite(m.log_marginal_se)) cross_inf = true;
    else cross += m.prob * m.prob * m.log_marginal_se * m.log_marginal_se;
  }
  for (auto& m : e) {
    if (m.prob == 0.0) {
      m.mc_se = 0.0;
      continue;
    }
    if (cross_inf) {
      m.mc_se = kInf;
      continue;
    }
    const double s2 = m.log_marginal_se * m.log_marginal_se;
    const double own = (1.0 - m.prob) * (1.0 - m.prob) * s2;
    const double others = cross - m.prob * m.prob * s2;
    m.mc_se = m.prob * std::sqrt(std::max(0.0, own + others));
  }
}

}  // namespace

RbEstimate rb_from_log_terms(const std::vector<double>& log_terms) {
  RbEstimate out;
  out.j_used = static_cast<int>(log_terms.size());
  if (log_terms.empty()) throw ContractError("rb estimate needs at least one draw");
  double m = kNegInf;
  const double lse = log_sum_exp(log_terms, &m);
  if (m == kNegInf) {
    out.degenerate = true;
    return out;
  }
  const double j = static_cast<double>(log_terms.size());
  out.log_mhat = lse - std::log(j);
  if (log_terms.size() == 1) {
    out.mc_se = kInf;
    return out;
  }
  std::vector<double> w(log_terms.size());
  double mean = 0.0;
  bool constant = true;
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = std::exp(log_terms[k] - m);
    mean += w[k];
    if (log_terms[k] != log_terms[0]) constant = false;
  }
  mean /= j;
  out.mc_se = constant ? 0.0 : batch_means_se(w) / mean;
  return out;
}

std::vector<double> per_draw_log_marginals(const ModelIndex& gamma, const VectorXd& y,
                                           const DrawSet& draws, const GPrior& variant,
                                           ExecPolicy policy) {
  std::vector<double> out(draws.completed.size());
  detail::for_each_index(out.size(), policy, [&](std::size_t k) {
    out[k] = log_marginal(y, draws.completed[k], gamma, variant, &draws.draws[k].nu.sigma);
  });
  return out;
}

RbEstimate rb_marginal(const ModelIndex& gamma, const Dataset& d, const ImputationStream& stream,
                       const GPrior& variant, ExecPolicy policy) {
  const auto draws = stream.draws_for(gamma);
  return rb_from_log_terms(per_draw_log_marginals(gamma, d.y, *draws, variant, policy));
}

std::string method_name(EstimateMethod m) {
  switch (m) {
    case EstimateMethod::enumerated: return "enumerated";
    case EstimateMethod::frequency: return "frequency";
    case EstimateMethod::renormalized: return "renormalized";
  }
  return "?";
}

double PosteriorSummary::total_prob() const {
  double s = 0.0;
  for (const auto& m : models) s += m.prob;
  return s;
}

const ModelEntry& PosteriorSummary::modal() const {
  if (models.empty()) throw ContractError("empty posterior summary");
  const ModelEntry* best = &models.front();
  for (const auto& m : models) {
    if (m.prob > best->prob || (m.prob == best->prob && lex_less(m.gamma, best->gamma))) best = &m;
  }
  return *best;
}

double PosteriorSummary::prob_of(const ModelIndex& gamma) const {
  for (const auto& m : models)
    if (m.gamma == gamma) return m.prob;
  return 0.0;
}

PosteriorSummary normalize_models(std::vector<ModelEntry> entries, int p, EstimateMethod method) {
  if (entries.empty()) throw ContractError("no models to normalize");
  std::vector<double> lt(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) lt[k] = entries[k].log_marginal + entries[k].log_prior;
  const double z = log_sum_exp(lt);
  if (z == kNegInf) throw DomainError("every model has zero marginal likelihood");
  for (std::size_t k = 0; k < entries.size(); ++k) entries[k].prob = std::exp(lt[k] - z);
  sort_entries(entries);
  PosteriorSummary out;
  out.p = p;
  out.method = method;
  out.inclusion = weighted_inclusion(entries, p);
  out.models = std::move(entries);
  return out;
}

PosteriorSummary enumerate_models(const Dataset& d, const ImputationStream& stream,
                                  const GPrior& variant, const ModelPrior& model_prior,
                                  int p_max_check, ExecPolicy policy) {
  const int p = static_cast<int>(d.p());
  if (p > p_max_check) {
    throw ContractError("p = " + std::to_string(p) + " exceeds the enumeration cap of " +
                        std::to_string(p_max_check) + "; use mcmc instead");
  }
  check_p(p);
  variant.validate(d.n());
  const std::size_t count = std::size_t{1} << p;
  std::vector<ModelEntry> entries(count);
  detail::for_each_index(count, policy, [&](std::size_t b) {
    const ModelIndex gamma(b, p);
    const RbEstimate rb = rb_marginal(gamma, d, stream, variant, ExecPolicy::serial);
    entries[b] = {gamma, rb.log_mhat, log_model_prior(gamma, model_prior, p), 0.0, 0.0, rb.mc_se};
  });
  PosteriorSummary out = normalize_models(std::move(entries), p, EstimateMethod::enumerated);
  fill_prob_se(out.models);
  return out;
}

PosteriorSummary enumerate_complete(const VectorXd& y, const MatrixXd& x, const GPrior& variant,
                                    const ModelPrior& model_prior, const SpdMatrix* sigma,
                                    ExecPolicy policy) {
  const int p = static_cast<int>(x.cols());
  check_p(p);
  if (p > 30) throw ContractError("model space too large to enumerate");
  variant.validate(y.size());
  const std::size_t count = std::size_t{1} << p;
  std::vector<ModelEntry> entries(count);
  detail::for_each_index(count, policy, [&](std::size_t b) {
    const ModelIndex gamma(b, p);
    entries[b] = {gamma, log_marginal(y, x, gamma, variant, sigma),
                  log_model_prior(gamma, model_prior, p), 0.0, 0.0, 0.0};
  });
  return normalize_models(std::move(entries), p, EstimateMethod::enumerated);
}

void ProposalKernel::validate() const {
  if (kind == Kind::single_flip) return;
  if (w_add < 0.0 || w_delete < 0.0 || w_swap < 0.0)
    throw ContractError("proposal weights must be non-negative");
  if (std::abs(w_add + w_delete + w_swap - 1.0) > 1e-12)
    throw ContractError("proposal weights must sum to 1");
}

ModelProposal propose_model(const ModelIndex& gamma, const ProposalKernel& kernel, Rng& rng) {
  const int p = gamma.p();
  if (p == 0) return {gamma, 0.0};
  if (kernel.kind == ProposalKernel::Kind::single_flip) {
    return {gamma.flipped(static_cast<int>(rng.index(static_cast<std::size_t>(p)))), 0.0};
  }
  std::vector<int> in, out;
  for (int j = 0; j < p; ++j) (gamma.contains(j) ? in : out).push_back(j);
  const double k = static_cast<double>(in.size());
  const double pd = static_cast<double>(p);
  const double u = rng.uniform();
  if (u < kernel.w_add) {
    if (out.empty()) return {gamma, 0.0};
    const int j = out[rng.index(out.size())];
    return {gamma.flipped(j), std::log(kernel.w_delete / (k + 1.0)) - std::log(kernel.w_add / (pd - k))};
  }
  if (u < kernel.w_add + kernel.w_delete) {
    if (in.empty()) return {gamma, 0.0};
    const int j = in[rng.index(in.size())];
    return {gamma.flipped(j), std::log(kernel.w_add / (pd - k + 1.0)) - std::log(kernel.w_delete / k)};
  }
  if (in.empty() || out.empty()) return {gamma, 0.0};
  const int a = in[rng.index(in.size())];
  const int b = out[rng.index(out.size())];
  return {gamma.flipped(a).flipped(b), 0.0};
}

double log_acceptance(double log_target_current, double log_target_proposed, double log_q_ratio) {
  if (log_target_proposed == kNegInf) return kNegInf;
  if (log_target_current == kNegInf) return kInf;
  return log_target_proposed - log_target_current + log_q_ratio;
}

void McmcConfig::validate() const {
  if (burnin < 0 || thin < 1 || chains < 1) throw ContractError("invalid mcmc burnin/thin/chains");
  if (iterations <= burnin) throw ContractError("iterations must exceed burnin");
  if ((iterations - burnin) / thin < 1) throw ContractError("mcmc configuration retains no draws");
  proposal.validate();
}

ChainOutput mc3_complete(const VectorXd& y, const MatrixXd& x, const McmcConfig& cfg,
                         const GPrior& variant, const SpdMatrix* sigma) {
  cfg.validate();
  variant.validate(y.size());
  const int p = static_cast<int>(x.cols());
  check_p(p);
  std::unordered_map<std::uint64_t, double> cache;
  auto marginal = [&](const ModelIndex& g) {
    auto it = cache.find(g.bits());
    if (it != cache.end()) return it->second;
    const double v = log_marginal(y, x, g, variant, sigma);
    cache.emplace(g.bits(), v);
    return v;
  };

  Rng rng(cfg.seed);
  ChainOutput out;
  out.p = p;
  out.seed = cfg.seed;
  out.sampler = "mc3";
  ModelIndex gamma = start_model(cfg, p);
  double cur_m = marginal(gamma);
  double cur_t = cur_m + log_model_prior(gamma, cfg.model_prior, p);
  long accepted = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    const ModelProposal prop = propose_model(gamma, cfg.proposal, rng);
    const double m = marginal(prop.gamma);
    const double t = m + log_model_prior(prop.gamma, cfg.model_prior, p);
    if (mh_accept(log_acceptance(cur_t, t, prop.log_q_ratio), rng)) {
      gamma = prop.gamma;
      cur_m = m;
      cur_t = t;
      ++accepted;
    }
    if (recorded(it, cfg)) {
      out.visited.push_back(gamma);
      out.log_marginal.push_back(cur_m);
    }
  }
  out.acceptance_rate = static_cast<double>(accepted) / cfg.iterations;
  return out;
}

ItsResult its_two_stage(const Dataset& d, const StreamConfig& stream_cfg, const McmcConfig& cfg,
                        const GPrior& variant, ExecPolicy policy) {
  cfg.validate();
  StreamConfig sc = stream_cfg;
  sc.mode = StreamMode::shared;
  if (sc.j < 1) throw ContractError("its_two_stage needs J >= 1");
  const ImputationStream stream(d, sc);
  const auto draws = stream.shared_draws();
  const std::size_t j = draws->completed.size();

  ItsResult out;
  out.chains.resize(j);
  std::vector<std::string> failures(j);
  detail::for_each_index(j, policy, [&](std::size_t k) {
    try {
      McmcConfig ck = cfg;
      ck.seed = derive_seed(cfg.seed, k);
      out.chains[k] = mc3_complete(d.y, draws->completed[k], ck, variant, &draws->draws[k].nu.sigma);
    } catch (const std::exception& e) {
      failures[k] = e.what();
    }
  });
  std::ostringstream msg;
  int failed = 0;
  for (std::size_t k = 0; k < j; ++k) {
    if (failures[k].empty()) continue;
    msg << (failed++ ? ", " : "") << k << " (" << failures[k] << ")";
  }
  if (failed > 0) throw Error("its_two_stage: chains failed for datasets " + msg.str());

  std::vector<PosteriorSummary> parts;
  parts.reserve(j);
  for (const auto& c : out.chains) parts.push_back(estimate_probs(c, EstimateMethod::frequency, cfg.model_prior));
  out.summary = pool_summaries(parts, static_cast<int>(d.p()), EstimateMethod::frequency);
  for (auto& m : out.summary.models) m.log_prior = log_model_prior(m.gamma, cfg.model_prior, out.summary.p);
  return out;
}

ChainOutput sias_embedded(const Dataset& d, const McmcConfig& cfg, const StreamConfig& impute_cfg,
                          const GPrior& variant) {
  cfg.validate();
  impute_cfg.validate();
  variant.validate(d.n());
  const int p = static_cast<int>(d.p());
  check_p(p);
  const bool need_da = !d.complete() || variant.needs_sigma();

  std::optional<DataAugmentation> da;
  MatrixXd x = d.x;
  std::optional<SpdMatrix> sigma;
  if (need_da) {
    da.emplace(d, impute_cfg, impute_cfg.seed);
    for (int b = 0; b < impute_cfg.burnin; ++b) da->sweep();
    x = da->completed();
    sigma = da->nu().sigma;
  }
  auto marginal = [&](const MatrixXd& xc, const ModelIndex& g, const std::optional<SpdMatrix>& s) {
    return log_marginal(d.y, xc, g, variant, s ? &*s : nullptr);
  };

  Rng rng(cfg.seed);
  ChainOutput out;
  out.p = p;
  out.seed = cfg.seed;
  out.sampler = "sias";
  ModelIndex gamma = start_model(cfg, p);
  double cur_m = marginal(x, gamma, sigma);
  double cur_t = cur_m + log_model_prior(gamma, cfg.model_prior, p);
  long accepted = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    const ModelProposal prop = propose_model(gamma, cfg.proposal, rng);
    double m;
    if (need_da) {
      for (int t = 0; t < impute_cfg.thin; ++t) da->sweep();
      m = log_marginal(d.y, da->completed(), prop.gamma, variant, &da->nu().sigma);
    } else {
      m = marginal(x, prop.gamma, sigma);
    }
    const double t = m + log_model_prior(prop.gamma, cfg.model_prior, p);
    if (mh_accept(log_acceptance(cur_t, t, prop.log_q_ratio), rng)) {
      gamma = prop.gamma;
      cur_m = m;
      cur_t = t;
      ++accepted;
      if (need_da) {
        x = da->completed();
        sigma = da->nu().sigma;
      }
    }
    if (recorded(it, cfg)) {
      out.visited.push_back(gamma);
      out.log_marginal.push_back(cur_m);
    }
  }
  out.acceptance_rate = static_cast<double>(accepted) / cfg.iterations;
  return out;
}

namespace {

// Coefficients in the centered parameterization y = alpha + (x - xbar)'beta.
struct CoefState {
  double alpha = 0.0;
  VectorXd beta;
  double sigma2 = 1.0;
};

VectorXd draw_scaled_normal(const MatrixXd& lower, double scale, Rng& rng) {
  VectorXd z(lower.rows());
  for (Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
  // lower lower' = A, so L^{-T} z ~ N(0, A^{-1}).
  return scale * lower.transpose().triangularView<Eigen::Upper>().solve(z);
}

CoefState draw_coefficients(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma,
                            const GPrior& variant, double g, const SpdMatrix& sigma, Rng& rng) {
  const auto c = center_regression(y, x, gamma);
  const double n = static_cast<double>(y.size());
  const Index k = c.xc.cols();
  CoefState s;
  s.alpha = c.ybar;
  if (variant.kind == GPrior::Kind::induced) {
    double rss = c.tss;
    s.beta = VectorXd();
    if (k > 0) {
      const SpdMatrix xtx(MatrixXd(c.xc.transpose() * c.xc));
      const VectorXd bhat = xtx.solve(VectorXd(c.xc.transpose() * c.yc));
      rss = (c.yc - c.xc * bhat).squaredNorm();
      s.sigma2 = 1.0 / rng.gamma(0.5 * (n + static_cast<double>(k)), 0.5 * rss);
      s.beta = bhat + draw_scaled_normal(xtx.lower(), std::sqrt(s.sigma2), rng);
    } else {
      s.sigma2 = 1.0 / rng.gamma(0.5 * n, 0.5 * rss);
    }
    return s;
  }
  if (k == 0) {
    s.sigma2 = 1.0 / rng.gamma(0.5 * (n - 1.0), 0.5 * c.tss);
    s.beta = VectorXd();
  } else {
    const MatrixXd xtx = c.xc.transpose() * c.xc;
    MatrixXd p0;
    if (variant.kind == GPrior::Kind::classical) p0 = xtx / g;
    else p0 = (n / g) * sigma.sub(gamma.indices()).matrix();
    MatrixXd a = p0 + xtx;
    const SpdMatrix post(0.5 * (a + a.transpose()));
    const VectorXd b = c.xc.transpose() * c.yc;
    const VectorXd mean = post.solve(b);
    const double q = c.tss - b.dot(mean);
    s.sigma2 = 1.0 / rng.gamma(0.5 * (n - 1.0), 0.5 * q);
    s.beta = mean + draw_scaled_normal(post.lower(), std::sqrt(s.sigma2), rng);
  }
  s.alpha = c.ybar + std::sqrt(s.sigma2 / n) * rng.normal();
  return s;
}

// log of likelihood times the X-dependent prior factor on (beta, sigma^2),
// as a function of the completed covariates.
double log_x_target(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma,
                    const GPrior& variant, double g, const CoefState& s) {
  const auto c = center_regression(y, x, gamma);
  const double n = static_cast<double>(y.size());
  const double k = static_cast<double>(c.xc.cols());
  const double log2pi = std::log(2.0 * std::numbers::pi);
  if (variant.kind == GPrior::Kind::induced) {
    const VectorXd r = c.yc - c.xc * s.beta;
    double out = -0.5 * (1.0 - g) * r.squaredNorm() / s.sigma2;
    double rss = c.tss;
    if (c.xc.cols() > 0) {
      try {
        const SpdMatrix xtx(MatrixXd(c.xc.transpose() * c.xc));
        const VectorXd bhat = xtx.solve(VectorXd(c.xc.transpose() * c.yc));
        rss = (c.yc - c.xc * bhat).squaredNorm();
        const VectorXd dv = s.beta - bhat;
        out += 0.5 * (k * std::log(g) + xtx.logdet()) - 0.5 * k * (log2pi + std::log(s.sigma2)) -
               0.5 * g * dv.dot(xtx.matrix() * dv) / s.sigma2;
      } catch (const NotSpdError&) {
        return kNegInf;
      }
    }
    if (!(rss > 0.0)) return kNegInf;
    const double shape = 0.5 * (g * n + k);
    const double rate = 0.5 * g * rss;
    out += shape * std::log(rate) - std::lgamma(shape) - rate / s.sigma2;
    return out;
  }
  const VectorXd r = (c.yc.array() + c.ybar - s.alpha).matrix() - c.xc * s.beta;
  double out = -0.5 * r.squaredNorm() / s.sigma2;
  if (variant.kind == GPrior::Kind::classical && c.xc.cols() > 0) {
    try {
      const SpdMatrix xtx(MatrixXd(c.xc.transpose() * c.xc));
      out += 0.5 * xtx.logdet() - 0.5 * k * (log2pi + std::log(g * s.sigma2)) -
             0.5 * s.beta.dot(xtx.matrix() * s.beta) / (g * s.sigma2);
    } catch (const NotSpdError&) {
      return kNegInf;
    }
  }
  return out;
}

RegressionCoefficients proposal_coefficients(const VectorXd& y, const MatrixXd& x,
                                             const ModelIndex& gamma, const GPrior& variant,
                                             double g, const CoefState& s) {
  const auto idx = gamma.indices();
  double xb = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) xb += x.col(idx[k]).mean() * s.beta(static_cast<Index>(k));
  if (variant.kind == GPrior::Kind::induced) return {y.mean() - xb, s.beta, s.sigma2 / (1.0 - g)};
  return {s.alpha - xb, s.beta, s.sigma2};
}

double log_beta_given_sigma(const CoefState& s, const SpdMatrix& sigma, const ModelIndex& gamma,
                            double n, double g) {
  const SpdMatrix sg = sigma.sub(gamma.indices());
  return 0.5 * sg.logdet() - 0.5 * n * s.beta.dot(sg.matrix() * s.beta) / (g * s.sigma2);
}

NuDraw draw_nu_conjugate(const MatrixXd& x, const std::optional<NiwParams>& prior, Rng& rng) {
  NiwParams post = nu_posterior(x, prior);
  int failures = 0;
  for (;;) {
    try {
      return sample_niw(post, rng);
    } catch (const NotSpdError&) {
      if (++failures >= 3) throw;
      post.s0 = jitter_repair(post.s0).matrix();
    }
  }
}

}  // namespace

ChainOutput gibbs_informed(const Dataset& d, const McmcConfig& cfg, const StreamConfig& impute_cfg,
                           const GPrior& variant) {
  cfg.validate();
  impute_cfg.validate();
  variant.validate(d.n());
  const int p = static_cast<int>(d.p());
  check_p(p);
  const double n = static_cast<double>(d.n());
  const double g = variant.resolve_g(d.n());
  const bool incomplete = !d.complete();
  const bool need_nu = incomplete || variant.needs_sigma();
  const auto prior = nu_prior(d, impute_cfg);
  const ModelIndex null_gamma = ModelIndex::null_model(p);
  const RegressionCoefficients plain{0.0, VectorXd(), 1.0};

  MatrixXd x = d.x;
  std::optional<NuDraw> nu;
  if (need_nu) {
    DataAugmentation da(d, impute_cfg, impute_cfg.seed);
    for (int b = 0; b < impute_cfg.burnin; ++b) da.sweep();
    x = da.completed();
    nu = da.nu();
  }
  auto marginal = [&](const ModelIndex& gm) {
    return log_marginal(d.y, x, gm, variant, nu ? &nu->sigma : nullptr);
  };

  Rng rng(cfg.seed);
  ChainOutput out;
  out.p = p;
  out.seed = cfg.seed;
  out.sampler = "gibbs";
  ModelIndex gamma = start_model(cfg, p);
  long accepted = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    // (1) gamma | y, X_completed, nu with coefficients collapsed.
    const double cur_m = marginal(gamma);
    const ModelProposal prop = propose_model(gamma, cfg.proposal, rng);
    const double m = prop.gamma == gamma ? cur_m : marginal(prop.gamma);
    const double cur_t = cur_m + log_model_prior(gamma, cfg.model_prior, p);
    const double t = m + log_model_prior(prop.gamma, cfg.model_prior, p);
    double state_m = cur_m;
    if (mh_accept(log_acceptance(cur_t, t, prop.log_q_ratio), rng)) {
      gamma = prop.gamma;
      state_m = m;
      ++accepted;
    }

    if (need_nu && std::isfinite(state_m)) {
      // (2) coefficients from their conjugate conditional.
      const CoefState coef = draw_coefficients(d.y, x, gamma, variant, g, nu->sigma, rng);

      // (3) nu | X_completed; the imputation g-prior puts Sigma in beta's law.
      NuDraw nu_new = draw_nu_conjugate(x, prior, rng);
      double log_r = 0.0;
      if (variant.needs_sigma() && gamma.size() > 0) {
        log_r = log_beta_given_sigma(coef, nu_new.sigma, gamma, n, g) -
                log_beta_given_sigma(coef, nu->sigma, gamma, n, g);
      }
      if (mh_accept(log_r, rng)) nu = std::move(nu_new);

      // (4) X_miss by MH with the y-informed proposal.
      if (incomplete) {
        const RegressionCoefficients fwd = proposal_coefficients(d.y, x, gamma, variant, g, coef);
        const ImputationDraw draw = draw_x_miss_given_y(d, *nu, gamma, fwd, rng);
        const MatrixXd x_new = complete_matrix(d, draw.x_miss);
        const RegressionCoefficients rev = proposal_coefficients(d.y, x_new, gamma, variant, g, coef);
        const double t_new = log_x_target(d.y, x_new, gamma, variant, g, coef) +
                             log_density_x_miss_given_y(d, x_new, *nu, null_gamma, plain);
        const double t_old = log_x_target(d.y, x, gamma, variant, g, coef) +
                             log_density_x_miss_given_y(d, x, *nu, null_gamma, plain);
        double log_rx = kNegInf;
        if (t_new != kNegInf) {
          log_rx = t_new - t_old + log_density_x_miss_given_y(d, x, *nu, gamma, rev) -
                   log_density_x_miss_given_y(d, x_new, *nu, gamma, fwd);
        }
        if (mh_accept(log_rx, rng)) x = x_new;
      }
      state_m = marginal(gamma);
    }

    if (recorded(it, cfg)) {
      out.visited.push_back(gamma);
      out.log_marginal.push_back(state_m);
    }
  }
  out.acceptance_rate = static_cast<double>(accepted) / cfg.iterations;
  return out;
}

PosteriorSummary estimate_probs(const ChainOutput& chain, EstimateMethod method,
                                const ModelPrior& model_prior, const MarginalProvider& marginals) {
  const std::size_t n = chain.visited.size();
  if (n == 0) throw ContractError("estimate_probs: empty chain");
  const int p = chain.p;
  std::map<std::uint64_t, std::pair<std::size_t, double>> seen;  // bits -> (count, first log m)
  for (std::size_t t = 0; t < n; ++t) {
    auto [it, fresh] = seen.try_emplace(chain.visited[t].bits(), 0, chain.log_marginal[t]);
    ++it->second.first;
  }

  if (method == EstimateMethod::renormalized) {
    std::vector<ModelEntry> entries;
    for (const auto& [bits, info] : seen) {
      const ModelIndex g(bits, p);
      const double lm = marginals ? marginals(g) : info.second;
      entries.push_back({g, lm, log_model_prior(g, model_prior, p), 0.0, 0.0, 0.0});
    }
    return normalize_models(std::move(entries), p, EstimateMethod::renormalized);
  }
  if (method != EstimateMethod::frequency) throw ContractError("estimate_probs: unsupported method");

  PosteriorSummary out;
  out.p = p;
  out.method = EstimateMethod::frequency;
  std::vector<double> ind(n);
  for (const auto& [bits, info] : seen) {
    const ModelIndex g(bits, p);
    for (std::size_t t = 0; t < n; ++t) ind[t] = chain.visited[t].bits() == bits ? 1.0 : 0.0;
    const double prob = static_cast<double>(info.first) / static_cast<double>(n);
    out.models.push_back({g, info.second, log_model_prior(g, model_prior, p), prob,
                          n > 1 ? batch_means_se(ind) : kInf, 0.0});
  }
  sort_entries(out.models);
  out.inclusion = VectorXd::Zero(p);
  out.inclusion_se = VectorXd::Zero(p);
  for (int k = 0; k < p; ++k) {
    for (std::size_t t = 0; t < n; ++t) ind[t] = chain.visited[t].contains(k) ? 1.0 : 0.0;
    double s = 0.0;
    for (double v : ind) s += v;
    out.inclusion(k) = s / static_cast<double>(n);
    out.inclusion_se(k) = n > 1 ? batch_means_se(ind) : kInf;
  }
  return out;
}

PosteriorSummary pool_summaries(const std::vector<PosteriorSummary>& parts, int p,
                                EstimateMethod method) {
  if (parts.empty()) throw ContractError("pool_summaries: nothing to pool");
  const double j = static_cast<double>(parts.size());
  std::map<std::uint64_t, ModelEntry> pooled;
  std::map<std::uint64_t, std::vector<double>> per_part;
  for (std::size_t r = 0; r < parts.size(); ++r) {
    if (parts[r].p != p) throw ContractError("pool_summaries: dimension mismatch");
    for (const auto& m : parts[r].models) {
      auto [it, fresh] = pooled.try_emplace(m.gamma.bits(), m);
      if (fresh) it->second.prob = 0.0;
      it->second.prob += m.prob / j;
      auto& v = per_part[m.gamma.bits()];
      v.resize(parts.size(), 0.0);
      v[r] = m.prob;
    }
  }
  PosteriorSummary out;
  out.p = p;
  out.method = method;
  for (auto& [bits, e] : pooled) {
    if (parts.size() > 1) {
      double ss = 0.0;
      for (double v : per_part[bits]) ss += (v - e.prob) * (v - e.prob);
      e.mc_se = std::sqrt(ss / (j - 1.0) / j);
    }
    out.models.push_back(e);
  }
  sort_entries(out.models);
  out.inclusion = VectorXd::Zero(p);
  for (const auto& part : parts) out.inclusion += part.inclusion / j;
  return out;
}

double total_variation(const PosteriorSummary& a, const PosteriorSummary& b) {
  std::map<std::uint64_t, double> diff;
  for (const auto& m : a.models) diff[m.gamma.bits()] += m.prob;
  for (const auto& m : b.models) diff[m.gamma.bits()] -= m.prob;
  double tv = 0.0;
  for (const auto& [bits, v] : diff) tv += std::abs(v);
  return 0.5 * tv;
}

double batch_means_se(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 2) return kInf;
  std::size_t b = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  std::size_t nb = n / b;
  if (nb < 2) {
    b = 1;
    nb = n;
  }
  std::vector<double> means(nb, 0.0);
  for (std::size_t k = 0; k < nb; ++k) {
    for (std::size_t t = 0; t < b; ++t) means[k] += series[k * b + t];
    means[k] /= static_cast<double>(b);
  }
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(nb);
  double ss = 0.0;
  for (double m : means) ss += (m - mean) * (m - mean);
  return std::sqrt(ss / static_cast<double>(nb - 1) / static_cast<double>(nb));
}

double effective_sample_size(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (series[t] - mean) * (series[t + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double g0 = autocov(0);
  if (!(g0 > 0.0)) return static_cast<double>(n);
  double sum = 0.0;
  const std::size_t max_pairs = std::min<std::size_t>((n - 1) / 2, 2000);
  for (std::size_t m = 0; m < max_pairs; ++m) {
    const double pair = autocov(2 * m) + autocov(2 * m + 1);
    if (!(pair > 0.0)) break;
    sum += pair;
  }
  const double var = -g0 + 2.0 * sum;
  if (!(var > 0.0)) return static_cast<double>(n);
  return static_cast<double>(n) * g0 / var;
}

BenchmarkReport variance_benchmark(const Dataset& d, int reps, int j, const GPrior& variant,
                                   const ModelPrior& model_prior, const StreamConfig& base,
                                   ExecPolicy policy) {
  if (reps < 2) throw ContractError("variance benchmark needs reps >= 2");
  if (j < 1) throw ContractError("variance benchmark needs J >= 1");
  const int p = static_cast<int>(d.p());
  if (p > 20) throw ContractError("variance benchmark requires an enumerable model space");
  const std::size_t count = std::size_t{1} << p;
  const std::size_t reps_n = static_cast<std::size_t>(reps);
  std::vector<std::vector<double>> shared(reps_n), fresh(reps_n);
  detail::for_each_index(reps_n, policy, [&](std::size_t r) {
    StreamConfig cfg = base;
    cfg.j = j;
    cfg.seed = derive_seed(base.seed, r);
    for (StreamMode mode : {StreamMode::shared, StreamMode::fresh}) {
      cfg.mode = mode;
      const ImputationStream stream(d, cfg);
      const auto summary = enumerate_models(d, stream, variant, model_prior, 20, ExecPolicy::serial);
      auto& target = mode == StreamMode::shared ? shared[r] : fresh[r];
      target.assign(count, 0.0);
      for (const auto& m : summary.models) target[m.gamma.bits()] = m.prob;
    }
  });

  BenchmarkReport out;
  out.reps = reps;
  out.j = j;
  auto moments = [&](const std::vector<std::vector<double>>& v, std::size_t b) {
    double mean = 0.0;
    for (const auto& r : v) mean += r[b];
    mean /= static_cast<double>(v.size());
    // identical replicates give exactly zero, not a rounding residue
    if (std::all_of(v.begin(), v.end(), [&](const auto& r) { return r[b] == v.front()[b]; }))
      return std::pair{v.front()[b], 0.0};
    double ss = 0.0;
    for (const auto& r : v) ss += (r[b] - mean) * (r[b] - mean);
    return std::pair{mean, ss / static_cast<double>(v.size() - 1)};
  };
  for (std::size_t b = 0; b < count; ++b) {
    BenchmarkRow row;
    row.gamma = ModelIndex(b, p);
    std::tie(row.mean_shared, row.var_shared) = moments(shared, b);
    std::tie(row.mean_fresh, row.var_fresh) = moments(fresh, b);
    if (row.var_fresh > 0.0) row.ratio = row.var_shared / row.var_fresh;
    else row.ratio = row.var_shared > 0.0 ? kInf : std::numeric_limits<double>::quiet_NaN();
    out.rows.push_back(row);
  }
  std::sort(out.rows.begin(), out.rows.end(),
            [](const BenchmarkRow& a, const BenchmarkRow& b) { return lex_less(a.gamma, b.gamma); });
  return out;
}

}  // namespace bvsmiss
