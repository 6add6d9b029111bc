#include "bvsmiss/impute.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "bvsmiss/error.hpp"

namespace bvsmiss {

std::vector<MissingCell> missing_cells(const Dataset& d) {
  std::vector<MissingCell> cells;
  for (Index i = 0; i < d.n(); ++i)
    for (Index j = 0; j < d.p(); ++j)
      if (!d.mask(i, j)) cells.push_back({i, j});
  return cells;
}

MatrixXd complete_matrix(const Dataset& d, const VectorXd& x_miss) {
  MatrixXd x = d.x;
  Index k = 0;
  for (Index i = 0; i < d.n(); ++i)
    for (Index j = 0; j < d.p(); ++j)
      if (!d.mask(i, j)) x(i, j) = x_miss(k++);
  if (k != x_miss.size()) throw ContractError("complete_matrix: x_miss has the wrong length");
  return x;
}

void StreamConfig::validate() const {
  if (j < 1) throw ContractError("stream: j must be >= 1");
  if (burnin < 0) throw ContractError("stream: burnin must be >= 0");
  if (thin < 1) throw ContractError("stream: thin must be >= 1");
  if (prior) prior->validate();
}

NiwParams default_niw_prior(const Dataset& d) {
  const Index p = d.p();
  NiwParams prior;
  prior.m0.resize(p);
  prior.s0 = MatrixXd::Zero(p, p);
  for (Index j = 0; j < p; ++j) {
    const auto& st = d.stats[static_cast<std::size_t>(j)];
    prior.m0(j) = st.mean;
    const double var = st.sd * st.sd;
    prior.s0(j, j) = var > 0.0 ? var : 1.0;
  }
  prior.k0 = 0.01;
  prior.v0 = static_cast<double>(p) + 2.0;
  return prior;
}

NiwParams nu_posterior(const MatrixXd& x, const std::optional<NiwParams>& prior) {
  if (prior) return niw_posterior(x, *prior);
  // Jeffreys: Sigma ~ IW(n - 1, scatter), mu | Sigma ~ N(xbar, Sigma / n).
  NiwParams post;
  post.m0 = column_means(x);
  post.k0 = static_cast<double>(x.rows());
  post.v0 = static_cast<double>(x.rows()) - 1.0;
  post.s0 = centered_scatter(x);
  return post;
}

std::optional<NiwParams> nu_prior(const Dataset& d, const StreamConfig& cfg) {
  if (cfg.jeffreys) return std::nullopt;
  return cfg.prior ? *cfg.prior : default_niw_prior(d);
}

namespace {

MatrixXd mean_imputed(const Dataset& d) {
  MatrixXd x = d.x;
  for (Index i = 0; i < d.n(); ++i)
    for (Index j = 0; j < d.p(); ++j)
      if (!d.mask(i, j)) x(i, j) = d.stats[static_cast<std::size_t>(j)].mean;
  return x;
}

void impute_patterns(const std::vector<MissingnessPattern>& patterns, const NuDraw& nu,
                     MatrixXd& x, Rng& rng) {
  for (const auto& pat : patterns) {
    if (pat.missing.empty()) continue;
    const ConditionalKernel kernel(nu.mu, nu.sigma, pat.observed, pat.missing);
    for (Index i : pat.rows) {
      const VectorXd draw = sample_mvn_factor(kernel.mean(x.row(i).transpose()), kernel.cov().lower(), rng);
      for (std::size_t t = 0; t < pat.missing.size(); ++t) x(i, pat.missing[t]) = draw(static_cast<Index>(t));
    }
  }
}

VectorXd gather_missing(const std::vector<MissingCell>& cells, const MatrixXd& x) {
  VectorXd v(static_cast<Index>(cells.size()));
  for (std::size_t k = 0; k < cells.size(); ++k) v(static_cast<Index>(k)) = x(cells[k].row, cells[k].col);
  return v;
}

}  // namespace

DataAugmentation::DataAugmentation(const Dataset& d, const StreamConfig& cfg, std::uint64_t seed)
    : data_(&d),
      patterns_(group_patterns(d)),
      cells_(missing_cells(d)),
      prior_(nu_prior(d, cfg)),
      rng_(seed),
      x_(mean_imputed(d)),
      nu_(draw_nu()) {
  cfg.validate();
  if (cfg.jeffreys && d.n() <= d.p()) throw ContractError("Jeffreys prior on nu requires n > p");
  impute();
}

NuDraw DataAugmentation::draw_nu() {
  NiwParams post = nu_posterior(x_, prior_);
  int failures = 0;
  for (;;) {
    try {
      return sample_niw(post, rng_);
    } catch (const NotSpdError&) {
      if (++failures >= 3) throw;
      post.s0 = jitter_repair(post.s0).matrix();
    }
  }
}

void DataAugmentation::impute() {
  int failures = 0;
  for (;;) {
    try {
      impute_patterns(patterns_, nu_, x_, rng_);
      return;
    } catch (const NotSpdError&) {
      if (++failures >= 3) throw;
      nu_.sigma = jitter_repair(nu_.sigma.matrix());
    }
  }
}

void DataAugmentation::restart(const MatrixXd& x_completed) {
  if (x_completed.rows() != x_.rows() || x_completed.cols() != x_.cols())
    throw ContractError("restart: dimension mismatch");
  for (const auto& c : cells_) x_(c.row, c.col) = x_completed(c.row, c.col);
}

void DataAugmentation::sweep() {
  nu_ = draw_nu();
  impute();
}

VectorXd DataAugmentation::x_miss() const { return gather_missing(cells_, x_); }

DrawSet run_stream_chain(const Dataset& d, const StreamConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  DataAugmentation chain(d, cfg, seed);
  for (int b = 0; b < cfg.burnin; ++b) chain.sweep();
  DrawSet out;
  out.draws.reserve(static_cast<std::size_t>(cfg.j));
  out.completed.reserve(static_cast<std::size_t>(cfg.j));
  for (int k = 0; k < cfg.j; ++k) {
    for (int t = 0; t < cfg.thin; ++t) chain.sweep();
    out.draws.push_back(chain.current());
    out.completed.push_back(chain.completed());
  }
  return out;
}

std::vector<NuDraw> da_gibbs_nu(const Dataset& d, const StreamConfig& cfg) {
  const DrawSet set = run_stream_chain(d, cfg, cfg.seed);
  std::vector<NuDraw> out;
  out.reserve(set.draws.size());
  for (const auto& draw : set.draws) out.push_back(draw.nu);
  return out;
}

ImputationDraw draw_x_miss(const Dataset& d, const NuDraw& nu, Rng& rng) {
  MatrixXd x = d.x;
  impute_patterns(group_patterns(d), nu, x, rng);
  return {nu, gather_missing(missing_cells(d), x)};
}

namespace {

// Conditional normal of one pattern's missing block combined with the
// regression likelihood of y_i.
class InformedKernel {
 public:
  InformedKernel(const MissingnessPattern& pat, const NuDraw& nu, const ModelIndex& gamma,
                 const RegressionCoefficients& coeffs)
      : base_(nu.mu, nu.sigma, pat.observed, pat.missing), cov_(base_.cov()) {
    const auto idx = gamma.indices();
    std::vector<double> coef(static_cast<std::size_t>(gamma.p()), 0.0);
    for (std::size_t k = 0; k < idx.size(); ++k) coef[static_cast<std::size_t>(idx[k])] = coeffs.beta(static_cast<Index>(k));
    b_.resize(static_cast<Index>(pat.missing.size()));
    for (std::size_t t = 0; t < pat.missing.size(); ++t) b_(static_cast<Index>(t)) = coef[static_cast<std::size_t>(pat.missing[t])];
    for (Index j : pat.observed) {
      if (coef[static_cast<std::size_t>(j)] != 0.0) obs_coef_.push_back({j, coef[static_cast<std::size_t>(j)]});
    }
    intercept_ = coeffs.intercept;
    if (b_.squaredNorm() > 0.0) {
      const MatrixXd& v = base_.cov().matrix();
      vb_ = v * b_;
      s_ = coeffs.sigma2 + b_.dot(vb_);
      MatrixXd updated = v - vb_ * vb_.transpose() / s_;
      cov_ = SpdMatrix(0.5 * (updated + updated.transpose()));
      informed_ = true;
    }
  }

  VectorXd mean(const VectorXd& row, double y) const {
    VectorXd c = base_.mean(row);
    if (!informed_) return c;
    double r = y - intercept_;
    for (const auto& [j, beta] : obs_coef_) r -= beta * row(j);
    return c + vb_ * ((r - b_.dot(c)) / s_);
  }

  const SpdMatrix& cov() const { return cov_; }

 private:
  ConditionalKernel base_;
  SpdMatrix cov_;
  VectorXd b_;
  VectorXd vb_;
  double s_ = 1.0;
  double intercept_ = 0.0;
  std::vector<std::pair<Index, double>> obs_coef_;
  bool informed_ = false;
};

void check_coeffs(const ModelIndex& gamma, const RegressionCoefficients& coeffs) {
  if (!(coeffs.sigma2 > 0.0)) throw DomainError("informed imputation: sigma2 must be positive");
  if (coeffs.beta.size() != gamma.size()) throw ContractError("informed imputation: beta length differs from model size");
}

}  // namespace

ImputationDraw draw_x_miss_given_y(const Dataset& d, const NuDraw& nu, const ModelIndex& gamma,
                                   const RegressionCoefficients& coeffs, Rng& rng) {
  check_coeffs(gamma, coeffs);
  MatrixXd x = d.x;
  for (const auto& pat : group_patterns(d)) {
    if (pat.missing.empty()) continue;
    const InformedKernel kernel(pat, nu, gamma, coeffs);
    for (Index i : pat.rows) {
      const VectorXd draw = sample_mvn_factor(kernel.mean(x.row(i).transpose(), d.y(i)), kernel.cov().lower(), rng);
      for (std::size_t t = 0; t < pat.missing.size(); ++t) x(i, pat.missing[t]) = draw(static_cast<Index>(t));
    }
  }
  return {nu, gather_missing(missing_cells(d), x)};
}

double log_density_x_miss_given_y(const Dataset& d, const MatrixXd& x_completed,
                                  const NuDraw& nu, const ModelIndex& gamma,
                                  const RegressionCoefficients& coeffs) {
  check_coeffs(gamma, coeffs);
  double total = 0.0;
  for (const auto& pat : group_patterns(d)) {
    if (pat.missing.empty()) continue;
    const InformedKernel kernel(pat, nu, gamma, coeffs);
    for (Index i : pat.rows) {
      const VectorXd row = x_completed.row(i).transpose();
      VectorXd vals(static_cast<Index>(pat.missing.size()));
      for (std::size_t t = 0; t < pat.missing.size(); ++t) vals(static_cast<Index>(t)) = row(pat.missing[t]);
      total += log_mvn_density(vals, kernel.mean(row, d.y(i)), kernel.cov());
    }
  }
  return total;
}

ImputationStream::ImputationStream(Dataset d, StreamConfig cfg)
    : data_(std::move(d)), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.mode == StreamMode::shared) {
    shared_ = std::make_shared<const DrawSet>(run_stream_chain(data_, cfg_, cfg_.seed));
  }
}

std::shared_ptr<const DrawSet> ImputationStream::draws_for(const ModelIndex& gamma) const {
  if (cfg_.mode == StreamMode::shared) return shared_;
  return std::make_shared<const DrawSet>(
      run_stream_chain(data_, cfg_, derive_seed(cfg_.seed, gamma.bits())));
}

ImputationStream make_stream(const Dataset& d, const StreamConfig& cfg) {
  return ImputationStream(d, cfg);
}

std::vector<std::string> export_draws_csv(const Dataset& d, const DrawSet& draws,
                                          const std::string& prefix) {
  std::vector<std::string> paths;
  for (std::size_t k = 0; k < draws.completed.size(); ++k) {
    const std::string path = prefix + std::to_string(k) + ".csv";
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    for (std::size_t j = 0; j < d.names.size(); ++j) out << (j ? "," : "") << csv_escape(d.names[j]);
    out << '\n';
    const MatrixXd& x = draws.completed[k];
    char buf[32];
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index j = 0; j < x.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", x(i, j));
        out << (j ? "," : "") << buf;
      }
      out << '\n';
    }
    paths.push_back(path);
  }
  return paths;
}

}  // namespace bvsmiss
