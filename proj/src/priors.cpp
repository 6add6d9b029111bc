#include "bvsmiss/priors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "bvsmiss/error.hpp"

namespace bvsmiss {

double GPrior::resolve_g(Index n) const {
  if (g) return *g;
  return kind == Kind::induced ? 1.0 / static_cast<double>(n) : static_cast<double>(n);
}

void GPrior::validate(Index n) const {
  const double gv = resolve_g(n);
  if (kind == Kind::induced) {
    if (!(gv > 0.0 && gv < 1.0)) throw DomainError("induced-fractional g must lie in (0, 1)");
  } else if (!(gv > 0.0)) {
    throw DomainError("g must be positive");
  }
}

std::string GPrior::name() const {
  switch (kind) {
    case Kind::classical: return "classical";
    case Kind::imputation: return "imputation";
    case Kind::induced: return "induced";
  }
  return "?";
}

GPrior GPrior::parse(const std::string& name, std::optional<double> g) {
  if (name == "classical") return classical(g);
  if (name == "imputation") return imputation(g);
  if (name == "induced" || name == "induced-fractional") return induced(g);
  throw ContractError("unknown g-prior variant '" + name + "'");
}

std::string ModelPrior::name() const {
  return kind == Kind::uniform ? "uniform" : "beta-binomial";
}

CenteredRegression center_regression(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma) {
  const Index n = y.size();
  if (x.rows() != n || x.cols() != gamma.p()) throw ContractError("regression: dimension mismatch");
  const auto idx = gamma.indices();
  CenteredRegression c;
  c.ybar = y.mean();
  c.yc = y.array() - c.ybar;
  c.tss = c.yc.squaredNorm();
  c.xc.resize(n, static_cast<Index>(idx.size()));
  c.xbar.resize(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Index kk = static_cast<Index>(k);
    c.xbar(kk) = x.col(idx[k]).mean();
    c.xc.col(kk) = x.col(idx[k]).array() - c.xbar(kk);
  }
  return c;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_size(Index n, int k) {
  if (n < k + 2) {
    throw SingularModelError("model with " + std::to_string(k) + " covariates needs n >= " +
                             std::to_string(k + 2));
  }
}

double conjugate_constant(double n) {
  return -0.5 * (n - 1.0) * std::log(std::numbers::pi) - 0.5 * std::log(n) +
         std::lgamma(0.5 * (n - 1.0));
}

SpdMatrix gram_or_singular(const MatrixXd& xc) {
  MatrixXd xtx = xc.transpose() * xc;
  xtx = 0.5 * (xtx + xtx.transpose());
  // Relative pivot guard: exact collinearity leaves round-off-sized pivots.
  const double scale = xtx.diagonal().maxCoeff();
  try {
    SpdMatrix s(xtx);
    const double min_pivot = s.lower().diagonal().array().square().minCoeff();
    if (!(min_pivot > 1e-12 * scale)) throw SingularModelError("design is rank deficient");
    return s;
  } catch (const NotSpdError&) {
    throw SingularModelError("design is rank deficient");
  }
}

// log m for prior precision (per sigma^2) p0 on beta, shared by the
// classical and imputation variants.
double conjugate_log_marginal(const CenteredRegression& c, const MatrixXd& p0) {
  const double n = static_cast<double>(c.yc.size());
  if (!(c.tss > 0.0)) throw SingularModelError("response has zero variance");
  if (c.xc.cols() == 0) return conjugate_constant(n) - 0.5 * (n - 1.0) * std::log(c.tss);
  const SpdMatrix prior_prec(p0);
  MatrixXd a = p0 + c.xc.transpose() * c.xc;
  const SpdMatrix post_prec(0.5 * (a + a.transpose()));
  const VectorXd b = c.xc.transpose() * c.yc;
  const double q = c.tss - post_prec.quad_inverse(b);
  if (!(q > 0.0)) throw SingularModelError("non-positive residual quadratic form");
  return conjugate_constant(n) - 0.5 * (n - 1.0) * std::log(q) -
         0.5 * (post_prec.logdet() - prior_prec.logdet());
}

}  // namespace

LogMarginal log_marginal_classical(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma,
                                   double g) {
  if (!(g > 0.0)) throw DomainError("g must be positive");
  check_size(y.size(), gamma.size());
  const auto c = center_regression(y, x, gamma);
  const GPrior variant = GPrior::classical(g);
  if (gamma.size() == 0) return {conjugate_log_marginal(c, MatrixXd()), variant, gamma};
  const SpdMatrix xtx = gram_or_singular(c.xc);
  const double n = static_cast<double>(y.size());
  const double k = gamma.size();
  if (!(c.tss > 0.0)) throw SingularModelError("response has zero variance");
  const double r2 = xtx.quad_inverse(c.xc.transpose() * c.yc) / c.tss;
  const double value = conjugate_constant(n) - 0.5 * (n - 1.0) * std::log(c.tss) +
                       0.5 * (n - 1.0 - k) * std::log1p(g) -
                       0.5 * (n - 1.0) * std::log1p(g * (1.0 - r2));
  return {value, variant, gamma};
}

LogMarginal log_marginal_imputation(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma,
                                    const SpdMatrix& sigma, double g) {
  if (!(g > 0.0)) throw DomainError("g must be positive");
  if (sigma.dim() != gamma.p()) throw ContractError("imputation prior: Sigma dimension mismatch");
  check_size(y.size(), gamma.size());
  const auto c = center_regression(y, x, gamma);
  const auto idx = gamma.indices();
  MatrixXd p0;
  if (!idx.empty()) {
    const double n = static_cast<double>(y.size());
    p0 = (n / g) * sigma.sub(idx).matrix();
  }
  return {conjugate_log_marginal(c, p0), GPrior::imputation(g), gamma};
}

InducedPrior induced_fractional_prior(const VectorXd& y, const MatrixXd& x_gamma, double g) {
  if (!(g > 0.0 && g < 1.0)) throw DomainError("induced prior: g must lie in (0, 1)");
  const Index n = y.size();
  const Index k = x_gamma.cols();
  if (x_gamma.rows() != n) throw ContractError("induced prior: dimension mismatch");
  if (n <= k + 1) throw SingularModelError("induced prior: need n > k + 1");
  const auto c = center_regression(y, x_gamma, ModelIndex::full_model(static_cast<int>(k)));
  InducedPrior out;
  double rss = c.tss;
  if (k > 0) {
    const SpdMatrix xtx = gram_or_singular(c.xc);
    out.beta_hat = xtx.solve(VectorXd(c.xc.transpose() * c.yc));
    rss = (c.yc - c.xc * out.beta_hat).squaredNorm();
    out.precision_scale = g * xtx.matrix();
  } else {
    out.beta_hat = VectorXd();
    out.precision_scale = MatrixXd();
  }
  if (!(rss > 1e-14 * std::max(c.tss, 1e-300))) {
    throw DomainError("induced prior: residual sum of squares is zero (degenerate prior)");
  }
  out.shape = 0.5 * (g * static_cast<double>(n) + static_cast<double>(k));
  out.rate = 0.5 * g * rss;
  return out;
}

LogMarginal log_marginal_induced(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma,
                                 double g) {
  if (!(g > 0.0 && g < 1.0)) throw DomainError("induced prior: g must lie in (0, 1)");
  const double n = static_cast<double>(y.size());
  const double k = gamma.size();
  if (y.size() <= gamma.size() + 1) throw SingularModelError("induced prior: need n > k + 1");
  const auto c = center_regression(y, x, gamma);
  double rss = c.tss;
  if (gamma.size() > 0) {
    const SpdMatrix xtx = gram_or_singular(c.xc);
    rss = c.tss - xtx.quad_inverse(c.xc.transpose() * c.yc);
  }
  if (!(rss > 1e-14 * std::max(c.tss, 1e-300))) {
    throw SingularModelError("induced prior: perfect fit");
  }
  const double value = -0.5 * (1.0 - g) * n * std::log(std::numbers::pi) +
                       0.5 * (g * n + 2.0 * k) * std::log(g) - 0.5 * (1.0 - g) * n * std::log(rss) +
                       std::lgamma(0.5 * (n + k)) - std::lgamma(0.5 * (g * n + k));
  return {value, GPrior::induced(g), gamma};
}

double log_marginal(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma,
                    const GPrior& prior, const SpdMatrix* sigma) {
  const double g = prior.resolve_g(y.size());
  try {
    switch (prior.kind) {
      case GPrior::Kind::classical:
        return log_marginal_classical(y, x, gamma, g).value;
      case GPrior::Kind::imputation:
        if (sigma == nullptr) throw ContractError("imputation prior requires Sigma");
        return log_marginal_imputation(y, x, gamma, *sigma, g).value;
      case GPrior::Kind::induced:
        return log_marginal_induced(y, x, gamma, g).value;
    }
  } catch (const SingularModelError&) {
    return kNegInf;
  } catch (const NotSpdError&) {
    return kNegInf;
  }
  return kNegInf;
}

double log_model_prior(const ModelIndex& gamma, const ModelPrior& prior, int p) {
  if (prior.kind == ModelPrior::Kind::uniform) return -static_cast<double>(p) * std::log(2.0);
  auto log_beta = [](double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); };
  const double k = gamma.size();
  return log_beta(prior.a + k, prior.b + p - k) - log_beta(prior.a, prior.b);
}

}  // namespace bvsmiss
