#pragma once

// Closed-form log marginal likelihoods of y given a completed covariate
// matrix, and model-space priors.
//
// All three g-prior variants center y and the selected columns within the
// computation. Classical and imputation variants use a flat prior on the
// intercept and p(sigma^2) proportional to 1/sigma^2 with unit constants,
// and beta | sigma^2 ~ N(0, sigma^2 V0):
//
//   classical   V0 = g (Xc'Xc)^{-1}
//   imputation  V0 = g (n Sigma_gg)^{-1}
//
// which integrates to
//
//   log m = -(n-1)/2 log pi - 1/2 log n + lgamma((n-1)/2)
//           - (n-1)/2 log Q - 1/2 log|I + V0 Xc'Xc|,
//   Q = yc'yc - yc'Xc (V0^{-1} + Xc'Xc)^{-1} Xc'yc.
//
// The induced-fractional variant integrates the (1-g)-power likelihood of
// the centered regression against beta | sigma^2 ~ N(beta_hat,
// sigma^2/g (Xc'Xc)^{-1}), 1/sigma^2 ~ Ga((gn+k)/2, g RSS/2):
//
//   log m = -(1-g)n/2 log pi + (gn+2k)/2 log g - (1-g)n/2 log RSS
//           + lgamma((n+k)/2) - lgamma((gn+k)/2).

#include <optional>
#include <string>

#include "bvsmiss/datamodel.hpp"
#include "bvsmiss/gauss.hpp"

namespace bvsmiss {

struct GPrior {
  enum class Kind { classical, imputation, induced };
  Kind kind = Kind::classical;
  /// Unset means the default: n for classical/imputation, 1/n for induced.
  std::optional<double> g;

  static GPrior classical(std::optional<double> g = std::nullopt) { return {Kind::classical, g}; }
  static GPrior imputation(std::optional<double> g = std::nullopt) { return {Kind::imputation, g}; }
  static GPrior induced(std::optional<double> g = std::nullopt) { return {Kind::induced, g}; }

  double resolve_g(Index n) const;
  /// Validates g against the variant's range.
  void validate(Index n) const;
  bool needs_sigma() const { return kind == Kind::imputation; }
  std::string name() const;
  static GPrior parse(const std::string& name, std::optional<double> g = std::nullopt);
};

struct ModelPrior {
  enum class Kind { uniform, beta_binomial };
  Kind kind = Kind::uniform;
  double a = 1.0;
  double b = 1.0;

  static ModelPrior uniform() { return {}; }
  static ModelPrior beta_binomial(double a, double b) { return {Kind::beta_binomial, a, b}; }
  std::string name() const;
};

struct LogMarginal {
  double value;
  GPrior variant;
  ModelIndex gamma;
};

/// Throws SingularModelError when Xc is rank deficient or n < k + 2.
LogMarginal log_marginal_classical(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma,
                                   double g);

/// sigma is the full p x p covariance of the current nu draw.
LogMarginal log_marginal_imputation(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma,
                                    const SpdMatrix& sigma, double g);

struct InducedPrior {
  VectorXd beta_hat;
  MatrixXd precision_scale;  // g Xc'Xc; beta | sigma^2 has precision precision_scale / sigma^2
  double shape;
  double rate;
};

/// Parameters of the fractional prior induced on the regression of y on
/// x_gamma (columns already selected). Requires 0 < g < 1, full column
/// rank and RSS > 0 (DomainError otherwise).
InducedPrior induced_fractional_prior(const VectorXd& y, const MatrixXd& x_gamma, double g);

LogMarginal log_marginal_induced(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma,
                                 double g);

/// Variant dispatch returning -inf for singular models instead of throwing.
/// sigma is required for the imputation variant and ignored otherwise.
double log_marginal(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma,
                    const GPrior& prior, const SpdMatrix* sigma = nullptr);

double log_model_prior(const ModelIndex& gamma, const ModelPrior& prior, int p);

/// Centered response and selected columns.
struct CenteredRegression {
  VectorXd yc;
  MatrixXd xc;
  double ybar;
  VectorXd xbar;
  double tss;
};

CenteredRegression center_regression(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma);

}  // namespace bvsmiss
