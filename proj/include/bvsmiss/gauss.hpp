#pragma once

// Dense Gaussian linear algebra and conjugate samplers.
//
// Conventions used throughout the library:
//  * Every covariance that must be positive definite is carried as an
//    SpdMatrix, which owns its lower Cholesky factor. Solves go through
//    triangular systems; nothing calls an explicit inverse.
//  * Inverse Wishart IW(df, S) uses the standard degrees of freedom: the
//    density is |S|^{df/2} / (2^{df d/2} Gamma_d(df/2)) |X|^{-(df+d+1)/2}
//    exp(-tr(S X^{-1})/2), mean S / (df - d - 1).
//  * wishart_log_normalizer(df, d) = log Gamma_d(df/2) + (df d / 2) log 2,
//    i.e. the IW(df, S) normalizing constant without its |S|^{-df/2}
//    factor. The graphs module builds HIW clique terms from it.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bvsmiss/rng.hpp"

namespace bvsmiss {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Index = Eigen::Index;

/// Lower Cholesky factor of a symmetric matrix; throws NotSpdError naming
/// the first non-positive pivot. Only the lower triangle is read.
MatrixXd cholesky_lower(const MatrixXd& a);

class SpdMatrix {
 public:
  /// Validates symmetry (1e-12 relative) and factorizes.
  explicit SpdMatrix(const MatrixXd& a);

  Index dim() const { return a_.rows(); }
  const MatrixXd& matrix() const { return a_; }
  const MatrixXd& lower() const { return l_; }
  double logdet() const { return logdet_; }

  /// a^{-1} b via the two triangular solves.
  MatrixXd solve(const MatrixXd& b) const;
  VectorXd solve(const VectorXd& b) const;
  /// x' a^{-1} x.
  double quad_inverse(const VectorXd& x) const;
  MatrixXd inverse() const;

  /// Principal submatrix; throws NotSpdError only on numerical breakdown.
  SpdMatrix sub(std::span<const Index> idx) const;

 private:
  MatrixXd a_;
  MatrixXd l_;
  double logdet_ = 0.0;
};

struct CholeskyLogdet {
  MatrixXd lower;
  double logdet;
};

CholeskyLogdet cholesky_logdet(const SpdMatrix& a);

/// Returns a + delta I with delta = 1e-10 trace(a)/d. Reserved for MCMC
/// proposal repair; every call is logged to std::clog and counted.
SpdMatrix jitter_repair(const MatrixXd& a);
std::size_t jitter_repair_count();

struct ConditionalNormal {
  std::vector<Index> free_idx;  // coordinates of the conditional law
  VectorXd mean;
  SpdMatrix cov;
};

/// Law of x_a given x_b = obs_vals where b = obs_idx and a its complement
/// (in increasing order). obs_idx must be a nonempty proper subset.
ConditionalNormal conditional_normal(const VectorXd& mu, const SpdMatrix& sigma,
                                     std::span<const Index> obs_idx,
                                     const VectorXd& obs_vals);

/// Precomputed conditional kernel for one (observed, missing) split, so a
/// whole missingness pattern shares one Schur complement.
class ConditionalKernel {
 public:
  ConditionalKernel(const VectorXd& mu, const SpdMatrix& sigma,
                    std::vector<Index> obs_idx, std::vector<Index> miss_idx);

  const std::vector<Index>& observed() const { return obs_; }
  const std::vector<Index>& missing() const { return miss_; }
  /// Conditional mean of the missing block given the full row x (only the
  /// observed coordinates of x are read).
  VectorXd mean(const VectorXd& row) const;
  const SpdMatrix& cov() const { return cov_; }

 private:
  std::vector<Index> obs_;
  std::vector<Index> miss_;
  VectorXd mu_miss_;
  VectorXd mu_obs_;
  MatrixXd regression_;  // Sigma_mo Sigma_oo^{-1}
  SpdMatrix cov_;
};

VectorXd sample_mvn(const VectorXd& mu, const SpdMatrix& sigma, Rng& rng);
/// mu + L z for a caller-supplied lower factor L.
VectorXd sample_mvn_factor(const VectorXd& mu, const MatrixXd& lower, Rng& rng);

double log_mvn_density(const VectorXd& x, const VectorXd& mu, const SpdMatrix& sigma);

/// Standard-df inverse Wishart draw via the Bartlett decomposition of the
/// Wishart on the inverse scale. Requires df > dim - 1.
SpdMatrix sample_inverse_wishart(double df, const SpdMatrix& scale, Rng& rng);

double log_inverse_wishart_density(const SpdMatrix& x, double df, const SpdMatrix& scale);

double log_multivariate_gamma(double a, int dim);
double wishart_log_normalizer(double df, int dim);

struct NiwParams {
  VectorXd m0;
  double k0 = 1.0;
  double v0 = 0.0;
  MatrixXd s0;

  Index dim() const { return m0.size(); }
  void validate() const;
};

/// Normal-inverse-Wishart conjugate update for rows of x (n >= 1):
/// mu | Sigma ~ N(m, Sigma / k), Sigma ~ IW(v, S).
NiwParams niw_posterior(const MatrixXd& x, const NiwParams& prior);

struct MvnDraw {
  VectorXd mu;
  SpdMatrix sigma;
};

MvnDraw sample_niw(const NiwParams& params, Rng& rng);

/// Column means and centered scatter sum (x - xbar)'(x - xbar).
VectorXd column_means(const MatrixXd& x);
MatrixXd centered_scatter(const MatrixXd& x);

}  // namespace bvsmiss
