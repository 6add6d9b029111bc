#include "bvsmiss/gauss.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include "bvsmiss/error.hpp"

namespace bvsmiss {

namespace {

std::atomic<std::size_t> g_jitter_count{0};

}  // namespace

MatrixXd cholesky_lower(const MatrixXd& a) {
  const Index d = a.rows();
  if (a.cols() != d) throw ContractError("cholesky_lower: matrix is not square");
  MatrixXd l = MatrixXd::Zero(d, d);
  for (Index j = 0; j < d; ++j) {
    double diag = a(j, j);
    for (Index k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      std::ostringstream msg;
      msg << "matrix is not positive definite (pivot " << j << " = " << diag << ")";
      throw NotSpdError(static_cast<std::size_t>(j), msg.str());
    }
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (Index i = j + 1; i < d; ++i) {
      double s = a(i, j);
      for (Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

SpdMatrix::SpdMatrix(const MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw ContractError("SpdMatrix: expected a nonempty square matrix");
  }
  const double scale = a.cwiseAbs().maxCoeff();
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= 1e-12 * scale)) {
    throw NotSpdError(0, "SpdMatrix: matrix is not symmetric");
  }
  a_ = 0.5 * (a + a.transpose());
  l_ = cholesky_lower(a_);
  logdet_ = 2.0 * l_.diagonal().array().log().sum();
}

MatrixXd SpdMatrix::solve(const MatrixXd& b) const {
  MatrixXd z = l_.triangularView<Eigen::Lower>().solve(b);
  return l_.transpose().triangularView<Eigen::Upper>().solve(z);
}

VectorXd SpdMatrix::solve(const VectorXd& b) const {
  VectorXd z = l_.triangularView<Eigen::Lower>().solve(b);
  return l_.transpose().triangularView<Eigen::Upper>().solve(z);
}

double SpdMatrix::quad_inverse(const VectorXd& x) const {
  VectorXd z = l_.triangularView<Eigen::Lower>().solve(x);
  return z.squaredNorm();
}

MatrixXd SpdMatrix::inverse() const {
  return solve(MatrixXd::Identity(dim(), dim()).eval());
}

SpdMatrix SpdMatrix::sub(std::span<const Index> idx) const {
  const Index k = static_cast<Index>(idx.size());
  MatrixXd s(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) s(i, j) = a_(idx[i], idx[j]);
  return SpdMatrix(s);
}

CholeskyLogdet cholesky_logdet(const SpdMatrix& a) { return {a.lower(), a.logdet()}; }

SpdMatrix jitter_repair(const MatrixXd& a) {
  const Index d = a.rows();
  const MatrixXd sym = 0.5 * (a + a.transpose());
  const double delta = 1e-10 * sym.trace() / static_cast<double>(d);
  ++g_jitter_count;
  std::clog << "[bvsmiss] jitter repair: adding " << delta << " * I (d = " << d << ")\n";
  return SpdMatrix(sym + delta * MatrixXd::Identity(d, d));
}

std::size_t jitter_repair_count() { return g_jitter_count.load(); }

ConditionalNormal conditional_normal(const VectorXd& mu, const SpdMatrix& sigma,
                                     std::span<const Index> obs_idx,
                                     const VectorXd& obs_vals) {
  const Index d = sigma.dim();
  if (obs_idx.empty() || static_cast<Index>(obs_idx.size()) >= d) {
    throw ContractError("conditional_normal: observed set must be a nonempty proper subset");
  }
  std::vector<bool> is_obs(static_cast<std::size_t>(d), false);
  for (Index i : obs_idx) {
    if (i < 0 || i >= d || is_obs[static_cast<std::size_t>(i)]) {
      throw ContractError("conditional_normal: invalid observed index");
    }
    is_obs[static_cast<std::size_t>(i)] = true;
  }
  std::vector<Index> obs(obs_idx.begin(), obs_idx.end());
  std::vector<Index> miss;
  for (Index i = 0; i < d; ++i)
    if (!is_obs[static_cast<std::size_t>(i)]) miss.push_back(i);

  ConditionalKernel kernel(mu, sigma, obs, miss);
  VectorXd row = VectorXd::Zero(d);
  for (std::size_t k = 0; k < obs.size(); ++k) row(obs[k]) = obs_vals(static_cast<Index>(k));
  return {miss, kernel.mean(row), kernel.cov()};
}

namespace {

MatrixXd submatrix(const MatrixXd& a, const std::vector<Index>& rows,
                   const std::vector<Index>& cols) {
  MatrixXd s(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) s(static_cast<Index>(i), static_cast<Index>(j)) = a(rows[i], cols[j]);
  return s;
}

VectorXd subvector(const VectorXd& v, const std::vector<Index>& idx) {
  VectorXd s(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) s(static_cast<Index>(i)) = v(idx[i]);
  return s;
}

SpdMatrix schur_complement(const SpdMatrix& sigma, const std::vector<Index>& obs,
                           const std::vector<Index>& miss, MatrixXd& regression) {
  const MatrixXd& s = sigma.matrix();
  const MatrixXd s_mm = submatrix(s, miss, miss);
  if (obs.empty()) {
    regression.resize(static_cast<Index>(miss.size()), 0);
    return SpdMatrix(s_mm);
  }
  const SpdMatrix s_oo(submatrix(s, obs, obs));
  const MatrixXd s_om = submatrix(s, obs, miss);
  // regression = Sigma_mo Sigma_oo^{-1}, computed as (Sigma_oo^{-1} Sigma_om)'.
  regression = s_oo.solve(s_om).transpose();
  MatrixXd cov = s_mm - regression * s_om;
  cov = 0.5 * (cov + cov.transpose());
  return SpdMatrix(cov);
}

}  // namespace

ConditionalKernel::ConditionalKernel(const VectorXd& mu, const SpdMatrix& sigma,
                                     std::vector<Index> obs_idx, std::vector<Index> miss_idx)
    : obs_(std::move(obs_idx)),
      miss_(std::move(miss_idx)),
      mu_miss_(subvector(mu, miss_)),
      mu_obs_(subvector(mu, obs_)),
      cov_(schur_complement(sigma, obs_, miss_, regression_)) {}

VectorXd ConditionalKernel::mean(const VectorXd& row) const {
  if (obs_.empty()) return mu_miss_;
  VectorXd dev(static_cast<Index>(obs_.size()));
  for (std::size_t k = 0; k < obs_.size(); ++k) dev(static_cast<Index>(k)) = row(obs_[k]) - mu_obs_(static_cast<Index>(k));
  return mu_miss_ + regression_ * dev;
}

VectorXd sample_mvn_factor(const VectorXd& mu, const MatrixXd& lower, Rng& rng) {
  VectorXd z(mu.size());
  for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mu + lower.triangularView<Eigen::Lower>() * z;
}

VectorXd sample_mvn(const VectorXd& mu, const SpdMatrix& sigma, Rng& rng) {
  return sample_mvn_factor(mu, sigma.lower(), rng);
}

double log_mvn_density(const VectorXd& x, const VectorXd& mu, const SpdMatrix& sigma) {
  const double d = static_cast<double>(x.size());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + sigma.logdet() +
                 sigma.quad_inverse(x - mu));
}

SpdMatrix sample_inverse_wishart(double df, const SpdMatrix& scale, Rng& rng) {
  const Index d = scale.dim();
  if (!(df > static_cast<double>(d) - 1.0)) {
    throw DomainError("sample_inverse_wishart: df must exceed dim - 1");
  }
  // Bartlett factor A of W(df, I): A_ii^2 ~ chi2(df - i), A_ij ~ N(0,1) for i > j.
  MatrixXd a = MatrixXd::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(df - static_cast<double>(i)));
    for (Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  // With scale = L L', W = L^{-T} A A' L^{-1} ~ W(df, scale^{-1}) and
  // Sigma = W^{-1} = T' T where T = A^{-1} L'.
  const MatrixXd t = a.triangularView<Eigen::Lower>().solve(MatrixXd(scale.lower().transpose()));
  MatrixXd sigma = t.transpose() * t;
  sigma = 0.5 * (sigma + sigma.transpose());
  return SpdMatrix(sigma);
}

double log_inverse_wishart_density(const SpdMatrix& x, double df, const SpdMatrix& scale) {
  const int d = static_cast<int>(x.dim());
  const double trace = x.solve(scale.matrix()).trace();
  return 0.5 * df * scale.logdet() - wishart_log_normalizer(df, d) -
         0.5 * (df + d + 1.0) * x.logdet() - 0.5 * trace;
}

double log_multivariate_gamma(double a, int dim) {
  double s = 0.25 * dim * (dim - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= dim; ++j) s += std::lgamma(a + 0.5 * (1 - j));
  return s;
}

double wishart_log_normalizer(double df, int dim) {
  if (dim < 1 || !(df > dim - 1.0)) {
    throw DomainError("wishart_log_normalizer: df must exceed dim - 1");
  }
  return log_multivariate_gamma(0.5 * df, dim) + 0.5 * df * dim * std::log(2.0);
}

void NiwParams::validate() const {
  const Index d = dim();
  if (d == 0 || s0.rows() != d || s0.cols() != d) throw ContractError("NiwParams: dimension mismatch");
  if (!(k0 > 0.0)) throw DomainError("NiwParams: k0 must be positive");
  if (!(v0 > d - 1.0)) throw DomainError("NiwParams: v0 must exceed dim - 1");
  SpdMatrix check(s0);
  (void)check;
}

VectorXd column_means(const MatrixXd& x) { return x.colwise().mean().transpose(); }

MatrixXd centered_scatter(const MatrixXd& x) {
  const MatrixXd c = x.rowwise() - x.colwise().mean();
  MatrixXd s = c.transpose() * c;
  return 0.5 * (s + s.transpose());
}

NiwParams niw_posterior(const MatrixXd& x, const NiwParams& prior) {
  const double n = static_cast<double>(x.rows());
  if (x.rows() < 1) throw ContractError("niw_posterior: need at least one row");
  if (x.cols() != prior.dim()) throw ContractError("niw_posterior: dimension mismatch");
  const VectorXd xbar = column_means(x);
  const VectorXd diff = xbar - prior.m0;
  NiwParams post;
  post.k0 = prior.k0 + n;
  post.v0 = prior.v0 + n;
  post.m0 = (prior.k0 * prior.m0 + n * xbar) / post.k0;
  MatrixXd s = prior.s0 + centered_scatter(x) + (prior.k0 * n / post.k0) * diff * diff.transpose();
  post.s0 = 0.5 * (s + s.transpose());
  return post;
}

MvnDraw sample_niw(const NiwParams& params, Rng& rng) {
  SpdMatrix sigma = sample_inverse_wishart(params.v0, SpdMatrix(params.s0), rng);
  const MatrixXd lower = sigma.lower() / std::sqrt(params.k0);
  VectorXd mu = sample_mvn_factor(params.m0, lower, rng);
  return {std::move(mu), std::move(sigma)};
}

}  // namespace bvsmiss
