#include <doctest.h>

#include <cmath>
#include <limits>

#include <boost/math/special_functions/binomial.hpp>

#include "bvsmiss/error.hpp"
#include "bvsmiss/priors.hpp"
#include "oracles.hpp"

using namespace bvsmiss;

namespace {

struct Instance {
  VectorXd y;
  MatrixXd x;
};

Instance random_instance(Index n, Index p, std::uint64_t seed) {
  Rng rng(seed);
  Instance in{VectorXd(n), oracle::random_matrix(n, p, rng)};
  for (Index i = 0; i < n; ++i) in.y(i) = 0.5 + 0.8 * in.x(i, 0) - 0.4 * in.x(i, p - 1) + rng.normal();
  return in;
}

double r_squared(const VectorXd& y, const MatrixXd& x, const ModelIndex& g) {
  const auto c = center_regression(y, x, g);
  const VectorXd fit = c.xc * c.xc.colPivHouseholderQr().solve(c.yc);
  return fit.squaredNorm() / c.tss;
}

}  // namespace

TEST_CASE("classical Bayes factor has the R-squared form") {
  const Instance in = random_instance(25, 4, 1);
  const double n = 25, g = 25;
  const double null = log_marginal_classical(in.y, in.x, ModelIndex::null_model(4), g).value;
  for (std::uint64_t b = 0; b < 16; ++b) {
    const ModelIndex gm(b, 4);
    const double k = gm.size();
    const double r2 = b == 0 ? 0.0 : r_squared(in.y, in.x, gm);
    const double bf = (n - 1 - k) / 2 * std::log1p(g) - (n - 1) / 2 * std::log1p(g * (1 - r2));
    CHECK(log_marginal_classical(in.y, in.x, gm, g).value - null == doctest::Approx(bf).epsilon(1e-10));
  }
}

TEST_CASE("classical hand example: R^2 = 0, g = 7, n = 9") {
  Rng rng(2);
  VectorXd y(9), x(9);
  for (int i = 0; i < 9; ++i) y(i) = rng.normal(), x(i) = rng.normal();
  y.array() -= y.mean();
  x.array() -= x.mean();
  x -= (x.dot(y) / y.squaredNorm()) * y;  // orthogonal to y after centering
  const MatrixXd xm = x;
  const double bf = log_marginal_classical(y, xm, ModelIndex(1, 1), 7).value -
                    log_marginal_classical(y, xm, ModelIndex(0, 1), 7).value;
  CHECK(bf == doctest::Approx(-0.5 * std::log(8.0)).epsilon(1e-10));
  CHECK(bf == doctest::Approx(-1.0397).epsilon(1e-4));
}

TEST_CASE("closed forms agree with an importance-sampling oracle") {
  const Instance in = random_instance(30, 3, 5);
  const ModelIndex gm = ModelIndex::from_indices({0, 2}, 3);
  Rng rng(9);
  const MatrixXd sigma = oracle::random_spd(3, rng);
  const int draws = 200000;

  const auto c = oracle::is_log_marginal_gprior(in.y, in.x, gm, 30, nullptr, draws, 11);
  const double cv = log_marginal_classical(in.y, in.x, gm, 30).value;
  CHECK(std::abs(cv - c.value) < 3 * c.se);

  const auto im = oracle::is_log_marginal_gprior(in.y, in.x, gm, 30, &sigma, draws, 12);
  const double iv = log_marginal_imputation(in.y, in.x, gm, SpdMatrix(sigma), 30).value;
  CHECK(std::abs(iv - im.value) < 3 * im.se);

  const auto id = oracle::is_log_marginal_induced(in.y, in.x, gm, 1.0 / 30, draws, 13);
  const double dv = log_marginal_induced(in.y, in.x, gm, 1.0 / 30).value;
  CHECK(std::abs(dv - id.value) < 3 * id.se);
}

TEST_CASE("imputation prior at the sample covariance equals classical") {
  const Instance in = random_instance(30, 4, 7);
  const MatrixXd xc = in.x.rowwise() - in.x.colwise().mean();
  const SpdMatrix s(xc.transpose() * xc / 30.0);
  for (std::uint64_t b = 0; b < 16; ++b) {
    const ModelIndex gm(b, 4);
    CHECK(std::abs(log_marginal_imputation(in.y, in.x, gm, s, 30).value -
                   log_marginal_classical(in.y, in.x, gm, 30).value) < 1e-10);
  }
  Rng rng(1);
  const SpdMatrix other(oracle::random_spd(4, rng));
  CHECK(log_marginal_imputation(in.y, in.x, ModelIndex::null_model(4), other, 30).value ==
        log_marginal_classical(in.y, in.x, ModelIndex::null_model(4), 30).value);
}

TEST_CASE("induced_fractional_prior") {
  const Instance in = random_instance(20, 2, 3);
  const double g = 0.05;
  const auto pr = induced_fractional_prior(in.y, in.x, g);
  MatrixXd a(20, 3);
  a.col(0).setOnes();
  a.rightCols(2) = in.x;
  const VectorXd qr = a.householderQr().solve(in.y);
  CHECK((pr.beta_hat - qr.tail(2)).cwiseAbs().maxCoeff() < 1e-10);
  const double rss = (in.y - a * qr).squaredNorm();
  CHECK(pr.rate == doctest::Approx(g * rss / 2).epsilon(1e-10));
  CHECK(pr.shape == doctest::Approx((g * 20 + 2) / 2));

  // orthonormal centered columns
  MatrixXd q = Eigen::HouseholderQR<MatrixXd>(a).householderQ() * MatrixXd::Identity(20, 3);
  const MatrixXd xo = q.rightCols(2);  // orthogonal to the ones column, so already centered
  const auto po = induced_fractional_prior(in.y, xo, g);
  CHECK((po.precision_scale - g * MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  const VectorXd exact = 1.0 + 2.0 * in.x.col(0).array();
  CHECK_THROWS_AS(induced_fractional_prior(exact, in.x, g), DomainError);
  CHECK_THROWS_AS(induced_fractional_prior(in.y, in.x, 1.5), DomainError);
}

TEST_CASE("induced null model matches quadrature") {
  const Instance in = random_instance(20, 2, 4);
  const double g = 1.0 / 20;
  const double ref = oracle::quad_log_marginal_induced_null(in.y, g);
  CHECK(std::abs(log_marginal_induced(in.y, in.x, ModelIndex::null_model(2), g).value - ref) < 1e-8);
}

TEST_CASE("induced Bayes factors vanish as g approaches 1") {
  const Instance in = random_instance(30, 3, 8);
  const double g = 1 - 1e-8;
  const double null = log_marginal_induced(in.y, in.x, ModelIndex::null_model(3), g).value;
  for (std::uint64_t b = 1; b < 8; ++b)
    CHECK(std::abs(log_marginal_induced(in.y, in.x, ModelIndex(b, 3), g).value - null) < 1e-5);
}

TEST_CASE("induced log Bayes factor grows without bound as R^2 -> 1") {
  Rng rng(3);
  const Index n = 20;
  VectorXd x(n), e(n);
  for (Index i = 0; i < n; ++i) x(i) = rng.normal(), e(i) = rng.normal();
  const MatrixXd xm = x;
  double prev = -std::numeric_limits<double>::infinity();
  for (double s : {2.0, 1.0, 0.5, 0.1, 1e-2, 1e-3, 1e-5}) {
    const VectorXd y = x + s * e;
    const double bf = log_marginal_induced(y, xm, ModelIndex(1, 1), 1.0 / n).value -
                      log_marginal_induced(y, xm, ModelIndex(0, 1), 1.0 / n).value;
    CHECK(bf > prev);
    prev = bf;
  }
  CHECK(prev > 50);
}

TEST_CASE("Bayes factors are invariant to affine maps of y") {
  const Instance in = random_instance(25, 3, 9);
  Rng rng(1);
  const SpdMatrix s(oracle::random_spd(3, rng));
  const VectorXd y2 = 3.5 * in.y.array() + 2.0;
  for (const auto& v : {GPrior::classical(), GPrior::imputation()}) {
    const double base1 = log_marginal(in.y, in.x, ModelIndex(0, 3), v, &s);
    const double base2 = log_marginal(y2, in.x, ModelIndex(0, 3), v, &s);
    for (std::uint64_t b = 1; b < 8; ++b) {
      const double bf1 = log_marginal(in.y, in.x, ModelIndex(b, 3), v, &s) - base1;
      const double bf2 = log_marginal(y2, in.x, ModelIndex(b, 3), v, &s) - base2;
      CHECK(std::abs(bf1 - bf2) < 1e-8);
    }
  }
}

TEST_CASE("column rescaling leaves the marginals unchanged") {
  const Instance in = random_instance(25, 3, 10);
  Rng rng(2);
  const MatrixXd sigma = oracle::random_spd(3, rng);
  MatrixXd x2 = in.x;
  x2.col(1) *= -4.0;
  MatrixXd dm = MatrixXd::Identity(3, 3);
  dm(1, 1) = -4.0;
  const SpdMatrix s1(sigma), s2(dm * sigma * dm);
  for (std::uint64_t b = 0; b < 8; ++b) {
    const ModelIndex gm(b, 3);
    CHECK(std::abs(log_marginal_classical(in.y, in.x, gm, 25).value -
                   log_marginal_classical(in.y, x2, gm, 25).value) < 1e-10);
    CHECK(std::abs(log_marginal_imputation(in.y, in.x, gm, s1, 25).value -
                   log_marginal_imputation(in.y, x2, gm, s2, 25).value) < 1e-10);
  }
}

TEST_CASE("rank-deficient models get -inf through the dispatcher") {
  Instance in = random_instance(15, 3, 11);
  in.x.col(2) = 2.0 * in.x.col(0);
  const ModelIndex bad = ModelIndex::from_indices({0, 2}, 3);
  CHECK_THROWS_AS(log_marginal_classical(in.y, in.x, bad, 15), SingularModelError);
  CHECK(log_marginal(in.y, in.x, bad, GPrior::classical()) == -std::numeric_limits<double>::infinity());
  CHECK(log_marginal(in.y, in.x, bad, GPrior::induced()) == -std::numeric_limits<double>::infinity());
  CHECK(std::isfinite(log_marginal(in.y, in.x, ModelIndex::from_indices({0, 1}, 3), GPrior::classical())));
}

TEST_CASE("g defaults and validation") {
  CHECK(GPrior::classical().resolve_g(40) == 40);
  CHECK(GPrior::imputation().resolve_g(40) == 40);
  CHECK(GPrior::induced().resolve_g(40) == doctest::Approx(0.025));
  CHECK_THROWS_AS(GPrior::induced(2.0).validate(10), DomainError);
  CHECK_THROWS_AS(GPrior::classical(-1.0).validate(10), DomainError);
  CHECK(GPrior::parse("imputation").kind == GPrior::Kind::imputation);
  CHECK_THROWS_AS(GPrior::parse("hyper-g"), ContractError);
}

TEST_CASE("model priors") {
  CHECK(log_model_prior(ModelIndex(5, 3), ModelPrior::uniform(), 3) == doctest::Approx(-3 * std::log(2.0)));
  for (int k = 0; k <= 5; ++k) {
    const ModelIndex gm((std::uint64_t{1} << k) - 1, 5);
    const double ref = -std::log(6.0 * boost::math::binomial_coefficient<double>(5, static_cast<unsigned>(k)));
    CHECK(log_model_prior(gm, ModelPrior::beta_binomial(1, 1), 5) == doctest::Approx(ref).epsilon(1e-12));
  }
  for (int p = 1; p <= 10; ++p) {
    for (const auto& pr : {ModelPrior::uniform(), ModelPrior::beta_binomial(2, 3)}) {
      double s = 0.0;
      for (std::uint64_t b = 0; b < (std::uint64_t{1} << p); ++b) s += std::exp(log_model_prior(ModelIndex(b, p), pr, p));
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}
