#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sbd/priors.hpp"

using namespace sbd;

namespace {
const NoiseSchedule kVp = NoiseSchedule::variance_preserving();

// solve for tau with alpha(tau) = target by bisection (test-side utility)
double tau_for_alpha(const NoiseSchedule& sched, double target) {
  double lo = 0.0, hi = sched.horizon();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (sched.alpha(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}
}  // namespace

TEST_CASE("score_gaussian: standard normal at tau=0 gives -x") {
  GaussianPrior prior(Vec::Zero(3).eval(), Vec::Ones(3).eval());
  Rng rng = make_stream(1, 1);
  const Vec x = gaussian_vec(3, rng);
  CHECK((prior.score(x, 0.0, kVp) + x).norm() < 1e-12);
}

TEST_CASE("score_gaussian: vanishes at the perturbed mode") {
  Rng rng = make_stream(1, 2);
  const Vec mu = gaussian_vec(4, rng);
  Vec var(4);
  var << 0.3, 1.1, 2.0, 0.7;
  GaussianPrior prior(mu, var);
  const double tau = 0.37;
  const double a = kVp.alpha(tau);
  CHECK(prior.score(a * mu, tau, kVp).norm() < 1e-12);
}

TEST_CASE("score_gaussian: 1-D hand value at (alpha, sigma) = (0.8, 0.6)") {
  GaussianPrior prior(Vec::Constant(1, 2.0).eval(), Vec::Constant(1, 4.0).eval());
  const double tau = tau_for_alpha(kVp, 0.8);
  REQUIRE(kVp.alpha(tau) == doctest::Approx(0.8).epsilon(1e-10));
  REQUIRE(kVp.sigma(tau) == doctest::Approx(0.6).epsilon(1e-9));
  const double expected = -(1.0 - 0.8 * 2.0) / (0.64 * 4.0 + 0.36);
  CHECK(prior.score(Vec::Constant(1, 1.0), tau, kVp)[0] ==
        doctest::Approx(expected).epsilon(1e-9));
  CHECK(expected == doctest::Approx(0.2054794520547945).epsilon(1e-12));
}

TEST_CASE("score_gaussian: dense covariance matches finite differences") {
  Rng rng = make_stream(1, 3);
  Mat l = Mat::Random(3, 3);
  Mat cov = l * l.transpose() + 0.5 * Mat::Identity(3, 3);
  const Vec mu = gaussian_vec(3, rng);
  GaussianPrior prior(mu, cov);
  const double tau = 0.42;
  const auto [a, s] = kVp.rates(tau);
  const Mat eff = a * a * cov + s * s * Mat::Identity(3, 3);
  auto logpdf = [&](const Vec& x) {
    const Vec c = x - a * mu;
    return -0.5 * c.dot(eff.inverse() * c);  // normalization drops in the gradient
  };
  const Vec x = gaussian_vec(3, rng);
  const Vec fd = oracle::fd_gradient(logpdf, x);
  const Vec sc = prior.score(x, tau, kVp);
  CHECK((fd - sc).norm() / fd.norm() < 1e-6);
}

TEST_CASE("score_gmm: single component reduces to score_gaussian") {
  Rng rng = make_stream(1, 4);
  const Vec mu = gaussian_vec(5, rng);
  Vec var(5);
  var << 0.5, 0.6, 0.7, 0.8, 0.9;
  GaussianPrior gauss(mu, var);
  GmmPrior gmm(Vec::Ones(1), {mu}, {var});
  const Vec x = gaussian_vec(5, rng);
  for (double tau : {0.0, 0.3, 0.9})
    CHECK((gmm.score(x, tau, kVp) - gauss.score(x, tau, kVp)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("score_gmm: symmetric two-component mixture has zero score at the origin") {
  Vec w(2);
  w << 0.5, 0.5;
  Vec mu = Vec::Constant(2, 1.3);
  GmmPrior gmm(w, {mu, Vec(-mu)}, {Vec::Ones(2), Vec::Ones(2)});
  for (double tau : {0.05, 0.5}) CHECK(gmm.score(Vec::Zero(2), tau, kVp).norm() < 1e-12);
}

TEST_CASE("score_gmm: matches finite differences of the perturbed log density") {
  const std::vector<double> w{0.3, 0.5, 0.2};
  const std::vector<double> m{-2.0, 0.5, 2.5};
  const std::vector<double> v{0.4, 1.0, 0.25};
  Vec wv(3);
  wv << w[0], w[1], w[2];
  GmmPrior gmm(wv, {Vec::Constant(1, m[0]), Vec::Constant(1, m[1]), Vec::Constant(1, m[2])},
               {Vec::Constant(1, v[0]), Vec::Constant(1, v[1]), Vec::Constant(1, v[2])});
  for (double tau : {0.1, 0.45}) {
    const auto [a, s] = kVp.rates(tau);
    double worst = 0.0;
    for (int g = 0; g < 1000; ++g) {
      const double x = -5.0 + 10.0 * g / 999.0;
      const double fd = oracle::fd_derivative(
          [&](double u) { return oracle::gmm1d_perturbed_logpdf(u, w, m, v, a, s); }, x);
      const double sc = gmm.score(Vec::Constant(1, x), tau, kVp)[0];
      worst = std::max(worst, std::abs(fd - sc) / std::max(1.0, std::abs(fd)));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("score_gmm: responsibility underflow raises instead of returning zero") {
  GmmPrior gmm(Vec::Ones(1), {Vec::Zero(1)}, {Vec::Ones(1)});
  CHECK_THROWS_AS((void)gmm.score(Vec::Constant(1, 1e200), 0.3, kVp), NumericError);
}

TEST_CASE("score_gmm: permutation and weight-splitting invariance") {
  Rng rng = make_stream(1, 5);
  const Vec m1 = gaussian_vec(2, rng), m2 = gaussian_vec(2, rng);
  Vec w(2);
  w << 0.4, 0.6;
  GmmPrior a(w, {m1, m2}, {Vec::Ones(2), Vec::Constant(2, 0.5)});
  Vec wp(2);
  wp << 0.6, 0.4;
  GmmPrior b(wp, {m2, m1}, {Vec::Constant(2, 0.5), Vec::Ones(2)});
  Vec ws(3);
  ws << 0.4, 0.3, 0.3;  // duplicate the second component with split weights
  GmmPrior c(ws, {m1, m2, m2}, {Vec::Ones(2), Vec::Constant(2, 0.5), Vec::Constant(2, 0.5)});
  const Vec x = gaussian_vec(2, rng);
  for (double tau : {0.0, 0.2, 0.8}) {
    CHECK((a.score(x, tau, kVp) - b.score(x, tau, kVp)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((a.score(x, tau, kVp) - c.score(x, tau, kVp)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("tweedie_denoise: no noise at tau=0") {
  Rng rng = make_stream(1, 6);
  const Vec x = gaussian_vec(4, rng);
  const Vec score = gaussian_vec(4, rng);
  CHECK((tweedie_denoise(score, x, 0.0, kVp) - x).norm() == 0.0);
}

TEST_CASE("tweedie_denoise: Gaussian conjugate posterior mean, closed form") {
  Rng rng = make_stream(1, 7);
  const Vec mu = gaussian_vec(3, rng);
  Vec var(3);
  var << 0.4, 1.0, 2.5;
  GaussianPrior prior(mu, var);
  const double tau = 0.5;
  const auto [a, s] = kVp.rates(tau);
  const Vec x = gaussian_vec(3, rng);
  const Vec tw = prior.denoise(x, tau, kVp);
  // closed form: mu + alpha Sigma (alpha^2 Sigma + sigma^2)^{-1} (x - alpha mu)
  Vec expected(3);
  for (int i = 0; i < 3; ++i)
    expected[i] = mu[i] + a * var[i] / (a * a * var[i] + s * s) * (x[i] - a * mu[i]);
  CHECK((tw - expected).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((tw - prior.posterior_mean(x, tau, kVp)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tweedie_denoise: 1-D GMM matches quadrature") {
  const std::vector<double> w{0.35, 0.65};
  const std::vector<double> m{-1.0, 1.8};
  const std::vector<double> v{0.5, 1.2};
  Vec wv(2);
  wv << w[0], w[1];
  GmmPrior gmm(wv, {Vec::Constant(1, m[0]), Vec::Constant(1, m[1])},
               {Vec::Constant(1, v[0]), Vec::Constant(1, v[1])});
  for (double tau : {0.15, 0.5}) {
    const auto [a, s] = kVp.rates(tau);
    for (double xt : {-2.0, -0.3, 0.9, 2.4}) {
      const double quad = oracle::gmm1d_posterior_mean_quadrature(xt, w, m, v, a, s);
      const double tw = gmm.denoise(Vec::Constant(1, xt), tau, kVp)[0];
      CHECK(tw == doctest::Approx(quad).epsilon(1e-6));
    }
  }
}

TEST_CASE("tweedie consistency holds for every prior type (algebraic identity)") {
  Rng rng = make_stream(1, 8);
  const double tau = 0.3;
  const Vec x = gaussian_vec(4, rng);

  GaussianPrior gauss(gaussian_vec(4, rng), Vec::Constant(4, 0.8).eval());
  Vec w(2);
  w << 0.5, 0.5;
  GmmPrior gmm(w, {gaussian_vec(4, rng), gaussian_vec(4, rng)},
               {Vec::Ones(4), Vec::Constant(4, 0.6)});
  SparsityPrior sparse(4, 0.4);
  PointMassPrior point(Vec::Zero(4));

  const ScorePrior* priors[] = {&gauss, &gmm, &sparse, &point};
  for (const ScorePrior* p : priors) {
    const Vec via_tweedie = tweedie_denoise(p->score(x, tau, kVp), x, tau, kVp);
    CHECK((via_tweedie - p->denoise(x, tau, kVp)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("soft_threshold: textbook prox values") {
  CHECK(soft_threshold(Vec::Constant(1, 3.0).eval(), 1.0)[0] == doctest::Approx(2.0));
  CHECK(soft_threshold(Vec::Constant(1, -3.0).eval(), 1.0)[0] == doctest::Approx(-2.0));
  CHECK(soft_threshold(Vec::Constant(1, 0.7).eval(), 1.0)[0] == 0.0);
  CHECK(soft_threshold(Vec::Constant(1, -1.0).eval(), 1.0)[0] == 0.0);
  CHECK(soft_threshold(Vec::Zero(1).eval(), 0.5)[0] == 0.0);
}

TEST_CASE("soft_threshold: complex phase is preserved") {
  CVec x(1);
  x[0] = std::polar(4.0, std::numbers::pi / 3.0);
  const CVec out = soft_threshold(x, 1.0);
  const std::complex<double> expected = std::polar(3.0, std::numbers::pi / 3.0);
  CHECK(std::abs(out[0] - expected) < 1e-12);
  CVec zero(1);
  zero[0] = 0.0;
  CHECK(std::abs(soft_threshold(zero, 1.0)[0]) == 0.0);
}

TEST_CASE("soft_threshold is non-expansive (real and complex)") {
  Rng rng = make_stream(1, 9);
  std::uniform_real_distribution<double> lam(0.01, 2.0);
  for (int k = 0; k < 10000; ++k) {
    const double l = lam(rng);
    const Vec a = 3.0 * gaussian_vec(4, rng);
    const Vec b = 3.0 * gaussian_vec(4, rng);
    CHECK((soft_threshold(a, l) - soft_threshold(b, l)).norm() <= (a - b).norm() + 1e-12);
    const CVec ca = unstack_complex(a), cb = unstack_complex(b);
    CHECK((soft_threshold(ca, l) - soft_threshold(cb, l)).norm() <= (ca - cb).norm() + 1e-12);
  }
}

TEST_CASE("sparse_posterior_mean: grid-search oracle on random 1-D instances") {
  Rng rng = make_stream(1, 10);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const double xt = 6.0 * (unif(rng) - 0.5);
    const double tau = 0.1 + 0.85 * unif(rng);
    const double sig = kVp.sigma(tau);
    const double lambda = 0.05 + 2.0 * unif(rng);
    SparsityPrior prior(1, [lambda](double) { return lambda; });
    const double ours = prior.denoise(Vec::Constant(1, xt), tau, kVp)[0];
    double resolution = 0.0;
    const double brute = oracle::grid_search_sparse_objective(xt, lambda, sig, 200000, &resolution);
    CHECK(std::abs(ours - brute) <= resolution + 1e-12);
  }
}

TEST_CASE("sparse_posterior_mean: limits") {
  SparsityPrior tiny(2, 1e-12);
  Rng rng = make_stream(1, 11);
  const Vec x = gaussian_vec(2, rng);
  CHECK((tiny.denoise(x, 0.5, kVp) - x).cwiseAbs().maxCoeff() < 1e-9);  // lambda -> 0
  SparsityPrior prior(2, 0.5);
  CHECK(prior.denoise(Vec::Zero(2), 0.5, kVp).norm() == 0.0);  // fixed point at zero
}

TEST_CASE("score_sparse: dead zone pulls to zero; sigma=0 is a domain error") {
  SparsityPrior prior(1, 2.0);
  const double tau = 0.4;
  const auto [a, s] = kVp.rates(tau);
  (void)a;
  const double thresh = prior.effective_threshold(tau, kVp);
  const Vec x = Vec::Constant(1, 0.5 * thresh);
  CHECK(prior.score(x, tau, kVp)[0] == doctest::Approx(-x[0] / (s * s)).epsilon(1e-12));
  CHECK_THROWS_AS((void)prior.score(x, 0.0, kVp), std::domain_error);
}

TEST_CASE("score_sparse: large |x| limit is -lambda_tau sign(x) when alpha=1") {
  // variance-exploding keeps alpha = 1
  const auto ve = NoiseSchedule::variance_exploding();
  const double lambda = 0.7;
  SparsityPrior prior(1, [lambda](double) { return lambda; });
  const double tau = 0.5;
  const double sig = ve.sigma(tau);
  const double x = 100.0 * lambda * sig * sig;
  CHECK(prior.score(Vec::Constant(1, x), tau, ve)[0] == doctest::Approx(-lambda).epsilon(1e-10));
  CHECK(prior.score(Vec::Constant(1, -x), tau, ve)[0] == doctest::Approx(lambda).epsilon(1e-10));
}

TEST_CASE("score_sparse / finite differences of the implied log density") {
  // potential: [alpha * sum (|x|-t)_+^2 / 2 - ||x||^2/2] / sigma^2 with t the
  // effective threshold (antiderivative of the sparse score field)
  SparsityPrior prior(1, 0.6);
  for (double tau : {0.2, 0.6}) {
    const auto [a, s] = kVp.rates(tau);
    const double t = prior.effective_threshold(tau, kVp);
    auto potential = [&](double x) {
      const double hinge = std::max(std::abs(x) - t, 0.0);
      return (a * hinge * hinge / 2.0 - x * x / 2.0) / (s * s);
    };
    double worst = 0.0;
    for (int g = 0; g < 500; ++g) {
      const double x = -3.0 + 6.0 * g / 499.0;
      if (std::abs(std::abs(x) - t) < 1e-3) continue;  // kink of the hinge
      const double fd = oracle::fd_derivative(potential, x);
      const double sc = prior.score(Vec::Constant(1, x), tau, kVp)[0];
      worst = std::max(worst, std::abs(fd - sc) / std::max(1.0, std::abs(fd)));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("denoise_vjp matches finite differences of denoise for all priors") {
  Rng rng = make_stream(1, 12);
  const double tau = 0.35;
  const int d = 4;

  Mat l = Mat::Random(d, d);
  GaussianPrior gauss_dense(gaussian_vec(d, rng), Mat(l * l.transpose() + Mat::Identity(d, d)));
  Vec w(2);
  w << 0.3, 0.7;
  GmmPrior gmm(w, {gaussian_vec(d, rng), gaussian_vec(d, rng)},
               {Vec::Constant(d, 0.7), Vec::Constant(d, 1.3)});
  SparsityPrior sparse_real(d, 0.5);
  SparsityPrior sparse_cplx(d, 0.5, /*complex_pairs=*/true);

  const ScorePrior* priors[] = {&gauss_dense, &gmm, &sparse_real, &sparse_cplx};
  for (const ScorePrior* p : priors) {
    const Vec x = 2.0 * gaussian_vec(d, rng);
    const Vec u = gaussian_vec(d, rng);
    // FD of u^T denoise(x) w.r.t. x equals denoise_vjp(x, u)
    auto f = [&](const Vec& xx) { return u.dot(p->denoise(xx, tau, kVp)); };
    const Vec fd = oracle::fd_gradient(f, x, 1e-6);
    const Vec vjp = p->denoise_vjp(x, tau, kVp, u);
    CHECK((fd - vjp).norm() < 1e-5 * std::max(1.0, fd.norm()));
  }
}
