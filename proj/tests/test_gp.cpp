#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>

#include "mbrl/gp.hpp"
#include "mbrl/rng.hpp"

using namespace mbrl;
using namespace mbrl::gp;

namespace {

GPHyper unit_hyper(int dim) {
  GPHyper h;
  h.lengthscales = Vec::Ones(dim);
  h.signal_var = 1.0;
  h.noise_var = 1e-2;
  return h;
}

void random_problem(int n, int dim, std::uint64_t seed, Mat& X, Vec& y, GPHyper& h) {
  Rng rng = make_rng(seed);
  X.resize(n, dim);
  y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) X(i, j) = gaussian(rng, 0.0, 2.0);
    y(i) = gaussian(rng);
  }
  h.lengthscales = Vec::Ones(dim);
  for (int j = 0; j < dim; ++j) h.lengthscales(j) = std::exp(gaussian(rng, 0.0, 0.5));
  h.signal_var = std::exp(gaussian(rng, 0.0, 0.5));
  h.noise_var = std::exp(gaussian(rng, -3.0, 0.5));
}

// explicit-inverse reference implementation
Posterior naive_posterior(const Mat& X, const Vec& y, const Vec& xs, const GPHyper& h) {
  const int n = static_cast<int>(X.rows());
  Mat Ky = kernel_matrix(X, X, h);
  Ky.diagonal().array() += h.noise_var;
  const Mat Kinv = Ky.inverse();
  Vec k(n);
  for (int i = 0; i < n; ++i) k(i) = matern52(X.row(i).transpose(), xs, h);
  Posterior p;
  p.mean = k.dot(Kinv * y);
  p.var = h.signal_var - k.dot(Kinv * k);
  return p;
}

}  // namespace

TEST_CASE("matern52 examples") {
  GPHyper h = unit_hyper(1);
  Vec a(1), b(1);
  a << 0.3;
  b << 0.3;
  CHECK(matern52(a, a, h) == doctest::Approx(h.signal_var));

  // r = 1, unit signal variance: (1 + sqrt5 + 5/3) exp(-sqrt5)
  b << 1.3;
  const double expected = (1.0 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0));
  CHECK(matern52(a, b, h) == doctest::Approx(expected));
  CHECK(matern52(a, b, h) == doctest::Approx(0.524).epsilon(1e-3 / 0.524));

  // decay for large r
  double prev = matern52(a, b, h);
  for (double r = 2.0; r < 30.0; r += 1.0) {
    b << a(0) + r;
    const double k = matern52(a, b, h);
    CHECK(k < prev);
    prev = k;
  }
  CHECK(prev < 1e-10);
}

TEST_CASE("matern52 validates hypers and dimensions") {
  GPHyper h = unit_hyper(2);
  Vec a = Vec::Zero(2), b = Vec::Zero(1);
  CHECK_THROWS_AS(matern52(a, b, h), std::invalid_argument);
  h.signal_var = -1.0;
  CHECK_THROWS_AS(matern52(a, a, h), std::invalid_argument);
}

TEST_CASE("gp_posterior: training point with vanishing noise") {
  GPHyper h = unit_hyper(1);
  h.noise_var = 1e-12;
  Mat X(3, 1);
  X << -1.0, 0.0, 2.0;
  Vec y(3);
  y << 0.5, -1.2, 0.7;
  const Posterior p = gp_posterior(X, y, X.row(1).transpose(), h);
  CHECK(p.mean == doctest::Approx(-1.2).epsilon(1e-5));
  CHECK(p.var < 1e-5);
}

TEST_CASE("gp_posterior: single-pair closed form") {
  GPHyper h = unit_hyper(1);
  h.signal_var = 2.0;
  h.noise_var = 0.5;
  Mat X(1, 1);
  X << 0.7;
  Vec y(1);
  y << 3.0;
  const Posterior p = gp_posterior(X, y, X.row(0).transpose(), h);
  CHECK(p.mean == doctest::Approx(h.signal_var * y(0) / (h.signal_var + h.noise_var)));
  CHECK(p.var == doctest::Approx(h.signal_var -
                                 h.signal_var * h.signal_var /
                                     (h.signal_var + h.noise_var)));
}

TEST_CASE("gp_posterior: empty training set is the prior") {
  GPHyper h = unit_hyper(2);
  h.signal_var = 1.7;
  const Posterior p = gp_posterior(Mat(0, 2), Vec(0), Vec::Zero(2), h);
  CHECK(p.mean == doctest::Approx(0.0));
  CHECK(p.var == doctest::Approx(1.7));
}

TEST_CASE("gp_posterior matches explicit-inverse oracle") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Mat X;
    Vec y;
    GPHyper h;
    Rng rng = make_rng(mix64(trial, 0x6f72ULL));
    const int n = 2 + static_cast<int>(rng() % 19);
    const int dim = 1 + static_cast<int>(rng() % 4);
    random_problem(n, dim, mix64(trial, 1), X, y, h);
    Vec xs(dim);
    for (int j = 0; j < dim; ++j) xs(j) = gaussian(rng);
    const Posterior a = gp_posterior(X, y, xs, h);
    const Posterior b = naive_posterior(X, y, xs, h);
    CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-8));
    CHECK(a.var == doctest::Approx(b.var).epsilon(1e-8));
  }
}

TEST_CASE("posterior variance never exceeds prior variance") {
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Mat X;
    Vec y;
    GPHyper h;
    random_problem(15, 2, mix64(trial, 0x7661ULL), X, y, h);
    GaussianProcess gp;
    gp.fit(X, y, h);
    Rng rng = make_rng(trial);
    for (int k = 0; k < 20; ++k) {
      Vec xs(2);
      xs << gaussian(rng, 0.0, 5.0), gaussian(rng, 0.0, 5.0);
      CHECK(gp.predict(xs).var <= h.signal_var + 1e-9);
    }
  }
}

TEST_CASE("far-field variance approaches the prior") {
  GPHyper h = unit_hyper(1);
  Mat X(5, 1);
  X << -1.0, -0.5, 0.0, 0.5, 1.0;
  Vec y(5);
  y << 1.0, -1.0, 0.4, 0.2, -0.3;
  GaussianProcess gp;
  gp.fit(X, y, h);
  Vec far(1);
  far << 15.0;  // >= 10 lengthscales from every training input
  CHECK(gp.predict(far).var == doctest::Approx(h.signal_var).epsilon(1e-3));
  CHECK(std::abs(gp.predict(far).mean) < 1e-3);
}

TEST_CASE("batch predict agrees with single predict") {
  Mat X;
  Vec y;
  GPHyper h;
  random_problem(12, 3, 77, X, y, h);
  GaussianProcess gp;
  gp.fit(X, y, h);
  Mat Xs(4, 3);
  Rng rng = make_rng(5);
  for (int i = 0; i < Xs.size(); ++i) Xs(i / 3, i % 3) = gaussian(rng);
  Vec mean, var;
  gp.predict_batch(Xs, mean, var);
  for (int i = 0; i < 4; ++i) {
    const Posterior p = gp.predict(Xs.row(i).transpose());
    CHECK(mean(i) == doctest::Approx(p.mean).epsilon(1e-12));
    CHECK(var(i) == doctest::Approx(p.var).epsilon(1e-10));
  }
}

TEST_CASE("fit_hyper: ascent contract") {
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    Mat X;
    Vec y;
    GPHyper ignored;
    random_problem(40, 2, mix64(trial, 0x6173ULL), X, y, ignored);
    FitHyperOptions opts;
    opts.iterations = 30;
    opts.restarts = 2;
    opts.seed = trial;
    const GPHyper init = heuristic_hyper(X, y);
    const GPHyper fitted = fit_hyper(X, y, opts);
    CHECK(log_marginal_likelihood(X, y, fitted) >=
          log_marginal_likelihood(X, y, init) - 1e-9);
  }
}

TEST_CASE("fit_hyper: recovers the generating lengthscale within a factor 2") {
  // sample y from a known Matern 5/2 GP with l = 1
  GPHyper truth = unit_hyper(1);
  truth.noise_var = 1e-4;
  Rng rng = make_rng(2024);
  Mat X(200, 1);
  for (int i = 0; i < 200; ++i) X(i, 0) = uniform(rng, -5.0, 5.0);
  Mat K = kernel_matrix(X, X, truth);
  K.diagonal().array() += truth.noise_var;
  const Mat L = Eigen::LLT<Mat>(K).matrixL();
  Vec z(200);
  for (int i = 0; i < 200; ++i) z(i) = gaussian(rng);
  const Vec y = L * z;

  FitHyperOptions opts;
  opts.iterations = 60;
  opts.restarts = 2;
  const GPHyper fitted = fit_hyper(X, y, opts);
  CHECK(fitted.lengthscales(0) > 0.5);
  CHECK(fitted.lengthscales(0) < 2.0);
}

TEST_CASE("fit_hyper: constant targets shrink the signal variance") {
  Rng rng = make_rng(9);
  Mat X(30, 1);
  for (int i = 0; i < 30; ++i) X(i, 0) = gaussian(rng);
  const Vec y = Vec::Zero(30);  // constant targets, centered as a standardizer would
  FitHyperOptions opts;
  opts.iterations = 30;
  const GPHyper fitted = fit_hyper(X, y, opts);
  CHECK(fitted.signal_var < 1e-4);
}

TEST_CASE("fit_hyper rejects degenerate input") {
  CHECK_THROWS_AS(fit_hyper(Mat(1, 1), Vec::Zero(1)), std::invalid_argument);
}
