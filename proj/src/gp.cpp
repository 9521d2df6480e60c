#include "mbrl/gp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mbrl/rng.hpp"

namespace mbrl::gp {

namespace {

constexpr double kSqrt5 = 2.2360679774997896;

void check_hyper(const GPHyper& h) {
  if (h.signal_var <= 0.0 || h.noise_var <= 0.0 || (h.lengthscales.array() <= 0.0).any())
    throw std::invalid_argument("GPHyper: all entries must be strictly positive");
}

double scaled_dist(const Vec& x, const Vec& y, const Vec& ls) {
  return ((x - y).array() / ls.array()).matrix().norm();
}

double matern52_r(double r, double signal_var) {
  return signal_var * (1.0 + kSqrt5 * r + 5.0 * r * r / 3.0) * std::exp(-kSqrt5 * r);
}

// Cholesky of K_y = K + noise I with escalating jitter.
Eigen::LLT<Mat> robust_llt(const Mat& Ky) {
  Eigen::LLT<Mat> llt(Ky);
  if (llt.info() == Eigen::Success) return llt;
  for (double jitter = 1e-8; jitter <= 1e-2 * (1.0 + 1e-12); jitter *= 10.0) {
    llt.compute(Ky + jitter * Mat::Identity(Ky.rows(), Ky.cols()));
    if (llt.info() == Eigen::Success) return llt;
  }
  throw std::runtime_error("gp: Cholesky failed after jitter escalation");
}

}  // namespace

double matern52(const Vec& x, const Vec& y, const GPHyper& hyper) {
  check_hyper(hyper);
  if (x.size() != y.size() || x.size() != hyper.lengthscales.size())
    throw std::invalid_argument("matern52: dimension mismatch");
  return matern52_r(scaled_dist(x, y, hyper.lengthscales), hyper.signal_var);
}

Mat kernel_matrix(const Mat& X1, const Mat& X2, const GPHyper& hyper) {
  check_hyper(hyper);
  Mat K(X1.rows(), X2.rows());
  for (int i = 0; i < X1.rows(); ++i)
    for (int j = 0; j < X2.rows(); ++j)
      K(i, j) = matern52_r(
          scaled_dist(X1.row(i).transpose(), X2.row(j).transpose(), hyper.lengthscales),
          hyper.signal_var);
  return K;
}

void GaussianProcess::fit(const Mat& X, const Vec& y, const GPHyper& hyper) {
  check_hyper(hyper);
  if (X.rows() != y.size()) throw std::invalid_argument("gp fit: X/y size mismatch");
  hyper_ = hyper;
  X_ = X;
  if (X.rows() == 0) {
    alpha_.resize(0);
    chol_lower_.resize(0, 0);
    fitted_ = true;
    return;
  }
  Mat Ky = kernel_matrix(X, X, hyper);
  Ky.diagonal().array() += hyper.noise_var;
  Eigen::LLT<Mat> llt = robust_llt(Ky);
  chol_lower_ = llt.matrixL();
  alpha_ = llt.solve(y);
  fitted_ = true;
}

Posterior GaussianProcess::predict(const Vec& x) const {
  if (!fitted_) throw std::logic_error("gp predict: model not fitted");
  if (X_.rows() == 0) return {0.0, hyper_.signal_var};
  Vec k(X_.rows());
  for (int i = 0; i < X_.rows(); ++i)
    k(i) = matern52_r(scaled_dist(X_.row(i).transpose(), x, hyper_.lengthscales),
                      hyper_.signal_var);
  Posterior p;
  p.mean = k.dot(alpha_);
  const Vec v = chol_lower_.triangularView<Eigen::Lower>().solve(k);
  p.var = std::max(0.0, hyper_.signal_var - v.squaredNorm());
  return p;
}

void GaussianProcess::predict_batch(const Mat& Xs, Vec& mean, Vec& var) const {
  if (!fitted_) throw std::logic_error("gp predict: model not fitted");
  const int m = static_cast<int>(Xs.rows());
  mean.resize(m);
  var.resize(m);
  if (X_.rows() == 0) {
    mean.setZero();
    var.setConstant(hyper_.signal_var);
    return;
  }
  const Mat K = kernel_matrix(Xs, X_, hyper_);
  mean = K * alpha_;
  const Mat V = chol_lower_.triangularView<Eigen::Lower>().solve(K.transpose());
  var = (hyper_.signal_var - V.array().square().colwise().sum().transpose())
            .cwiseMax(0.0)
            .matrix();
}

Posterior gp_posterior(const Mat& X, const Vec& y, const Vec& xstar,
                       const GPHyper& hyper) {
  GaussianProcess gp;
  gp.fit(X, y, hyper);
  return gp.predict(xstar);
}

double log_marginal_likelihood(const Mat& X, const Vec& y, const GPHyper& hyper) {
  check_hyper(hyper);
  const int n = static_cast<int>(X.rows());
  Mat Ky = kernel_matrix(X, X, hyper);
  Ky.diagonal().array() += hyper.noise_var;
  Eigen::LLT<Mat> llt = robust_llt(Ky);
  const Mat L = llt.matrixL();
  const Vec alpha = llt.solve(y);
  return -0.5 * y.dot(alpha) - L.diagonal().array().log().sum() -
         0.5 * n * std::log(2.0 * M_PI);
}

namespace {

// Packs hypers as log values: [log l_1..log l_d, log sf2, log sn2].
Vec pack(const GPHyper& h) {
  Vec t(h.lengthscales.size() + 2);
  t.head(h.lengthscales.size()) = h.lengthscales.array().log();
  t(h.lengthscales.size()) = std::log(h.signal_var);
  t(h.lengthscales.size() + 1) = std::log(h.noise_var);
  return t;
}

GPHyper unpack(const Vec& t) {
  GPHyper h;
  const int d = static_cast<int>(t.size()) - 2;
  h.lengthscales = t.head(d).array().exp();
  h.signal_var = std::exp(t(d));
  h.noise_var = std::exp(t(d + 1));
  return h;
}

// LML and its gradient w.r.t. the packed log-hypers.
double lml_and_grad(const Mat& X, const Vec& y, const GPHyper& h, Vec& grad) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  Mat Ky = kernel_matrix(X, X, h);
  const Mat K = Ky;  // noise-free part
  Ky.diagonal().array() += h.noise_var;
  Eigen::LLT<Mat> llt = robust_llt(Ky);
  const Mat L = llt.matrixL();
  const Vec alpha = llt.solve(y);
  const double lml = -0.5 * y.dot(alpha) - L.diagonal().array().log().sum() -
                     0.5 * n * std::log(2.0 * M_PI);

  const Mat Kinv = llt.solve(Mat::Identity(n, n));
  const Mat A = alpha * alpha.transpose() - Kinv;  // d LML/d K_y = A/2

  grad.resize(d + 2);
  // dK/d log l_k : sf2 * (5/3)(1 + sqrt5 r) e^{-sqrt5 r} * diff_k^2 / l_k^2
  Mat R(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      R(i, j) = scaled_dist(X.row(i).transpose(), X.row(j).transpose(), h.lengthscales);
  const Mat base =
      (5.0 / 3.0) * h.signal_var *
      ((1.0 + kSqrt5 * R.array()) * (-kSqrt5 * R.array()).exp()).matrix();
  for (int k = 0; k < d; ++k) {
    Mat dK(n, n);
    const double l2 = h.lengthscales(k) * h.lengthscales(k);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double diff = X(i, k) - X(j, k);
        dK(i, j) = base(i, j) * diff * diff / l2;
      }
    grad(k) = 0.5 * (A.array() * dK.array()).sum();
  }
  grad(d) = 0.5 * (A.array() * K.array()).sum();              // d/d log sf2
  grad(d + 1) = 0.5 * h.noise_var * A.diagonal().sum();       // d/d log sn2
  return lml;
}

}  // namespace

GPHyper heuristic_hyper(const Mat& X, const Vec& y) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  GPHyper h;
  h.lengthscales = Vec::Ones(d);
  for (int k = 0; k < d; ++k) {
    std::vector<double> dists;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n && dists.size() < 4096; ++j)
        dists.push_back(std::abs(X(i, k) - X(j, k)));
    if (!dists.empty()) {
      std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
      const double med = dists[dists.size() / 2];
      if (med > 1e-8) h.lengthscales(k) = med;
    }
  }
  const double yvar = n > 1 ? (y.array() - y.mean()).square().sum() / n : 1.0;
  h.signal_var = std::max(yvar, 1e-8);
  h.noise_var = std::max(1e-2 * yvar, 1e-8);
  return h;
}

GPHyper fit_hyper(const Mat& X, const Vec& y, const FitHyperOptions& opts) {
  if (X.rows() < 2) throw std::invalid_argument("fit_hyper: need at least 2 points");
  const GPHyper init = heuristic_hyper(X, y);
  double best_lml = log_marginal_likelihood(X, y, init);
  GPHyper best = init;

  Rng rng = make_rng(mix64(opts.seed, 0x6770ULL));
  const int d = static_cast<int>(X.cols());

  for (int restart = 0; restart <= opts.restarts; ++restart) {
    Vec t = pack(init);
    if (restart > 0)
      for (int i = 0; i < t.size(); ++i) t(i) += gaussian(rng, 0.0, 1.0);

    Vec m = Vec::Zero(t.size()), v = Vec::Zero(t.size()), g(t.size());
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    bool diverged = false;
    for (int it = 1; it <= opts.iterations; ++it) {
      double lml;
      try {
        lml = lml_and_grad(X, y, unpack(t), g);
      } catch (const std::runtime_error&) {
        diverged = true;
        break;
      }
      if (!std::isfinite(lml) || !g.allFinite()) {
        diverged = true;
        break;
      }
      if (lml > best_lml) {
        best_lml = lml;
        best = unpack(t);
      }
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g.array().square().matrix();
      const double corr =
          std::sqrt(1.0 - std::pow(beta2, it)) / (1.0 - std::pow(beta1, it));
      t += opts.learning_rate * corr *
           (m.array() / (v.array().sqrt() + eps)).matrix();
      t = t.cwiseMax(-20.0).cwiseMin(20.0);
    }
    if (!diverged) {
      try {
        const double lml = log_marginal_likelihood(X, y, unpack(t));
        if (std::isfinite(lml) && lml > best_lml) {
          best_lml = lml;
          best = unpack(t);
        }
      } catch (const std::runtime_error&) {
      }
    }
  }
  return best;
}

}  // namespace mbrl::gp
