#pragma once

#include <cstdint>

#include "mbrl/types.hpp"

namespace mbrl::gp {

// Hyperparameters of one single-output GP: ARD lengthscales, signal variance,
// noise variance. All strictly positive.
struct GPHyper {
  Vec lengthscales;
  double signal_var = 1.0;
  double noise_var = 1e-2;
};

// Matern 5/2: sigma_f^2 (1 + sqrt5 r + 5 r^2/3) exp(-sqrt5 r) with
// r^2 = sum_d (x_d - x'_d)^2 / l_d^2.
double matern52(const Vec& x, const Vec& y, const GPHyper& hyper);

Mat kernel_matrix(const Mat& X1, const Mat& X2, const GPHyper& hyper);

struct Posterior {
  double mean = 0.0;
  double var = 0.0;  // latent variance, excludes noise_var
};

// Zero-mean GP regression for a single output dimension. Empty training set
// behaves as the prior (mean 0, variance sigma_f^2).
class GaussianProcess {
 public:
  // Cholesky of K + noise I with jitter escalation 1e-8 .. 1e-2; throws on
  // failure at the final jitter level.
  void fit(const Mat& X, const Vec& y, const GPHyper& hyper);

  Posterior predict(const Vec& x) const;
  void predict_batch(const Mat& Xs, Vec& mean, Vec& var) const;

  bool fitted() const { return fitted_; }
  const GPHyper& hyper() const { return hyper_; }

 private:
  bool fitted_ = false;
  Mat X_;
  Mat chol_lower_;
  Vec alpha_;
  GPHyper hyper_;
};

// One-shot posterior at a single test input.
Posterior gp_posterior(const Mat& X, const Vec& y, const Vec& xstar,
                       const GPHyper& hyper);

double log_marginal_likelihood(const Mat& X, const Vec& y, const GPHyper& hyper);

struct FitHyperOptions {
  int iterations = 80;
  int restarts = 3;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

// Maximizes the log marginal likelihood over log-hyperparameters by Adam
// ascent with random restarts. The returned hypers never score below the
// heuristic init; a median-distance heuristic is the fallback when every
// restart diverges.
GPHyper fit_hyper(const Mat& X, const Vec& y, const FitHyperOptions& opts = {});

// Median-distance lengthscales, signal variance from target variance.
GPHyper heuristic_hyper(const Mat& X, const Vec& y);

}  // namespace mbrl::gp
