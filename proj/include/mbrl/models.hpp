#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mbrl/gp.hpp"
#include "mbrl/nn.hpp"
#include "mbrl/replay.hpp"
#include "mbrl/types.hpp"

namespace mbrl::models {

// Thrown when an operation needs a capability the model lacks (e.g. epistemic
// uncertainty on the deterministic NN).
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Per-dimension z-scoring with buffer statistics, recomputed at each refit.
struct Standardizer {
  Vec mean;
  Vec std;  // floored at 1e-8

  void fit(const Mat& data);
  Mat transform(const Mat& data) const;
  Vec inverse_mean(const Vec& z) const { return mean + std.cwiseProduct(z); }
  Vec scale_var(const Vec& var_z) const { return std.array().square() * var_z.array(); }
};

struct NNModelConfig {
  std::vector<int> hidden = {32, 32};
  nn::TrainConfig train;
  bool warm_start = true;
  int ensemble_size = 5;
  int mc_passes = 20;  // T for the MC-dropout prediction
  nn::ConcreteDropoutConfig cd;
  double anchor_data_noise_var = 0.01;
};

struct GPModelConfig {
  int max_points = 1000;  // uniform subsample above this; cubic cost cap
  gp::FitHyperOptions hyper_opt;
  bool refit_hyper = true;
};

// Pluggable dynamics model. Fit consumes (s, a) -> delta-s pairs from the
// buffer; predictions are of delta-s and reconstructed as s + delta.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual bool has_epistemic() const = 0;
  virtual bool has_aleatoric() const = 0;
  virtual bool fitted() const = 0;

  // Refit on the full buffer; deterministic given the construction seed.
  virtual void fit(const ReplayBuffer& buffer) = 0;

  // noise_seed drives any stochastic passes (MC dropout); deterministic given
  // the seed. Safe for concurrent callers on a fitted model.
  virtual PredictiveDistribution predict(const Vec& s, const Vec& a,
                                         std::uint64_t noise_seed = 0) const = 0;

  // Mean next states for a batch of (s, a) rows.
  virtual Mat predict_mean_batch(const Mat& S, const Mat& A,
                                 std::uint64_t noise_seed) const;

  // Scalar epistemic summary: sum of per-dimension epistemic variance.
  virtual double epistemic(const Vec& s, const Vec& a,
                           std::uint64_t noise_seed = 0) const;
};

// Predictive-mean / predictive-variance aggregation of T sampled outputs:
// epistemic = population variance of the sample means, aleatoric = average of
// the per-sample noise variances. sample_means is (T x D); aleatoric_vars is
// (T x D) or empty.
PredictiveDistribution aggregate_samples(const Mat& sample_means,
                                         const Mat& aleatoric_vars);

// Model ids: deterministic-nn, deterministic-ensemble, concrete-dropout,
// anchored-ensemble, gp.
std::unique_ptr<DynamicsModel> make_model(const std::string& id, int state_dim,
                                          int action_dim, std::uint64_t seed,
                                          const NNModelConfig& nn_cfg = {},
                                          const GPModelConfig& gp_cfg = {});

const std::vector<std::string>& model_ids();

}  // namespace mbrl::models
