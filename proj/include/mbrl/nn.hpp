#pragma once

#include <cstdint>
#include <vector>

#include "mbrl/rng.hpp"
#include "mbrl/types.hpp"

namespace mbrl::nn {

// One affine layer; W is (out x in).
struct AffineLayer {
  Mat W;
  Vec b;
};

struct ConcreteDropoutConfig {
  double temperature = 0.1;
  double init_rate = 0.1;       // initial drop probability
  double weight_penalty = 1e-6;  // lambda_w
  double rate_penalty = 1e-5;    // lambda_p
};

// Fully-connected net, ReLU on hidden layers, identity output.
// When dropout_logits is nonempty it holds one unconstrained logit per layer;
// sigmoid(logit) is the drop probability applied to that layer's input.
struct Network {
  std::vector<AffineLayer> layers;
  std::vector<double> dropout_logits;
  double dropout_temperature = 0.1;

  bool has_dropout() const { return !dropout_logits.empty(); }
  int input_dim() const { return static_cast<int>(layers.front().W.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().W.rows()); }
};

// Scaled-normal init, std = sqrt(2 / fan_in).
Network make_network(int input_dim, const std::vector<int>& hidden, int output_dim,
                     std::uint64_t seed);
void enable_concrete_dropout(Network& net, const ConcreteDropoutConfig& cfg);

Vec forward(const Network& net, const Vec& x);
Mat forward_batch(const Network& net, const Mat& X);

// Per-layer uniform(0,1) noise driving the concrete dropout masks; u[l] is
// (batch x input_dim of layer l).
struct DropoutNoise {
  std::vector<Mat> u;
};
DropoutNoise draw_dropout_noise(const Network& net, int batch, Rng& rng);

// Soft keep-mask in (0,1): 1 = kept, -> 0 = dropped. Rejects u on {0,1}.
Vec concrete_dropout_mask(double logit, double temperature, const Vec& u);

// Stochastic forward pass with dropout masks from `noise` and inverted-dropout
// scaling by 1/(1-p).
Mat forward_dropout_batch(const Network& net, const Mat& X, const DropoutNoise& noise);

double mse_loss(const Mat& preds, const Mat& targets);
// Network emits log-variances; means/log_vars/targets all (N x D).
double heteroscedastic_loss(const Mat& means, const Mat& log_vars, const Mat& targets);

// Anchor parameters and diagonal regularisation weights for one ensemble
// member. Drawn once at construction, never updated.
struct AnchorSet {
  std::vector<Mat> W_anchor;
  std::vector<Vec> b_anchor;
  std::vector<Mat> W_gamma;
  std::vector<Vec> b_gamma;
};

// Anchors drawn from the init distribution N(0, 2/fan_in); gamma entries are
// data_noise_var / prior variance of each parameter.
AnchorSet draw_anchors(const Network& net, double data_noise_var, std::uint64_t seed);

double anchored_loss(const Network& net, const Mat& X, const Mat& Y,
                     const AnchorSet& anchors);

// Per-layer dropout penalty: lambda_w ||W||^2 / (1-p) + lambda_p d H(p).
double dropout_penalty(const Network& net, const ConcreteDropoutConfig& cfg);

enum class Loss { Mse, Heteroscedastic, Anchored };

struct LossSpec {
  Loss loss = Loss::Mse;
  const AnchorSet* anchors = nullptr;  // required for Loss::Anchored
  ConcreteDropoutConfig cd;            // penalties applied when net.has_dropout()
};

struct NetGrad {
  std::vector<Mat> W;
  std::vector<Vec> b;
  std::vector<double> logit;
};

double eval_loss(const Network& net, const Mat& X, const Mat& Y, const LossSpec& spec,
                 const DropoutNoise* noise = nullptr);

// Exact reverse-mode gradient of eval_loss, including the pathwise derivative
// through the dropout masks and the penalty terms. Returns the loss value.
double loss_and_gradient(const Network& net, const Mat& X, const Mat& Y,
                         const LossSpec& spec, const DropoutNoise* noise,
                         NetGrad& grad);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 60;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

// Minibatch Adam. Deterministic given cfg.seed; throws on non-finite loss.
// Returns the full-data loss after the final epoch.
double fit(Network& net, const Mat& X, const Mat& Y, const LossSpec& spec,
           const TrainConfig& cfg);

}  // namespace mbrl::nn
