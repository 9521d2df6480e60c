#include "mbrl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mbrl::nn {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

void check_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

}  // namespace

Network make_network(int input_dim, const std::vector<int>& hidden, int output_dim,
                     std::uint64_t seed) {
  if (input_dim <= 0 || output_dim <= 0)
    throw std::invalid_argument("make_network: dimensions must be positive");
  Rng rng = make_rng(mix64(seed, 0x6e6574ULL));
  Network net;
  int in = input_dim;
  std::vector<int> widths = hidden;
  widths.push_back(output_dim);
  for (int out : widths) {
    AffineLayer layer;
    layer.W.resize(out, in);
    const double std = std::sqrt(2.0 / in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.W(r, c) = gaussian(rng, 0.0, std);
    layer.b = Vec::Zero(out);
    net.layers.push_back(std::move(layer));
    in = out;
  }
  return net;
}

void enable_concrete_dropout(Network& net, const ConcreteDropoutConfig& cfg) {
  if (cfg.temperature <= 0.0)
    throw std::invalid_argument("enable_concrete_dropout: temperature must be positive");
  net.dropout_logits.assign(net.layers.size(), logit(cfg.init_rate));
  net.dropout_temperature = cfg.temperature;
}

Vec forward(const Network& net, const Vec& x) {
  if (x.size() != net.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  Vec h = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    h = net.layers[l].W * h + net.layers[l].b;
    if (l + 1 < net.layers.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

Mat forward_batch(const Network& net, const Mat& X) {
  if (X.cols() != net.input_dim())
    throw std::invalid_argument("forward_batch: input dimension mismatch");
  Mat h = X;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    h = (h * net.layers[l].W.transpose()).rowwise() + net.layers[l].b.transpose();
    if (l + 1 < net.layers.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

DropoutNoise draw_dropout_noise(const Network& net, int batch, Rng& rng) {
  DropoutNoise noise;
  noise.u.resize(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const int in = static_cast<int>(net.layers[l].W.cols());
    Mat u(batch, in);
    for (int r = 0; r < batch; ++r)
      for (int c = 0; c < in; ++c) {
        double v;
        do {
          v = uniform(rng);
        } while (v <= 0.0 || v >= 1.0);
        u(r, c) = v;
      }
    noise.u[l] = std::move(u);
  }
  return noise;
}

Vec concrete_dropout_mask(double logit_value, double temperature, const Vec& u) {
  if (temperature <= 0.0)
    throw std::invalid_argument("concrete_dropout_mask: temperature must be positive");
  for (int i = 0; i < u.size(); ++i)
    if (!(u(i) > 0.0 && u(i) < 1.0))
      throw std::invalid_argument("concrete_dropout_mask: u must lie strictly in (0,1)");
  Vec z(u.size());
  for (int i = 0; i < u.size(); ++i) {
    const double arg = (-logit_value + std::log(u(i)) - std::log(1.0 - u(i))) / temperature;
    z(i) = sigmoid(arg);
  }
  return z;
}

namespace {

// mask matrix for one layer; same formula as concrete_dropout_mask
Mat keep_mask(double logit_value, double temperature, const Mat& u) {
  return ((-logit_value + u.array().log() - (1.0 - u.array()).log()) / temperature)
      .unaryExpr([](double a) { return sigmoid(a); })
      .matrix();
}

struct ForwardCache {
  std::vector<Mat> input;    // raw input of each layer
  std::vector<Mat> dropped;  // input after mask and 1/(1-p) scaling
  std::vector<Mat> mask;     // keep masks (empty when no dropout)
  std::vector<Mat> pre;      // pre-activations
  Mat output;
};

ForwardCache run_forward(const Network& net, const Mat& X, const DropoutNoise* noise) {
  const std::size_t L = net.layers.size();
  ForwardCache c;
  c.input.resize(L);
  c.dropped.resize(L);
  c.mask.resize(L);
  c.pre.resize(L);
  Mat h = X;
  for (std::size_t l = 0; l < L; ++l) {
    c.input[l] = h;
    if (net.has_dropout() && noise) {
      const double p = sigmoid(net.dropout_logits[l]);
      c.mask[l] = keep_mask(net.dropout_logits[l], net.dropout_temperature, noise->u[l]);
      c.dropped[l] = (h.array() * c.mask[l].array()).matrix() / (1.0 - p);
    } else {
      c.dropped[l] = h;
    }
    c.pre[l] = (c.dropped[l] * net.layers[l].W.transpose()).rowwise() +
               net.layers[l].b.transpose();
    h = (l + 1 < L) ? c.pre[l].cwiseMax(0.0).eval() : c.pre[l];
  }
  c.output = h;
  return c;
}

// loss value plus dL/d(output) for the data term
double data_loss(const Mat& out, const Mat& Y, Loss loss, Mat* dL_dout) {
  const int n = static_cast<int>(Y.rows());
  const int d = static_cast<int>(Y.cols());
  if (n == 0) throw std::invalid_argument("loss: empty batch");
  if (out.rows() != n) throw std::invalid_argument("loss: batch size mismatch");
  switch (loss) {
    case Loss::Mse:
    case Loss::Anchored: {
      if (out.cols() != d) throw std::invalid_argument("loss: output dimension mismatch");
      const Mat r = out - Y;
      if (dL_dout) *dL_dout = 2.0 * r / n;
      return r.squaredNorm() / n;
    }
    case Loss::Heteroscedastic: {
      if (out.cols() != 2 * d)
        throw std::invalid_argument("heteroscedastic loss: output must be [means, log-vars]");
      check_finite(out, "heteroscedastic loss");
      check_finite(Y, "heteroscedastic loss");
      const Mat mean = out.leftCols(d);
      const Mat logv = out.rightCols(d);
      const Mat inv_var = (-logv.array()).exp().matrix();
      const Mat r = Y - mean;
      const double value =
          ((r.array().square() * inv_var.array()) + logv.array()).sum() / n;
      if (dL_dout) {
        dL_dout->resize(n, 2 * d);
        dL_dout->leftCols(d) = -2.0 * (r.array() * inv_var.array()).matrix() / n;
        dL_dout->rightCols(d) =
            ((1.0 - r.array().square() * inv_var.array()) / n).matrix();
      }
      return value;
    }
  }
  throw std::logic_error("unreachable");
}

void check_anchor_shapes(const Network& net, const AnchorSet& a) {
  if (a.W_anchor.size() != net.layers.size())
    throw std::invalid_argument("anchored loss: anchor/network shape mismatch");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (a.W_anchor[l].rows() != net.layers[l].W.rows() ||
        a.W_anchor[l].cols() != net.layers[l].W.cols() ||
        a.b_anchor[l].size() != net.layers[l].b.size())
      throw std::invalid_argument("anchored loss: anchor/network shape mismatch");
  }
}

double anchor_penalty(const Network& net, const AnchorSet& a, int n) {
  double reg = 0.0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    reg += (a.W_gamma[l].array() * (net.layers[l].W - a.W_anchor[l]).array().square()).sum();
    reg += (a.b_gamma[l].array() * (net.layers[l].b - a.b_anchor[l]).array().square()).sum();
  }
  return reg / n;
}

}  // namespace

double mse_loss(const Mat& preds, const Mat& targets) {
  return data_loss(preds, targets, Loss::Mse, nullptr);
}

double heteroscedastic_loss(const Mat& means, const Mat& log_vars, const Mat& targets) {
  Mat out(means.rows(), means.cols() + log_vars.cols());
  out << means, log_vars;
  return data_loss(out, targets, Loss::Heteroscedastic, nullptr);
}

AnchorSet draw_anchors(const Network& net, double data_noise_var, std::uint64_t seed) {
  Rng rng = make_rng(mix64(seed, 0x616e63ULL));
  AnchorSet a;
  for (const auto& layer : net.layers) {
    const int out = static_cast<int>(layer.W.rows());
    const int in = static_cast<int>(layer.W.cols());
    const double prior_var = 2.0 / in;
    const double prior_std = std::sqrt(prior_var);
    Mat wa(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) wa(r, c) = gaussian(rng, 0.0, prior_std);
    Vec ba(out);
    for (int r = 0; r < out; ++r) ba(r) = gaussian(rng, 0.0, prior_std);
    a.W_anchor.push_back(std::move(wa));
    a.b_anchor.push_back(std::move(ba));
    a.W_gamma.push_back(Mat::Constant(out, in, data_noise_var / prior_var));
    a.b_gamma.push_back(Vec::Constant(out, data_noise_var / prior_var));
  }
  return a;
}

double anchored_loss(const Network& net, const Mat& X, const Mat& Y,
                     const AnchorSet& anchors) {
  check_anchor_shapes(net, anchors);
  const Mat out = forward_batch(net, X);
  return data_loss(out, Y, Loss::Mse, nullptr) +
         anchor_penalty(net, anchors, static_cast<int>(Y.rows()));
}

double dropout_penalty(const Network& net, const ConcreteDropoutConfig& cfg) {
  if (!net.has_dropout()) return 0.0;
  double reg = 0.0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const double p = sigmoid(net.dropout_logits[l]);
    const double d = static_cast<double>(net.layers[l].W.cols());
    reg += cfg.weight_penalty * net.layers[l].W.squaredNorm() / (1.0 - p);
    reg += cfg.rate_penalty * d * (p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
  }
  return reg;
}

double eval_loss(const Network& net, const Mat& X, const Mat& Y, const LossSpec& spec,
                 const DropoutNoise* noise) {
  const ForwardCache c = run_forward(net, X, noise);
  double value = data_loss(c.output, Y, spec.loss, nullptr);
  if (spec.loss == Loss::Anchored) {
    if (!spec.anchors) throw std::invalid_argument("eval_loss: anchors required");
    check_anchor_shapes(net, *spec.anchors);
    value += anchor_penalty(net, *spec.anchors, static_cast<int>(Y.rows()));
  }
  if (net.has_dropout()) value += dropout_penalty(net, spec.cd);
  return value;
}

double loss_and_gradient(const Network& net, const Mat& X, const Mat& Y,
                         const LossSpec& spec, const DropoutNoise* noise,
                         NetGrad& grad) {
  const std::size_t L = net.layers.size();
  const int n = static_cast<int>(Y.rows());
  const ForwardCache c = run_forward(net, X, noise);

  Mat delta;  // dL/d(pre-activation) of the current layer
  double value = data_loss(c.output, Y, spec.loss, &delta);

  grad.W.assign(L, Mat());
  grad.b.assign(L, Vec());
  grad.logit.assign(net.has_dropout() ? L : 0, 0.0);

  for (std::size_t li = L; li-- > 0;) {
    grad.W[li] = delta.transpose() * c.dropped[li];
    grad.b[li] = delta.colwise().sum().transpose();
    if (li > 0 || (net.has_dropout() && noise)) {
      Mat d_dropped = delta * net.layers[li].W;  // dL/d(dropped input)
      if (net.has_dropout() && noise) {
        const double p = sigmoid(net.dropout_logits[li]);
        const double scale = 1.0 / (1.0 - p);
        const Mat& z = c.mask[li];
        const Mat& in = c.input[li];
        // dropped = in .* z / (1-p); dz/dlogit = -z(1-z)/t, d(1/(1-p))/dlogit = p/(1-p)
        const Mat dz_dlogit = (-z.array() * (1.0 - z.array()) /
                               net.dropout_temperature).matrix();
        grad.logit[li] += (d_dropped.array() * in.array() *
                           (dz_dlogit.array() + z.array() * p) * scale).sum();
        if (li > 0) {
          Mat d_in = (d_dropped.array() * z.array()).matrix() * scale;
          delta = (d_in.array() * (c.pre[li - 1].array() > 0.0).cast<double>()).matrix();
        }
      } else if (li > 0) {
        delta = (d_dropped.array() * (c.pre[li - 1].array() > 0.0).cast<double>()).matrix();
      }
    }
  }

  if (spec.loss == Loss::Anchored) {
    if (!spec.anchors) throw std::invalid_argument("loss_and_gradient: anchors required");
    check_anchor_shapes(net, *spec.anchors);
    const AnchorSet& a = *spec.anchors;
    value += anchor_penalty(net, a, n);
    for (std::size_t l = 0; l < L; ++l) {
      grad.W[l] += (2.0 / n) * (a.W_gamma[l].array() *
                                (net.layers[l].W - a.W_anchor[l]).array()).matrix();
      grad.b[l] += (2.0 / n) * (a.b_gamma[l].array() *
                                (net.layers[l].b - a.b_anchor[l]).array()).matrix();
    }
  }

  if (net.has_dropout()) {
    value += dropout_penalty(net, spec.cd);
    for (std::size_t l = 0; l < L; ++l) {
      const double p = sigmoid(net.dropout_logits[l]);
      const double w2 = net.layers[l].W.squaredNorm();
      const double d = static_cast<double>(net.layers[l].W.cols());
      grad.W[l] += (2.0 * spec.cd.weight_penalty / (1.0 - p)) * net.layers[l].W;
      grad.logit[l] += spec.cd.weight_penalty * w2 * p / (1.0 - p) +
                       spec.cd.rate_penalty * d * std::log(p / (1.0 - p)) * p * (1.0 - p);
    }
  }
  return value;
}

double fit(Network& net, const Mat& X, const Mat& Y, const LossSpec& spec,
           const TrainConfig& cfg) {
  if (X.rows() == 0) throw std::invalid_argument("fit: empty dataset");
  if (cfg.learning_rate <= 0.0 || cfg.batch_size <= 0 || cfg.epochs < 0)
    throw std::invalid_argument("fit: invalid train config");
  const std::size_t L = net.layers.size();
  const int n = static_cast<int>(X.rows());

  std::vector<Mat> mW(L), vW(L);
  std::vector<Vec> mb(L), vb(L);
  for (std::size_t l = 0; l < L; ++l) {
    mW[l] = Mat::Zero(net.layers[l].W.rows(), net.layers[l].W.cols());
    vW[l] = mW[l];
    mb[l] = Vec::Zero(net.layers[l].b.size());
    vb[l] = mb[l];
  }
  std::vector<double> mlogit(net.dropout_logits.size(), 0.0);
  std::vector<double> vlogit(net.dropout_logits.size(), 0.0);

  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Rng rng = make_rng(mix64(cfg.seed, 0x666974ULL));
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  NetGrad grad;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n - start);
      Mat Xb(bs, X.cols()), Yb(bs, Y.cols());
      for (int i = 0; i < bs; ++i) {
        Xb.row(i) = X.row(perm[start + i]);
        Yb.row(i) = Y.row(perm[start + i]);
      }
      DropoutNoise noise;
      const DropoutNoise* noise_ptr = nullptr;
      if (net.has_dropout()) {
        noise = draw_dropout_noise(net, bs, rng);
        noise_ptr = &noise;
      }
      const double loss = loss_and_gradient(net, Xb, Yb, spec, noise_ptr, grad);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "fit: non-finite loss (" << loss << ") at epoch " << epoch;
        throw std::runtime_error(msg.str());
      }
      ++step;
      const double corr =
          std::sqrt(1.0 - std::pow(beta2, step)) / (1.0 - std::pow(beta1, step));
      for (std::size_t l = 0; l < L; ++l) {
        mW[l] = beta1 * mW[l] + (1.0 - beta1) * grad.W[l];
        vW[l] = beta2 * vW[l] + (1.0 - beta2) * grad.W[l].array().square().matrix();
        net.layers[l].W -=
            (cfg.learning_rate * corr) *
            (mW[l].array() / (vW[l].array().sqrt() + eps)).matrix();
        mb[l] = beta1 * mb[l] + (1.0 - beta1) * grad.b[l];
        vb[l] = beta2 * vb[l] + (1.0 - beta2) * grad.b[l].array().square().matrix();
        net.layers[l].b -=
            (cfg.learning_rate * corr) *
            (mb[l].array() / (vb[l].array().sqrt() + eps)).matrix();
      }
      for (std::size_t l = 0; l < net.dropout_logits.size(); ++l) {
        mlogit[l] = beta1 * mlogit[l] + (1.0 - beta1) * grad.logit[l];
        vlogit[l] = beta2 * vlogit[l] + (1.0 - beta2) * grad.logit[l] * grad.logit[l];
        net.dropout_logits[l] -=
            cfg.learning_rate * corr * mlogit[l] / (std::sqrt(vlogit[l]) + eps);
      }
    }
  }

  DropoutNoise noise;
  const DropoutNoise* noise_ptr = nullptr;
  if (net.has_dropout()) {
    noise = draw_dropout_noise(net, n, rng);
    noise_ptr = &noise;
  }
  const double final_loss = eval_loss(net, X, Y, spec, noise_ptr);
  if (!std::isfinite(final_loss)) throw std::runtime_error("fit: diverged (non-finite loss)");
  return final_loss;
}

Mat forward_dropout_batch(const Network& net, const Mat& X, const DropoutNoise& noise) {
  if (!net.has_dropout())
    throw std::invalid_argument("forward_dropout_batch: network has no dropout layers");
  return run_forward(net, X, &noise).output;
}

}  // namespace mbrl::nn
