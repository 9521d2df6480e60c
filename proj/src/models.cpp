#include "mbrl/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mbrl::models {

void Standardizer::fit(const Mat& data) {
  const int n = static_cast<int>(data.rows());
  if (n == 0) throw std::invalid_argument("Standardizer: empty data");
  mean = data.colwise().mean().transpose();
  Vec var = (data.rowwise() - mean.transpose()).array().square().colwise().sum().transpose() / n;
  std = var.array().sqrt().max(1e-8);
}

Mat Standardizer::transform(const Mat& data) const {
  return (data.rowwise() - mean.transpose()).array().rowwise() /
         std.transpose().array();
}

Mat DynamicsModel::predict_mean_batch(const Mat& S, const Mat& A,
                                      std::uint64_t noise_seed) const {
  Mat out(S.rows(), S.cols());
  for (int i = 0; i < S.rows(); ++i)
    out.row(i) = predict(S.row(i).transpose(), A.row(i).transpose(),
                         mix64(noise_seed, static_cast<std::uint64_t>(i)))
                     .mean.transpose();
  return out;
}

double DynamicsModel::epistemic(const Vec& s, const Vec& a,
                                std::uint64_t noise_seed) const {
  if (!has_epistemic())
    throw CapabilityError("epistemic: model has no epistemic uncertainty");
  return predict(s, a, noise_seed).epistemic_var.sum();
}

PredictiveDistribution aggregate_samples(const Mat& sample_means,
                                         const Mat& aleatoric_vars) {
  const int t = static_cast<int>(sample_means.rows());
  if (t == 0) throw std::invalid_argument("aggregate_samples: empty sample set");
  PredictiveDistribution p;
  p.mean = sample_means.colwise().mean().transpose();
  // population variance: E[y^2] - E[y]^2
  p.epistemic_var = (sample_means.array().square().colwise().sum().transpose() / t -
                     p.mean.array().square())
                        .cwiseMax(0.0)
                        .matrix();
  if (aleatoric_vars.size() > 0)
    p.aleatoric_var = aleatoric_vars.colwise().mean().transpose();
  else
    p.aleatoric_var = Vec::Zero(sample_means.cols());
  return p;
}

namespace {

enum class NNKind { Deterministic, Ensemble, ConcreteDropout, Anchored };

class NNDynamicsModel final : public DynamicsModel {
 public:
  NNDynamicsModel(NNKind kind, int state_dim, int action_dim, std::uint64_t seed,
                  const NNModelConfig& cfg)
      : kind_(kind), state_dim_(state_dim), action_dim_(action_dim), seed_(seed),
        cfg_(cfg) {
    const int members =
        (kind == NNKind::Ensemble || kind == NNKind::Anchored) ? cfg.ensemble_size : 1;
    const int out_dim = kind == NNKind::ConcreteDropout ? 2 * state_dim : state_dim;
    for (int j = 0; j < members; ++j) {
      nets_.push_back(nn::make_network(state_dim + action_dim, cfg.hidden, out_dim,
                                       mix64(seed, static_cast<std::uint64_t>(j))));
      if (kind == NNKind::ConcreteDropout)
        nn::enable_concrete_dropout(nets_.back(), cfg.cd);
      if (kind == NNKind::Anchored) {
        anchors_.push_back(nn::draw_anchors(nets_.back(), cfg.anchor_data_noise_var,
                                            mix64(seed, static_cast<std::uint64_t>(j),
                                                  0x616e63686fULL)));
        // members start at their anchor draw
        for (std::size_t l = 0; l < nets_.back().layers.size(); ++l) {
          nets_.back().layers[l].W = anchors_.back().W_anchor[l];
          nets_.back().layers[l].b = anchors_.back().b_anchor[l];
        }
      }
    }
  }

  bool has_epistemic() const override { return kind_ != NNKind::Deterministic; }
  bool has_aleatoric() const override { return kind_ == NNKind::ConcreteDropout; }
  bool fitted() const override { return fitted_; }

  void fit(const ReplayBuffer& buffer) override {
    Mat X, Y;
    buffer.to_matrices(X, Y);
    in_std_.fit(X);
    out_std_.fit(Y);
    const Mat Xz = in_std_.transform(X);
    const Mat Yz = out_std_.transform(Y);
    for (std::size_t j = 0; j < nets_.size(); ++j) {
      if (!cfg_.warm_start && fitted_) reinit_member(j);
      nn::LossSpec spec;
      switch (kind_) {
        case NNKind::Deterministic:
        case NNKind::Ensemble:
          spec.loss = nn::Loss::Mse;
          break;
        case NNKind::ConcreteDropout:
          spec.loss = nn::Loss::Heteroscedastic;
          spec.cd = cfg_.cd;
          break;
        case NNKind::Anchored:
          spec.loss = nn::Loss::Anchored;
          spec.anchors = &anchors_[j];
          break;
      }
      nn::TrainConfig tc = cfg_.train;
      tc.seed = mix64(seed_, static_cast<std::uint64_t>(j),
                      static_cast<std::uint64_t>(fit_count_));
      nn::fit(nets_[j], Xz, Yz, spec, tc);
    }
    ++fit_count_;
    fitted_ = true;
  }

  PredictiveDistribution predict(const Vec& s, const Vec& a,
                                 std::uint64_t noise_seed) const override {
    require_fitted();
    Mat x(1, state_dim_ + action_dim_);
    x << s.transpose(), a.transpose();
    const Mat xz = in_std_.transform(x);

    PredictiveDistribution p;
    switch (kind_) {
      case NNKind::Deterministic: {
        const Vec dz = nn::forward_batch(nets_[0], xz).row(0).transpose();
        p.mean = s + out_std_.inverse_mean(dz);
        p.epistemic_var = Vec::Zero(state_dim_);
        p.aleatoric_var = Vec::Zero(state_dim_);
        return p;
      }
      case NNKind::Ensemble:
      case NNKind::Anchored: {
        Mat means(nets_.size(), state_dim_);
        for (std::size_t j = 0; j < nets_.size(); ++j)
          means.row(j) = out_std_
                             .inverse_mean(nn::forward_batch(nets_[j], xz).row(0).transpose())
                             .transpose();
        p = aggregate_samples(means, Mat());
        p.mean = s + p.mean;
        return p;
      }
      case NNKind::ConcreteDropout: {
        const int T = cfg_.mc_passes;
        Mat means(T, state_dim_), alea(T, state_dim_);
        Rng rng = make_rng(mix64(seed_, 0x6d63ULL, noise_seed));
        for (int t = 0; t < T; ++t) {
          const nn::DropoutNoise noise = nn::draw_dropout_noise(nets_[0], 1, rng);
          const Vec out = nn::forward_dropout_batch(nets_[0], xz, noise).row(0).transpose();
          means.row(t) =
              out_std_.inverse_mean(out.head(state_dim_)).transpose();
          alea.row(t) = out_std_
                            .scale_var(out.tail(state_dim_)
                                           .array()
                                           .min(30.0)
                                           .exp()
                                           .matrix())
                            .transpose();
        }
        p = aggregate_samples(means, alea);
        p.mean = s + p.mean;
        return p;
      }
    }
    throw std::logic_error("unreachable");
  }

  Mat predict_mean_batch(const Mat& S, const Mat& A,
                         std::uint64_t noise_seed) const override {
    require_fitted();
    const int n = static_cast<int>(S.rows());
    Mat x(n, state_dim_ + action_dim_);
    x << S, A;
    const Mat xz = in_std_.transform(x);

    Mat dz;
    switch (kind_) {
      case NNKind::Deterministic:
        dz = nn::forward_batch(nets_[0], xz);
        break;
      case NNKind::Ensemble:
      case NNKind::Anchored: {
        dz = Mat::Zero(n, state_dim_);
        for (const auto& net : nets_) dz += nn::forward_batch(net, xz);
        dz /= static_cast<double>(nets_.size());
        break;
      }
      case NNKind::ConcreteDropout: {
        const int T = cfg_.mc_passes;
        Rng rng = make_rng(mix64(seed_, 0x6d63ULL, noise_seed));
        dz = Mat::Zero(n, state_dim_);
        for (int t = 0; t < T; ++t) {
          const nn::DropoutNoise noise = nn::draw_dropout_noise(nets_[0], n, rng);
          dz += nn::forward_dropout_batch(nets_[0], xz, noise).leftCols(state_dim_);
        }
        dz /= static_cast<double>(T);
        break;
      }
    }
    Mat out(n, state_dim_);
    for (int i = 0; i < n; ++i)
      out.row(i) = S.row(i) + out_std_.inverse_mean(dz.row(i).transpose()).transpose();
    return out;
  }

 private:
  void require_fitted() const {
    if (!fitted_) throw std::logic_error("predict: model not fitted");
  }

  void reinit_member(std::size_t j) {
    const int out_dim = kind_ == NNKind::ConcreteDropout ? 2 * state_dim_ : state_dim_;
    nn::Network fresh = nn::make_network(
        state_dim_ + action_dim_, cfg_.hidden, out_dim,
        mix64(seed_, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(fit_count_)));
    if (kind_ == NNKind::ConcreteDropout) nn::enable_concrete_dropout(fresh, cfg_.cd);
    if (kind_ == NNKind::Anchored) {
      for (std::size_t l = 0; l < fresh.layers.size(); ++l) {
        fresh.layers[l].W = anchors_[j].W_anchor[l];
        fresh.layers[l].b = anchors_[j].b_anchor[l];
      }
    }
    nets_[j] = std::move(fresh);
  }

  NNKind kind_;
  int state_dim_, action_dim_;
  std::uint64_t seed_;
  NNModelConfig cfg_;
  std::vector<nn::Network> nets_;
  std::vector<nn::AnchorSet> anchors_;
  Standardizer in_std_, out_std_;
  bool fitted_ = false;
  long fit_count_ = 0;
};

class GPDynamicsModel final : public DynamicsModel {
 public:
  GPDynamicsModel(int state_dim, int action_dim, std::uint64_t seed,
                  const GPModelConfig& cfg)
      : state_dim_(state_dim), action_dim_(action_dim), seed_(seed), cfg_(cfg) {}

  bool has_epistemic() const override { return true; }
  bool has_aleatoric() const override { return true; }
  bool fitted() const override { return fitted_; }

  void fit(const ReplayBuffer& buffer) override {
    Mat X, Y;
    buffer.to_matrices(X, Y);
    if (X.rows() > cfg_.max_points) subsample(X, Y);
    in_std_.fit(X);
    out_std_.fit(Y);
    const Mat Xz = in_std_.transform(X);
    const Mat Yz = out_std_.transform(Y);

    gps_.assign(state_dim_, gp::GaussianProcess());
    if (hypers_.empty()) hypers_.assign(state_dim_, gp::GPHyper());
    for (int d = 0; d < state_dim_; ++d) {
      const Vec yd = Yz.col(d);
      if (cfg_.refit_hyper || fit_count_ == 0) {
        if (Xz.rows() >= 2) {
          gp::FitHyperOptions opts = cfg_.hyper_opt;
          opts.seed = mix64(seed_, static_cast<std::uint64_t>(fit_count_),
                            static_cast<std::uint64_t>(d));
          hypers_[d] = gp::fit_hyper(Xz, yd, opts);
        } else {
          hypers_[d].lengthscales = Vec::Ones(Xz.cols());
          hypers_[d].signal_var = 1.0;
          hypers_[d].noise_var = 1e-4;
        }
      }
      gps_[d].fit(Xz, yd, hypers_[d]);
    }
    ++fit_count_;
    fitted_ = true;
  }

  PredictiveDistribution predict(const Vec& s, const Vec& a,
                                 std::uint64_t) const override {
    if (!fitted_) throw std::logic_error("predict: model not fitted");
    Mat x(1, state_dim_ + action_dim_);
    x << s.transpose(), a.transpose();
    const Vec xz = in_std_.transform(x).row(0).transpose();
    PredictiveDistribution p;
    p.mean.resize(state_dim_);
    p.epistemic_var.resize(state_dim_);
    p.aleatoric_var.resize(state_dim_);
    for (int d = 0; d < state_dim_; ++d) {
      const gp::Posterior post = gps_[d].predict(xz);
      const double scale = out_std_.std(d) * out_std_.std(d);
      p.mean(d) = s(d) + out_std_.mean(d) + out_std_.std(d) * post.mean;
      p.epistemic_var(d) = scale * post.var;
      p.aleatoric_var(d) = scale * gps_[d].hyper().noise_var;
    }
    return p;
  }

  Mat predict_mean_batch(const Mat& S, const Mat& A, std::uint64_t) const override {
    if (!fitted_) throw std::logic_error("predict: model not fitted");
    const int n = static_cast<int>(S.rows());
    Mat x(n, state_dim_ + action_dim_);
    x << S, A;
    const Mat xz = in_std_.transform(x);
    Mat out = S;
    Vec mean, var;
    for (int d = 0; d < state_dim_; ++d) {
      gps_[d].predict_batch(xz, mean, var);
      out.col(d).array() += out_std_.mean(d) + out_std_.std(d) * mean.array();
    }
    return out;
  }

 private:
  void subsample(Mat& X, Mat& Y) {
    const int n = static_cast<int>(X.rows());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_rng(mix64(seed_, 0x737562ULL, static_cast<std::uint64_t>(fit_count_)));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cfg_.max_points);
    std::sort(idx.begin(), idx.end());
    Mat Xs(cfg_.max_points, X.cols()), Ys(cfg_.max_points, Y.cols());
    for (int i = 0; i < cfg_.max_points; ++i) {
      Xs.row(i) = X.row(idx[i]);
      Ys.row(i) = Y.row(idx[i]);
    }
    X = std::move(Xs);
    Y = std::move(Ys);
  }

  int state_dim_, action_dim_;
  std::uint64_t seed_;
  GPModelConfig cfg_;
  std::vector<gp::GaussianProcess> gps_;
  std::vector<gp::GPHyper> hypers_;
  Standardizer in_std_, out_std_;
  bool fitted_ = false;
  long fit_count_ = 0;
};

}  // namespace

const std::vector<std::string>& model_ids() {
  static const std::vector<std::string> ids = {
      "deterministic-nn", "deterministic-ensemble", "concrete-dropout",
      "anchored-ensemble", "gp"};
  return ids;
}

std::unique_ptr<DynamicsModel> make_model(const std::string& id, int state_dim,
                                          int action_dim, std::uint64_t seed,
                                          const NNModelConfig& nn_cfg,
                                          const GPModelConfig& gp_cfg) {
  if (id == "deterministic-nn")
    return std::make_unique<NNDynamicsModel>(NNKind::Deterministic, state_dim,
                                             action_dim, seed, nn_cfg);
  if (id == "deterministic-ensemble")
    return std::make_unique<NNDynamicsModel>(NNKind::Ensemble, state_dim, action_dim,
                                             seed, nn_cfg);
  if (id == "concrete-dropout")
    return std::make_unique<NNDynamicsModel>(NNKind::ConcreteDropout, state_dim,
                                             action_dim, seed, nn_cfg);
  if (id == "anchored-ensemble")
    return std::make_unique<NNDynamicsModel>(NNKind::Anchored, state_dim, action_dim,
                                             seed, nn_cfg);
  if (id == "gp")
    return std::make_unique<GPDynamicsModel>(state_dim, action_dim, seed, gp_cfg);
  throw std::invalid_argument("unknown model id: " + id);
}

}  // namespace mbrl::models
