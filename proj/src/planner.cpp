#include "mbrl/planner.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

namespace mbrl::planner {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vec uniform_action(Rng& rng, const Vec& lo, const Vec& hi) {
  Vec a(lo.size());
  for (int d = 0; d < lo.size(); ++d) a(d) = uniform(rng, lo(d), hi(d));
  return a;
}

}  // namespace

Mat shooting_candidate(int index, int horizon, const Vec& act_low,
                       const Vec& act_high, std::uint64_t seed) {
  Rng rng = make_rng(mix64(seed, static_cast<std::uint64_t>(index), 0x616374ULL));
  Mat actions(horizon, act_low.size());
  for (int t = 0; t < horizon; ++t)
    actions.row(t) = uniform_action(rng, act_low, act_high).transpose();
  return actions;
}

ShootingResult random_shooting(const models::DynamicsModel& model,
                               const RewardFn& reward, const Vec& s0,
                               const Vec& act_low, const Vec& act_high,
                               const ShootingConfig& cfg) {
  if (cfg.num_trajectories < 1 || cfg.horizon < 1)
    throw std::invalid_argument("random_shooting: N and horizon must be >= 1");
  const int N = cfg.num_trajectories;
  const int n = cfg.horizon;
  const int ad = static_cast<int>(act_low.size());
  const int sd = static_cast<int>(s0.size());
  const int bs = std::max(1, cfg.block_size);
  const int num_blocks = (N + bs - 1) / bs;

  std::vector<double> scores(N, 0.0);

  auto eval_block = [&](int block) {
    const int begin = block * bs;
    const int count = std::min(bs, N - begin);
    std::vector<Mat> actions(count);
    for (int i = 0; i < count; ++i)
      actions[i] = shooting_candidate(begin + i, n, act_low, act_high, cfg.seed);

    Mat S = s0.transpose().replicate(count, 1);
    Mat A(count, ad);
    std::vector<bool> alive(count, true);
    std::vector<double> score(count, 0.0);
    for (int t = 0; t < n; ++t) {
      for (int i = 0; i < count; ++i) A.row(i) = actions[i].row(t);
      for (int i = 0; i < count; ++i)
        if (alive[i]) score[i] += reward(S.row(i).transpose(), A.row(i).transpose());
      if (t + 1 < n) {
        S = model.predict_mean_batch(
            S, A, mix64(cfg.seed, static_cast<std::uint64_t>(block),
                        static_cast<std::uint64_t>(t)));
        for (int i = 0; i < count; ++i) {
          if (alive[i] && !S.row(i).allFinite()) {
            alive[i] = false;
            S.row(i).setZero();  // keep the rest of the block clean
          }
        }
      }
    }
    for (int i = 0; i < count; ++i)
      scores[begin + i] = (alive[i] && std::isfinite(score[i])) ? score[i] : kNegInf;
  };

  if (cfg.threads <= 1 || num_blocks == 1) {
    for (int b = 0; b < num_blocks; ++b) eval_block(b);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int b = next.fetch_add(1); b < num_blocks; b = next.fetch_add(1))
        eval_block(b);
    };
    std::vector<std::thread> pool;
    const int nt = std::min(cfg.threads, num_blocks);
    pool.reserve(nt);
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  int best = 0;
  for (int i = 1; i < N; ++i)
    if (scores[i] > scores[best]) best = i;

  ShootingResult result;
  result.index = best;
  result.score = scores[best];
  result.actions = shooting_candidate(best, n, act_low, act_high, cfg.seed);
  return result;
}

Vec mpc_step(const models::DynamicsModel& model, const RewardFn& reward, const Vec& s,
             const Vec& act_low, const Vec& act_high, const ShootingConfig& cfg) {
  return random_shooting(model, reward, s, act_low, act_high, cfg)
      .actions.row(0)
      .transpose();
}

Vec ig_explore(const models::DynamicsModel& model, const Vec& s, const Vec& act_low,
               const Vec& act_high, int num_candidates, std::uint64_t seed) {
  if (!model.has_epistemic())
    throw models::CapabilityError("ig_explore: model has no epistemic uncertainty");
  if (num_candidates < 1)
    throw std::invalid_argument("ig_explore: need at least one candidate");
  Rng rng = make_rng(mix64(seed, 0x6967ULL));
  Vec best_action;
  double best_u = kNegInf;
  for (int i = 0; i < num_candidates; ++i) {
    const Vec a = uniform_action(rng, act_low, act_high);
    const double u = model.epistemic(s, a, mix64(seed, static_cast<std::uint64_t>(i)));
    if (u > best_u) {
      best_u = u;
      best_action = a;
    }
  }
  return best_action;
}

ActionChoice choose_action(const models::DynamicsModel& model, const RewardFn& reward,
                           const Vec& s, const Vec& act_low, const Vec& act_high,
                           const ShootingConfig& shooting,
                           const ExplorationConfig& exploration, Rng& rng) {
  const double p = uniform(rng);
  const std::uint64_t sub_seed = rng();
  ActionChoice choice;
  if (p < exploration.epsilon) {
    choice.explored = true;
    if (model.has_epistemic()) {
      choice.action = ig_explore(model, s, act_low, act_high,
                                 exploration.num_candidate_actions, sub_seed);
    } else {
      Rng sub = make_rng(sub_seed);
      choice.action = uniform_action(sub, act_low, act_high);
    }
  } else {
    ShootingConfig cfg = shooting;
    cfg.seed = sub_seed;
    choice.action = mpc_step(model, reward, s, act_low, act_high, cfg);
  }
  return choice;
}

}  // namespace mbrl::planner
