#pragma once

#include <cstdint>
#include <functional>

#include "mbrl/models.hpp"
#include "mbrl/replay.hpp"
#include "mbrl/types.hpp"

namespace mbrl::planner {

using RewardFn = std::function<double(const Vec& obs, const Vec& action)>;

struct ShootingConfig {
  int num_trajectories = 500;  // N
  int horizon = 20;            // n
  std::uint64_t seed = 0;
  // Candidates are evaluated in fixed-size blocks so that threaded and
  // sequential evaluation produce bit-identical scores.
  int block_size = 64;
  int threads = 1;
};

struct ExplorationConfig {
  double epsilon = 0.1;
  int num_candidate_actions = 100;
};

struct ShootingResult {
  Mat actions;       // (horizon x act_dim), best candidate
  double score = 0.0;
  int index = 0;     // candidate index, lowest on ties
};

// Rolls N uniformly sampled action sequences through the model's mean
// prediction and returns the argmax of the summed rewards. Candidates with a
// non-finite rollout state score -inf. Deterministic given cfg.seed; identical
// under any thread count.
ShootingResult random_shooting(const models::DynamicsModel& model,
                               const RewardFn& reward, const Vec& s0,
                               const Vec& act_low, const Vec& act_high,
                               const ShootingConfig& cfg);

// The uniformly sampled candidate actions random_shooting draws for index i.
Mat shooting_candidate(int index, int horizon, const Vec& act_low,
                       const Vec& act_high, std::uint64_t seed);

// First action of the best shooting sequence; fresh candidates every call.
Vec mpc_step(const models::DynamicsModel& model, const RewardFn& reward, const Vec& s,
             const Vec& act_low, const Vec& act_high, const ShootingConfig& cfg);

// Action with maximal epistemic uncertainty among uniformly sampled
// candidates; ties break to the lowest index. Requires has_epistemic.
Vec ig_explore(const models::DynamicsModel& model, const Vec& s, const Vec& act_low,
               const Vec& act_high, int num_candidates, std::uint64_t seed);

struct ActionChoice {
  Vec action;
  bool explored = false;
};

// With probability epsilon: IG exploration when the model supports it, else a
// uniform random action. Otherwise the MPC action.
ActionChoice choose_action(const models::DynamicsModel& model, const RewardFn& reward,
                           const Vec& s, const Vec& act_low, const Vec& act_high,
                           const ShootingConfig& shooting,
                           const ExplorationConfig& exploration, Rng& rng);

}  // namespace mbrl::planner
