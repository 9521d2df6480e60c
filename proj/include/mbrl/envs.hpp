#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>

#include "mbrl/types.hpp"

namespace mbrl::envs {

struct EnvSpec {
  std::string id;
  int obs_dim = 0;
  int act_dim = 0;
  int horizon = 0;
  int episodes = 0;  // default benchmark episode count
  Vec action_low;
  Vec action_high;
};

// Deterministic analytic environment. reset(seed) fully determines the
// initial state; step clips the action to bounds, integrates one
// semi-implicit Euler step, and returns the reward of the pre-transition
// (observation, action) pair.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual Vec reset(std::uint64_t seed) = 0;
  virtual std::pair<Vec, double> step(const Vec& action) = 0;
  virtual Vec observation() const = 0;
};

// Ids: "pendulum", "inverted-pendulum", "reacher". Unknown id throws.
std::unique_ptr<Environment> make_env(const std::string& id);
EnvSpec env_spec(const std::string& id);

// Reward on an observation vector, shared between environments and planner
// rollouts on imagined states. Unknown id throws.
double reward_fn(const std::string& env_id, const Vec& obs, const Vec& action);

// Reward formulas of the remaining benchmark tasks. Their dynamics require a
// rigid-body simulator and are not implemented here; the formulas are kept so
// an external simulator can reuse them.
double inverted_double_pendulum_reward(double theta, double gamma, double theta_dot,
                                       double gamma_dot);
double hopper_reward(double x_dot, const Vec& action, double height);
double half_cheetah_reward(double x_dot, const Vec& action);

}  // namespace mbrl::envs
