#include "mbrl/envs.hpp"

#include <cmath>
#include <stdexcept>

#include "mbrl/rng.hpp"

namespace mbrl::envs {

namespace {

// ((theta + pi) mod 2*pi) - pi, in [-pi, pi)
double wrap_angle(double theta) {
  double m = std::fmod(theta + M_PI, 2.0 * M_PI);
  if (m < 0.0) m += 2.0 * M_PI;
  return m - M_PI;
}

Vec clip(const Vec& a, const Vec& lo, const Vec& hi) {
  if (a.size() != lo.size()) throw std::invalid_argument("step: action dimension mismatch");
  if (!a.allFinite()) throw std::invalid_argument("step: non-finite action");
  return a.cwiseMax(lo).cwiseMin(hi);
}

// -- pendulum: swing-up, theta = 0 upright, obs = (cos, sin, theta_dot) --

constexpr double kPendulumG = 10.0, kPendulumDt = 0.05;

class Pendulum final : public Environment {
 public:
  Pendulum() {
    spec_ = {"pendulum", 3, 1, 200, 50, Vec::Constant(1, -2.0), Vec::Constant(1, 2.0)};
  }
  const EnvSpec& spec() const override { return spec_; }

  Vec reset(std::uint64_t seed) override {
    Rng rng = make_rng(mix64(seed, 0x70656eULL));
    theta_ = M_PI + uniform(rng, -0.1, 0.1);  // hanging down
    theta_dot_ = uniform(rng, -0.1, 0.1);
    return observation();
  }

  std::pair<Vec, double> step(const Vec& action) override {
    const Vec a = clip(action, spec_.action_low, spec_.action_high);
    const double reward = reward_fn(spec_.id, observation(), a);
    const double accel = 1.5 * kPendulumG * std::sin(theta_) + 3.0 * a(0);
    theta_dot_ += kPendulumDt * accel;
    theta_ += kPendulumDt * theta_dot_;
    return {observation(), reward};
  }

  Vec observation() const override {
    Vec obs(3);
    obs << std::cos(theta_), std::sin(theta_), theta_dot_;
    return obs;
  }

 private:
  EnvSpec spec_;
  double theta_ = M_PI, theta_dot_ = 0.0;
};

// -- inverted pendulum: continuous-force cart-pole, obs = (x, x_dot, theta, theta_dot) --

constexpr double kCartDt = 0.02, kCartG = 9.8;
constexpr double kCartMass = 1.0, kPoleMass = 0.1, kPoleHalfLen = 0.5;

class InvertedPendulum final : public Environment {
 public:
  InvertedPendulum() {
    spec_ = {"inverted-pendulum", 4,  1, 100, 35,
             Vec::Constant(1, -10.0), Vec::Constant(1, 10.0)};
  }
  const EnvSpec& spec() const override { return spec_; }

  Vec reset(std::uint64_t seed) override {
    Rng rng = make_rng(mix64(seed, 0x636172ULL));
    x_ = uniform(rng, -0.05, 0.05);
    x_dot_ = uniform(rng, -0.05, 0.05);
    theta_ = uniform(rng, -0.05, 0.05);
    theta_dot_ = uniform(rng, -0.05, 0.05);
    return observation();
  }

  std::pair<Vec, double> step(const Vec& action) override {
    const Vec a = clip(action, spec_.action_low, spec_.action_high);
    const double reward = reward_fn(spec_.id, observation(), a);
    const double total_mass = kCartMass + kPoleMass;
    const double cos_t = std::cos(theta_), sin_t = std::sin(theta_);
    const double temp =
        (a(0) + kPoleMass * kPoleHalfLen * theta_dot_ * theta_dot_ * sin_t) / total_mass;
    const double theta_acc =
        (kCartG * sin_t - cos_t * temp) /
        (kPoleHalfLen * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
    const double x_acc = temp - kPoleMass * kPoleHalfLen * theta_acc * cos_t / total_mass;
    theta_dot_ += kCartDt * theta_acc;
    x_dot_ += kCartDt * x_acc;
    theta_ += kCartDt * theta_dot_;
    x_ += kCartDt * x_dot_;
    return {observation(), reward};
  }

  Vec observation() const override {
    Vec obs(4);
    obs << x_, x_dot_, theta_, theta_dot_;
    return obs;
  }

 private:
  EnvSpec spec_;
  double x_ = 0.0, x_dot_ = 0.0, theta_ = 0.0, theta_dot_ = 0.0;
};

// -- reacher: planar 2-link arm with velocity damping --
// obs = (q1, q2, q1_dot, q2_dot, tip_x, tip_y, target_x, target_y, distance)

constexpr double kReacherDt = 0.02, kLink = 0.1;
constexpr double kTorqueGain = 10.0, kJointDamping = 2.0;

class Reacher final : public Environment {
 public:
  Reacher() {
    spec_ = {"reacher", 9, 2, 50, 50, Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)};
  }
  const EnvSpec& spec() const override { return spec_; }

  Vec reset(std::uint64_t seed) override {
    Rng rng = make_rng(mix64(seed, 0x726561ULL));
    q1_ = uniform(rng, -0.1, 0.1);
    q2_ = uniform(rng, -0.1, 0.1);
    q1_dot_ = q2_dot_ = 0.0;
    const double radius = uniform(rng, 0.05, 0.18);  // inside the 2*kLink reach
    const double angle = uniform(rng, 0.0, 2.0 * M_PI);
    target_x_ = radius * std::cos(angle);
    target_y_ = radius * std::sin(angle);
    return observation();
  }

  std::pair<Vec, double> step(const Vec& action) override {
    const Vec a = clip(action, spec_.action_low, spec_.action_high);
    const double reward = reward_fn(spec_.id, observation(), a);
    q1_dot_ += kReacherDt * (kTorqueGain * a(0) - kJointDamping * q1_dot_);
    q2_dot_ += kReacherDt * (kTorqueGain * a(1) - kJointDamping * q2_dot_);
    q1_ += kReacherDt * q1_dot_;
    q2_ += kReacherDt * q2_dot_;
    return {observation(), reward};
  }

  Vec observation() const override {
    const double tip_x = kLink * std::cos(q1_) + kLink * std::cos(q1_ + q2_);
    const double tip_y = kLink * std::sin(q1_) + kLink * std::sin(q1_ + q2_);
    const double dist = std::hypot(tip_x - target_x_, tip_y - target_y_);
    Vec obs(9);
    obs << q1_, q2_, q1_dot_, q2_dot_, tip_x, tip_y, target_x_, target_y_, dist;
    return obs;
  }

 private:
  EnvSpec spec_;
  double q1_ = 0.0, q2_ = 0.0, q1_dot_ = 0.0, q2_dot_ = 0.0;
  double target_x_ = 0.1, target_y_ = 0.0;
};

}  // namespace

std::unique_ptr<Environment> make_env(const std::string& id) {
  if (id == "pendulum") return std::make_unique<Pendulum>();
  if (id == "inverted-pendulum") return std::make_unique<InvertedPendulum>();
  if (id == "reacher") return std::make_unique<Reacher>();
  throw std::invalid_argument("unknown environment id: " + id);
}

EnvSpec env_spec(const std::string& id) { return make_env(id)->spec(); }

double reward_fn(const std::string& env_id, const Vec& obs, const Vec& action) {
  if (env_id == "pendulum") {
    if (obs.size() != 3 || action.size() != 1)
      throw std::invalid_argument("pendulum reward: bad dimensions");
    const double theta = wrap_angle(std::atan2(obs(1), obs(0)));
    return -theta * theta - 0.1 * obs(2) * obs(2) - 0.001 * action(0) * action(0);
  }
  if (env_id == "inverted-pendulum") {
    if (obs.size() != 4 || action.size() != 1)
      throw std::invalid_argument("inverted-pendulum reward: bad dimensions");
    return -obs(2) * obs(2);
  }
  if (env_id == "reacher") {
    if (obs.size() != 9 || action.size() != 2)
      throw std::invalid_argument("reacher reward: bad dimensions");
    return -obs(8) - action.squaredNorm();
  }
  throw std::invalid_argument("unknown environment id: " + env_id);
}

double inverted_double_pendulum_reward(double theta, double gamma, double theta_dot,
                                       double gamma_dot) {
  return -theta * theta - gamma * gamma - 0.001 * theta_dot * theta_dot -
         0.005 * gamma_dot * gamma_dot;
}

double hopper_reward(double x_dot, const Vec& action, double height) {
  return x_dot - 0.1 * action.squaredNorm() - 3.0 * height * height + 1.0;
}

double half_cheetah_reward(double x_dot, const Vec& action) {
  return x_dot - 0.1 * action.squaredNorm();
}

}  // namespace mbrl::envs
