#include <doctest.h>

#include <cmath>

#include "mbrl/envs.hpp"
#include "mbrl/rng.hpp"

using namespace mbrl;
using namespace mbrl::envs;

TEST_CASE("env specs match the benchmark table") {
  const EnvSpec p = env_spec("pendulum");
  CHECK(p.obs_dim == 3);
  CHECK(p.act_dim == 1);
  CHECK(p.horizon == 200);
  CHECK(p.episodes == 50);

  const EnvSpec ip = env_spec("inverted-pendulum");
  CHECK(ip.obs_dim == 4);
  CHECK(ip.act_dim == 1);
  CHECK(ip.horizon == 100);
  CHECK(ip.episodes == 35);

  const EnvSpec r = env_spec("reacher");
  CHECK(r.obs_dim == 9);
  CHECK(r.act_dim == 2);
  CHECK(r.horizon == 50);
  CHECK(r.episodes == 50);

  CHECK_THROWS_AS(env_spec("hopper"), std::invalid_argument);
}

TEST_CASE("reset: same seed gives identical observations") {
  for (const char* id : {"pendulum", "inverted-pendulum", "reacher"}) {
    auto env = make_env(id);
    const Vec a = env->reset(123);
    const Vec b = env->reset(123);
    CHECK((a - b).norm() == 0.0);
  }
}

TEST_CASE("pendulum observation satisfies the trig identity") {
  auto env = make_env("pendulum");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Vec obs = env->reset(seed);
    CHECK(obs(0) * obs(0) + obs(1) * obs(1) == doctest::Approx(1.0).epsilon(1e-12));
    for (int t = 0; t < 10; ++t)
      obs = env->step(Vec::Constant(1, 1.0)).first;
    CHECK(obs(0) * obs(0) + obs(1) * obs(1) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("reacher target lies within arm reach") {
  auto env = make_env("reacher");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Vec obs = env->reset(seed);
    CHECK(std::hypot(obs(6), obs(7)) <= 0.2 + 1e-12);
  }
}

TEST_CASE("pendulum equilibrium at upright") {
  auto env = make_env("pendulum");
  env->reset(0);
  // we cannot set state directly; verify via the reward function instead
  Vec upright(3);
  upright << 1.0, 0.0, 0.0;
  CHECK(reward_fn("pendulum", upright, Vec::Zero(1)) == doctest::Approx(0.0));
}

TEST_CASE("cart-pole upright equilibrium is unstable") {
  auto env = make_env("inverted-pendulum");
  // deterministic: find a seed with theta > 0.01 and watch it grow with a = 0
  Vec obs;
  std::uint64_t seed = 0;
  do {
    obs = env->reset(seed++);
  } while (std::abs(obs(2)) < 0.01);
  const double theta0 = std::abs(obs(2));
  for (int t = 0; t < 50; ++t) obs = env->step(Vec::Zero(1)).first;
  CHECK(std::abs(obs(2)) > theta0);
}

TEST_CASE("step determinism") {
  auto a = make_env("reacher");
  auto b = make_env("reacher");
  a->reset(7);
  b->reset(7);
  Vec act(2);
  act << 0.3, -0.8;
  for (int t = 0; t < 20; ++t) {
    const auto [oa, ra] = a->step(act);
    const auto [ob, rb] = b->step(act);
    CHECK((oa - ob).norm() == 0.0);
    CHECK(ra == rb);
  }
}

TEST_CASE("step rejects non-finite actions") {
  auto env = make_env("pendulum");
  env->reset(0);
  Vec bad(1);
  bad << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(env->step(bad), std::invalid_argument);
}

TEST_CASE("reward examples") {
  Vec obs(3);
  obs << 1.0, 0.0, 0.0;  // theta = 0
  CHECK(reward_fn("pendulum", obs, Vec::Zero(1)) == doctest::Approx(0.0));

  obs << -1.0, 0.0, 0.0;  // theta = pi
  CHECK(reward_fn("pendulum", obs, Vec::Zero(1)) == doctest::Approx(-M_PI * M_PI));

  // reacher at the target with zero action
  Vec robs = Vec::Zero(9);
  CHECK(reward_fn("reacher", robs, Vec::Zero(2)) == doctest::Approx(0.0));

  Vec iobs(4);
  iobs << 0.0, 0.0, 0.3, 0.0;
  CHECK(reward_fn("inverted-pendulum", iobs, Vec::Zero(1)) == doctest::Approx(-0.09));

  CHECK_THROWS_AS(reward_fn("no-such-env", obs, Vec::Zero(1)), std::invalid_argument);
}

TEST_CASE("pendulum reward is invariant under 2*pi angle shifts") {
  Rng rng = make_rng(3);
  for (int i = 0; i < 50; ++i) {
    const double theta = uniform(rng, -10.0, 10.0);
    const int k = static_cast<int>(rng() % 7) - 3;
    const double shifted = theta + 2.0 * M_PI * k;
    Vec a(3), b(3);
    a << std::cos(theta), std::sin(theta), 0.5;
    b << std::cos(shifted), std::sin(shifted), 0.5;
    const Vec act = Vec::Constant(1, 0.3);
    CHECK(reward_fn("pendulum", a, act) ==
          doctest::Approx(reward_fn("pendulum", b, act)).epsilon(1e-9));
  }
}

TEST_CASE("step reward equals reward_fn on the pre-transition observation") {
  for (const char* id : {"pendulum", "inverted-pendulum", "reacher"}) {
    auto env = make_env(id);
    Vec obs = env->reset(11);
    Rng rng = make_rng(4);
    for (int t = 0; t < 15; ++t) {
      Vec a(env->spec().act_dim);
      for (int d = 0; d < a.size(); ++d)
        a(d) = uniform(rng, env->spec().action_low(d), env->spec().action_high(d));
      const double expected = reward_fn(id, obs, a);
      const auto [next, r] = env->step(a);
      CHECK(r == doctest::Approx(expected));
      obs = next;
    }
  }
}

TEST_CASE("pendulum energy drift below 1% over one horizon with zero torque") {
  auto env = make_env("pendulum");
  Vec obs = env->reset(1);
  auto energy = [](const Vec& o) {
    const double theta = std::atan2(o(1), o(0));
    // theta_ddot = 15 sin(theta) + 3a; potential U = 15 cos(theta)
    return 0.5 * o(2) * o(2) + 15.0 * std::cos(theta);
  };
  const double e0 = energy(obs);
  double max_drift = 0.0;
  for (int t = 0; t < 200; ++t) {
    obs = env->step(Vec::Zero(1)).first;
    max_drift = std::max(max_drift, std::abs(energy(obs) - e0));
  }
  CHECK(max_drift / std::abs(e0) < 0.01);
}

TEST_CASE("documented reward formulas of the unimplemented tasks") {
  CHECK(inverted_double_pendulum_reward(0.0, 0.0, 0.0, 0.0) == doctest::Approx(0.0));
  CHECK(inverted_double_pendulum_reward(0.1, 0.2, 1.0, 1.0) ==
        doctest::Approx(-0.01 - 0.04 - 0.001 - 0.005));
  CHECK(hopper_reward(1.0, Vec::Zero(3), 0.0) == doctest::Approx(2.0));
  CHECK(half_cheetah_reward(2.0, Vec::Ones(6)) == doctest::Approx(2.0 - 0.6));
}
