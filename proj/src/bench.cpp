#include "mbrl/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "mbrl/envs.hpp"

namespace mbrl::bench {

namespace {

using json = nlohmann::ordered_json;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Vec uniform_action(Rng& rng, const Vec& lo, const Vec& hi) {
  Vec a(lo.size());
  for (int d = 0; d < lo.size(); ++d) a(d) = uniform(rng, lo(d), hi(d));
  return a;
}

struct MeanStderr {
  double mean = 0.0;
  double se = 0.0;
};

MeanStderr mean_stderr(const std::vector<double>& v) {
  MeanStderr r;
  const int n = static_cast<int>(v.size());
  if (n == 0) return r;
  double sum = 0.0;
  for (double x : v) sum += x;
  r.mean = sum / n;
  if (n > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
  }
  return r;
}

}  // namespace

std::vector<int> default_hidden(const std::string& env_id, const std::string& model_id) {
  if (model_id == "gp")
    throw std::invalid_argument("default_hidden: gp has no hidden sizes");
  const bool cd = model_id == "concrete-dropout";
  const bool anchored = model_id == "anchored-ensemble";
  if (env_id == "pendulum") {
    if (cd) return {100, 100};
    if (anchored) return {40, 40};
    return {32, 32};
  }
  if (env_id == "inverted-pendulum") {
    if (cd) return {100, 100};
    return {40, 40};
  }
  if (env_id == "reacher") {
    if (cd) return {500, 500};
    return {200, 200};
  }
  throw std::invalid_argument("default_hidden: unknown environment id: " + env_id);
}

void resolve_defaults(RunConfig& cfg) {
  const envs::EnvSpec spec = envs::env_spec(cfg.env_id);
  if (cfg.episodes < 0) cfg.episodes = spec.episodes;
  if (cfg.horizon < 0) cfg.horizon = spec.horizon;
  if (cfg.hidden_from_defaults && cfg.model_id != "gp")
    cfg.nn.hidden = default_hidden(cfg.env_id, cfg.model_id);
  cfg.exploration.epsilon = cfg.epsilon;
}

std::vector<EpisodeRecord> run_seed(const RunConfig& raw_cfg, std::uint64_t seed) {
  RunConfig cfg = raw_cfg;
  resolve_defaults(cfg);
  auto env = envs::make_env(cfg.env_id);
  const envs::EnvSpec& spec = env->spec();
  auto model = models::make_model(cfg.model_id, spec.obs_dim, spec.act_dim,
                                  mix64(seed, 0x6d6f64656cULL), cfg.nn, cfg.gp);
  ReplayBuffer buffer(cfg.buffer_capacity);
  const planner::RewardFn reward = [&](const Vec& obs, const Vec& a) {
    return envs::reward_fn(cfg.env_id, obs, a);
  };

  // warmup: one episode under a uniform random controller
  {
    Rng rng = make_rng(mix64(seed, 0x7761726dULL));
    Vec obs = env->reset(mix64(seed, 0));
    for (int t = 0; t < cfg.horizon; ++t) {
      const Vec a = uniform_action(rng, spec.action_low, spec.action_high);
      auto [next, r] = env->step(a);
      buffer.push({obs, a, next, r});
      obs = next;
    }
  }

  std::vector<EpisodeRecord> records;
  records.reserve(cfg.episodes);
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const double t0 = now_seconds();
    bool diverged = false;
    try {
      model->fit(buffer);
    } catch (const std::runtime_error&) {
      diverged = true;  // keep the previous parameters, still play the episode
    }
    Vec obs = env->reset(mix64(seed, static_cast<std::uint64_t>(ep) + 1));
    Rng act_rng = make_rng(mix64(seed, 0x616374ULL, static_cast<std::uint64_t>(ep)));
    double ret = 0.0;
    for (int t = 0; t < cfg.horizon; ++t) {
      Vec a;
      if (model->fitted() && !diverged) {
        a = planner::choose_action(*model, reward, obs, spec.action_low,
                                   spec.action_high, cfg.shooting, cfg.exploration,
                                   act_rng)
                .action;
      } else {
        a = uniform_action(act_rng, spec.action_low, spec.action_high);
      }
      auto [next, r] = env->step(a);
      buffer.push({obs, a, next, r});
      obs = next;
      ret += r;
    }
    EpisodeRecord rec;
    rec.env = cfg.env_id;
    rec.model = cfg.model_id;
    rec.seed = seed;
    rec.episode = ep;
    rec.ret = ret;
    rec.wall_time_s = cfg.record_wall_time ? now_seconds() - t0 : 0.0;
    records.push_back(std::move(rec));
  }
  return records;
}

Summary summarize(const std::vector<EpisodeRecord>& records, int final_window) {
  Summary s;
  if (records.empty()) throw std::invalid_argument("summarize: no records");
  s.env = records.front().env;
  s.model = records.front().model;
  s.n = static_cast<int>(records.size());
  std::vector<double> all;
  std::map<std::uint64_t, int> max_episode;
  for (const auto& r : records) {
    all.push_back(r.ret);
    auto [it, inserted] = max_episode.try_emplace(r.seed, r.episode);
    if (!inserted) it->second = std::max(it->second, r.episode);
  }
  const MeanStderr m = mean_stderr(all);
  s.mean = m.mean;
  s.stderr_mean = m.se;
  std::vector<double> tail;
  for (const auto& r : records)
    if (r.episode > max_episode[r.seed] - final_window) tail.push_back(r.ret);
  const MeanStderr mt = mean_stderr(tail);
  s.final10_mean = mt.mean;
  s.final10_stderr = mt.se;
  s.degenerate = records.size() == 1;
  return s;
}

BenchmarkResult run_benchmark(const RunConfig& raw_cfg) {
  RunConfig cfg = raw_cfg;
  resolve_defaults(cfg);
  const int num_seeds = static_cast<int>(cfg.seeds.size());
  std::vector<std::vector<EpisodeRecord>> per_seed(num_seeds);
  std::vector<bool> failed(num_seeds, false);

  auto run_one = [&](int i) {
    try {
      per_seed[i] = run_seed(cfg, cfg.seeds[i]);
    } catch (const std::exception&) {
      failed[i] = true;
    }
  };

  if (cfg.threads <= 1 || num_seeds == 1) {
    for (int i = 0; i < num_seeds; ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    const int nt = std::min(cfg.threads, num_seeds);
    for (int w = 0; w < nt; ++w)
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < num_seeds; i = next.fetch_add(1))
          run_one(i);
      });
    for (auto& th : pool) th.join();
  }

  BenchmarkResult result;
  bool any_ok = false;
  for (int i = 0; i < num_seeds; ++i) {
    if (failed[i]) continue;
    any_ok = true;
    result.records.insert(result.records.end(), per_seed[i].begin(), per_seed[i].end());
  }
  if (!any_ok) throw std::runtime_error("run_benchmark: every seed failed");
  result.summary = summarize(result.records);
  result.summary.partial =
      std::any_of(failed.begin(), failed.end(), [](bool f) { return f; });
  return result;
}

void emit(const std::vector<EpisodeRecord>& records, const Summary& summary,
          const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream csv(fs::path(dir) / "records.csv");
    if (!csv) throw std::runtime_error("emit: cannot write records.csv under " + dir);
    csv << "env,model,seed,episode,return,wall_time_s\n";
    char buf[64];
    for (const auto& r : records) {
      std::snprintf(buf, sizeof(buf), "%.6f", r.ret);
      csv << r.env << ',' << r.model << ',' << r.seed << ',' << r.episode << ',' << buf;
      std::snprintf(buf, sizeof(buf), "%.6f", r.wall_time_s);
      csv << ',' << buf << '\n';
    }
  }

  {
    json j;
    j["env"] = summary.env;
    j["model"] = summary.model;
    j["mean"] = summary.mean;
    j["stderr"] = summary.stderr_mean;
    j["n"] = summary.n;
    j["final10_mean"] = summary.final10_mean;
    j["final10_stderr"] = summary.final10_stderr;
    j["degenerate"] = summary.degenerate;
    j["partial"] = summary.partial;
    std::ofstream out(fs::path(dir) / "summary.json");
    if (!out) throw std::runtime_error("emit: cannot write summary.json under " + dir);
    out << j.dump(2) << '\n';
  }

  {
    // per-episode mean across seeds
    std::map<int, std::vector<double>> by_episode;
    for (const auto& r : records) by_episode[r.episode].push_back(r.ret);
    std::ofstream csv(fs::path(dir) / "learning_curve.csv");
    if (!csv)
      throw std::runtime_error("emit: cannot write learning_curve.csv under " + dir);
    csv << "episode,mean_return,stderr_return\n";
    char buf[64];
    for (const auto& [ep, vals] : by_episode) {
      const MeanStderr m = mean_stderr(vals);
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f", m.mean, m.se);
      csv << ep << ',' << buf << '\n';
    }
  }
}

std::vector<EpisodeRecord> load_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "env,model,seed,episode,return,wall_time_s")
    throw std::runtime_error("bad records header in " + path);
  std::vector<EpisodeRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    EpisodeRecord r;
    std::getline(ss, r.env, ',');
    std::getline(ss, r.model, ',');
    std::getline(ss, field, ',');
    r.seed = std::stoull(field);
    std::getline(ss, field, ',');
    r.episode = std::stoi(field);
    std::getline(ss, field, ',');
    r.ret = std::stod(field);
    std::getline(ss, field, ',');
    r.wall_time_s = std::stod(field);
    records.push_back(std::move(r));
  }
  return records;
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key=value at line " +
                                  std::to_string(lineno));
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);

    auto as_bool = [&] {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw std::invalid_argument("config: expected a boolean at line " +
                                  std::to_string(lineno));
    };
    auto as_int_list = [&] {
      std::vector<int> out;
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
      return out;
    };

    if (key == "env") cfg.env_id = value;
    else if (key == "model") cfg.model_id = value;
    else if (key == "seeds") {
      const int count = std::stoi(value);
      if (count < 1) throw std::invalid_argument("config: seeds must be >= 1");
      cfg.seeds.clear();
      for (int i = 0; i < count; ++i) cfg.seeds.push_back(i);
    } else if (key == "seed_list") {
      cfg.seeds.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) cfg.seeds.push_back(std::stoull(item));
    }
    else if (key == "episodes") cfg.episodes = std::stoi(value);
    else if (key == "horizon") cfg.horizon = std::stoi(value);
    else if (key == "epsilon") cfg.epsilon = std::stod(value);
    else if (key == "buffer_capacity") cfg.buffer_capacity = std::stoul(value);
    else if (key == "shooting_n") cfg.shooting.num_trajectories = std::stoi(value);
    else if (key == "shooting_horizon") cfg.shooting.horizon = std::stoi(value);
    else if (key == "shooting_threads") cfg.shooting.threads = std::stoi(value);
    else if (key == "ig_candidates") cfg.exploration.num_candidate_actions = std::stoi(value);
    else if (key == "hidden") { cfg.nn.hidden = as_int_list(); cfg.hidden_from_defaults = false; }
    else if (key == "learning_rate") cfg.nn.train.learning_rate = std::stod(value);
    else if (key == "epochs") cfg.nn.train.epochs = std::stoi(value);
    else if (key == "batch_size") cfg.nn.train.batch_size = std::stoi(value);
    else if (key == "warm_start") cfg.nn.warm_start = as_bool();
    else if (key == "ensemble_size") cfg.nn.ensemble_size = std::stoi(value);
    else if (key == "mc_passes") cfg.nn.mc_passes = std::stoi(value);
    else if (key == "gp_max_points") cfg.gp.max_points = std::stoi(value);
    else if (key == "gp_opt_iterations") cfg.gp.hyper_opt.iterations = std::stoi(value);
    else if (key == "gp_opt_restarts") cfg.gp.hyper_opt.restarts = std::stoi(value);
    else if (key == "record_wall_time") cfg.record_wall_time = as_bool();
    else if (key == "threads") cfg.threads = std::stoi(value);
    else if (key == "out") cfg.out_dir = value;
    else throw std::invalid_argument("config: unknown key '" + key + "' at line " +
                                     std::to_string(lineno));
  }
}

}  // namespace mbrl::bench
