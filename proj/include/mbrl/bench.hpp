#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbrl/models.hpp"
#include "mbrl/planner.hpp"

namespace mbrl::bench {

struct RunConfig {
  std::string env_id = "pendulum";
  std::string model_id = "deterministic-nn";
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  int episodes = -1;  // -1: environment default
  int horizon = -1;   // -1: environment default
  double epsilon = 0.1;
  std::size_t buffer_capacity = 2000;
  planner::ShootingConfig shooting;
  planner::ExplorationConfig exploration;
  models::NNModelConfig nn;
  models::GPModelConfig gp;
  bool hidden_from_defaults = true;  // overwrite nn.hidden with the per-env default
  bool record_wall_time = true;      // false: write 0.0, for byte-stable output
  int threads = 1;                   // seed-level parallelism
  std::string out_dir = ".";
};

struct EpisodeRecord {
  std::string env;
  std::string model;
  std::uint64_t seed = 0;
  int episode = 0;
  double ret = 0.0;
  double wall_time_s = 0.0;
};

struct Summary {
  std::string env;
  std::string model;
  double mean = 0.0;
  double stderr_mean = 0.0;  // sample std / sqrt(count)
  double final10_mean = 0.0;
  double final10_stderr = 0.0;
  int n = 0;
  bool degenerate = false;  // single record, stderr 0 by convention
  bool partial = false;     // some seeds failed; aggregated over the rest
};

// Default hidden sizes per (env, model); throws for gp.
std::vector<int> default_hidden(const std::string& env_id, const std::string& model_id);

// Resolves -1 episode/horizon fields and default hidden sizes in place.
void resolve_defaults(RunConfig& cfg);

// One warmup episode under a uniform random policy, then cfg.episodes of
// {refit model; act for horizon steps}. Returns one record per episode.
std::vector<EpisodeRecord> run_seed(const RunConfig& cfg, std::uint64_t seed);

struct BenchmarkResult {
  std::vector<EpisodeRecord> records;
  Summary summary;
};

BenchmarkResult run_benchmark(const RunConfig& cfg);

Summary summarize(const std::vector<EpisodeRecord>& records, int final_window = 10);

// Writes records.csv, summary.json and learning_curve.csv under dir.
void emit(const std::vector<EpisodeRecord>& records, const Summary& summary,
          const std::string& dir);

std::vector<EpisodeRecord> load_records_csv(const std::string& path);

// key=value lines, '#' comments; unknown keys rejected.
void apply_config_file(RunConfig& cfg, const std::string& path);

}  // namespace mbrl::bench
