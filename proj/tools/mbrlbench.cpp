#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mbrl/bench.hpp"

namespace {

int env_threads() {
  if (const char* v = std::getenv("MBRLBENCH_THREADS")) {
    try {
      return std::max(1, std::stoi(v));
    } catch (const std::exception&) {
    }
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-comparison benchmark for model-based RL"};
  app.require_subcommand(1);

  mbrl::bench::RunConfig cfg;
  cfg.threads = env_threads();
  cfg.shooting.threads = 1;

  int num_seeds = -1;
  std::string config_file;

  auto* run = app.add_subcommand("run", "Run the benchmark loop for one env/model pair");
  run->add_option("--env", cfg.env_id, "Environment id (pendulum, inverted-pendulum, reacher)");
  run->add_option("--model", cfg.model_id,
                  "Model id (deterministic-nn, deterministic-ensemble, concrete-dropout, "
                  "anchored-ensemble, gp)");
  run->add_option("--seeds", num_seeds, "Number of seeds (0..n-1)");
  run->add_option("--episodes", cfg.episodes, "Episodes per seed (default from env)");
  run->add_option("--epsilon", cfg.epsilon, "Exploration probability");
  run->add_option("--shooting-n", cfg.shooting.num_trajectories,
                  "Random-shooting trajectory count");
  run->add_option("--out", cfg.out_dir, "Output directory");
  run->add_option("--config", config_file, "key=value config file");

  std::string in_dir;
  auto* summarize = app.add_subcommand("summarize", "Recompute the summary from records.csv");
  summarize->add_option("--in", in_dir, "Directory containing records.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (!config_file.empty()) mbrl::bench::apply_config_file(cfg, config_file);
      if (num_seeds > 0) {
        cfg.seeds.clear();
        for (int i = 0; i < num_seeds; ++i) cfg.seeds.push_back(i);
      }
      mbrl::bench::resolve_defaults(cfg);  // validates env/model ids early
      mbrl::models::make_model(cfg.model_id, 1, 1, 0, cfg.nn, cfg.gp);

      try {
        const auto result = mbrl::bench::run_benchmark(cfg);
        mbrl::bench::emit(result.records, result.summary, cfg.out_dir);
        std::cout << cfg.env_id << "/" << cfg.model_id << ": mean " << result.summary.mean
                  << " +/- " << result.summary.stderr_mean << " over " << result.summary.n
                  << " episodes";
        if (result.summary.partial) std::cout << " (warning: partial, some seeds failed)";
        std::cout << "\n";
      } catch (const std::runtime_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
      }
    } else if (summarize->parsed()) {
      const auto records = mbrl::bench::load_records_csv(
          (std::filesystem::path(in_dir) / "records.csv").string());
      const auto summary = mbrl::bench::summarize(records);
      mbrl::bench::emit(records, summary, in_dir);
      std::cout << summary.env << "/" << summary.model << ": mean " << summary.mean
                << " +/- " << summary.stderr_mean << " over " << summary.n
                << " episodes\n";
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
