#pragma once

#include <string>
#include <vector>

#include "pgrpo/core.hpp"
#include "pgrpo/env.hpp"
#include "pgrpo/rl.hpp"
#include "pgrpo/thinkrm.hpp"

namespace pgrpo {

struct ExperimentConfig {
  uint64_t seed = 0;
  int steps = 300;
  int group_size = 8;
  std::string mode = "gated";  // gated | soft | outcome_only
  double lr = 0.5;
  bool adam = false;
  double eps_low = 0.2;
  double eps_high = 0.28;
  std::string corpus_path;
  std::string thinkrm_path;
  double plant_hack_bonus = 0.0;  // > 0 plants the hack channel
  int eval_every = 25;
  std::string out_dir;
};

struct ExperimentSummary {
  double final_success = 0.0;    // greedy success after the last step
  double first_hack_freq = 0.0;  // mean hack tokens per rollout, first step
  double final_hack_freq = 0.0;
  double final_mean_total = 0.0;
};

// runs the experiment and writes config.json, metrics.csv and
// checkpoint_final.jsonl into cfg.out_dir
ExperimentSummary run_rl_experiment(const ExperimentConfig& cfg,
                                    const std::vector<Problem>& corpus,
                                    const ThinkRewardModel* thinkmodel);

struct RmEvalReport {
  ThinkRewardModel model;
  size_t train_examples = 0;
  size_t holdout_problems = 0;
  size_t holdout_pairs = 0;
  double holdout_accuracy = 0.0;
};

// trains on a seeded problem-level split and scores pairwise accuracy on
// preference pairs built from the held-out problems; method is "od" or
// "score", an empty keep_types keeps all pair types
RmEvalReport train_rm_with_holdout(const std::vector<Problem>& corpus,
                                   const std::string& method,
                                   const std::vector<PairType>& keep_types, uint64_t seed,
                                   int epochs, double lr, double holdout_frac);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// deterministic short float formatting shared by CSV and reports
std::string format_double(double v);

// exit codes: 0 success, 1 runtime failure, 2 usage error
int run_cli(int argc, const char* const* argv);

}  // namespace pgrpo
