#pragma once

#include <string>
#include <vector>

#include "pgrpo/core.hpp"
#include "pgrpo/env.hpp"
#include "pgrpo/thinkrm.hpp"

namespace pgrpo {

enum class CompositionMode { Gated, Soft, OutcomeOnly };

std::string to_string(CompositionMode mode);
CompositionMode composition_mode_from_string(const std::string& s);

struct ClipConfig {
  double eps_low = 0.2;
  double eps_high = 0.28;
};

struct GroupBatch {
  std::string problem_id;
  std::vector<Rollout> rollouts;
  std::vector<double> advantages;
};

class RangeViolation : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};
class GroupTooSmall : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// gated:        total = r_f + r_o + r_o * r_t
// soft:         total = r_f + r_o + pass_rate * r_t
// outcome_only: total = r_f + r_o
RewardBreakdown compose_reward(double r_f, double r_o, double pass_rate, double r_t,
                               CompositionMode mode);

// A_i = (R_i - mean) / (std + 1e-6), population std; an all-equal group
// yields the exact zero vector
std::vector<double> group_advantages(const std::vector<double>& rewards);

struct TokenLoss {
  double loss = 0.0;                    // sum over tokens
  std::vector<double> grad_scale;      // d loss_t / d new_logprob_t
};

// per token: ratio = exp(new - old);
// loss_t = -min(ratio * A, clip(ratio, 1 - eps_low, 1 + eps_high) * A)
TokenLoss clipped_token_loss(const std::vector<double>& new_logprobs,
                             const std::vector<double>& old_logprobs, double advantage,
                             const ClipConfig& cfg);

struct OptimizerConfig {
  double lr = 0.5;
  bool adam = false;  // plain gradient descent by default
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}
  void apply(std::vector<double>* params, const std::vector<double>& grad);

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_, v_;
  int64_t t_ = 0;
};

struct StepMetrics {
  double mean_total = 0.0;
  double mean_r_o = 0.0;
  double mean_gated_rt = 0.0;       // mean applied thinking contribution
  double zero_adv_fraction = 0.0;   // fraction of groups with all-zero advantages
  double hack_freq = 0.0;           // mean hack-token count per rollout
  double mean_rt_incorrect = 0.0;   // thinking contribution on r_o = 0 rollouts
  int n_rollouts = 0;
};

struct PgrpoConfig {
  int group_size = 8;
  CompositionMode mode = CompositionMode::Gated;
  ClipConfig clip;
};

// one batch: sample G rollouts per problem, score, compute advantages,
// apply one token-level clipped policy-gradient step
StepMetrics pgrpo_step(TabularPolicy* policy, const std::vector<Problem>& problems,
                       const PgrpoConfig& cfg, const ThinkRewardModel* thinkmodel,
                       Optimizer* optimizer, Rng& rng,
                       std::vector<GroupBatch>* groups_out = nullptr);

// fraction of problems whose greedy rollout passes all test cases
double greedy_success_rate(const TabularPolicy& policy,
                           const std::vector<Problem>& problems);

}  // namespace pgrpo
