#include "pgrpo/rl.hpp"

#include <algorithm>
#include <cmath>

#include "pgrpo/exec.hpp"
#include "pgrpo/format.hpp"

namespace pgrpo {

std::string to_string(CompositionMode mode) {
  switch (mode) {
    case CompositionMode::Gated: return "gated";
    case CompositionMode::Soft: return "soft";
    case CompositionMode::OutcomeOnly: return "outcome_only";
  }
  throw std::logic_error("unreachable composition mode");
}

CompositionMode composition_mode_from_string(const std::string& s) {
  if (s == "gated") return CompositionMode::Gated;
  if (s == "soft") return CompositionMode::Soft;
  if (s == "outcome_only") return CompositionMode::OutcomeOnly;
  throw std::invalid_argument("unknown composition mode: " + s);
}

RewardBreakdown compose_reward(double r_f, double r_o, double pass_rate, double r_t,
                               CompositionMode mode) {
  if (r_f != 0.0 && r_f != 1.0) throw RangeViolation("r_format must be 0 or 1");
  if (r_o != 0.0 && r_o != 1.0) throw RangeViolation("r_outcome must be 0 or 1");
  if (pass_rate < 0.0 || pass_rate > 1.0) throw RangeViolation("pass_rate outside [0,1]");
  if (r_t < 0.0 || r_t > 1.0) throw RangeViolation("r_think outside [0,1]");
  if (r_o == 1.0 && pass_rate != 1.0)
    throw RangeViolation("r_outcome = 1 requires pass_rate = 1");

  RewardBreakdown out;
  out.r_format = r_f;
  out.r_outcome = r_o;
  out.pass_rate = pass_rate;
  out.r_think_raw = r_t;
  switch (mode) {
    case CompositionMode::Gated:
      out.r_think_gated = r_o * r_t;
      break;
    case CompositionMode::Soft:
      out.r_think_gated = pass_rate * r_t;
      break;
    case CompositionMode::OutcomeOnly:
      out.r_think_gated = 0.0;
      break;
  }
  out.r_total = r_f + r_o + out.r_think_gated;
  return out;
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
  const size_t g = rewards.size();
  if (g < 2) throw GroupTooSmall("group size must be >= 2");

  bool all_equal = std::all_of(rewards.begin(), rewards.end(),
                               [&](double r) { return r == rewards[0]; });
  if (all_equal) return std::vector<double>(g, 0.0);

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);  // population
  double denom = std::sqrt(var) + 1e-6;

  std::vector<double> out(g);
  for (size_t i = 0; i < g; ++i) out[i] = (rewards[i] - mean) / denom;
  return out;
}

TokenLoss clipped_token_loss(const std::vector<double>& new_logprobs,
                             const std::vector<double>& old_logprobs, double advantage,
                             const ClipConfig& cfg) {
  if (new_logprobs.size() != old_logprobs.size())
    throw LengthMismatch("new/old log-prob lengths differ");

  TokenLoss out;
  out.grad_scale.resize(new_logprobs.size());
  for (size_t t = 0; t < new_logprobs.size(); ++t) {
    double ratio = std::exp(new_logprobs[t] - old_logprobs[t]);
    double clipped = std::clamp(ratio, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high);
    double unclipped_term = ratio * advantage;
    double clipped_term = clipped * advantage;
    if (unclipped_term <= clipped_term) {
      out.loss += -unclipped_term;
      // d(-ratio * A)/d new = -A * ratio
      out.grad_scale[t] = -advantage * ratio;
    } else {
      out.loss += -clipped_term;
      out.grad_scale[t] = 0.0;  // clip saturated
    }
  }
  return out;
}

void Optimizer::apply(std::vector<double>* params, const std::vector<double>& grad) {
  if (params->size() != grad.size())
    throw LengthMismatch("optimizer: parameter/gradient size mismatch");
  if (!cfg_.adam) {
    for (size_t i = 0; i < params->size(); ++i) (*params)[i] -= cfg_.lr * grad[i];
    return;
  }
  if (m_.empty()) {
    m_.assign(params->size(), 0.0);
    v_.assign(params->size(), 0.0);
  }
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params->size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    (*params)[i] -= cfg_.lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
  }
}

namespace {

int count_token(const std::vector<int>& tokens, int wanted) {
  return static_cast<int>(std::count(tokens.begin(), tokens.end(), wanted));
}

}  // namespace

StepMetrics pgrpo_step(TabularPolicy* policy, const std::vector<Problem>& problems,
                       const PgrpoConfig& cfg, const ThinkRewardModel* thinkmodel,
                       Optimizer* optimizer, Rng& rng,
                       std::vector<GroupBatch>* groups_out) {
  if (cfg.group_size < 2) throw GroupTooSmall("group size must be >= 2");
  if (cfg.mode != CompositionMode::OutcomeOnly && thinkmodel == nullptr)
    throw std::invalid_argument("thinking reward model required for this mode");

  StepMetrics metrics;
  std::vector<GroupBatch> groups;
  size_t total_tokens = 0;
  int incorrect = 0;
  double rt_incorrect_sum = 0.0;

  for (size_t pi = 0; pi < problems.size(); ++pi) {
    const Problem& problem = problems[pi];
    GroupBatch group;
    group.problem_id = problem.id;
    std::vector<double> rewards;

    for (int g = 0; g < cfg.group_size; ++g) {
      Rng child = rng.derive(problem.id).derive(static_cast<uint64_t>(g));
      Rollout r = sample_rollout(*policy, problem, child);
      r.parsed = parse_response(r.raw_text);
      double r_f = format_reward(*r.parsed);
      OutcomeResult outcome;
      outcome.total = static_cast<int>(problem.test_cases.size());
      if (r.parsed->format_ok)
        outcome = evaluate_outcome(r.parsed->answer_text, problem);
      double r_t = 0.0;
      if (cfg.mode != CompositionMode::OutcomeOnly && r.parsed->format_ok)
        r_t = score(*thinkmodel, problem, r.parsed->think_text);
      r.rewards = compose_reward(r_f, outcome.r_outcome, outcome.pass_rate, r_t, cfg.mode);

      metrics.mean_total += r.rewards->r_total;
      metrics.mean_r_o += r.rewards->r_outcome;
      metrics.mean_gated_rt += r.rewards->r_think_gated;
      metrics.hack_freq += count_token(r.tokens, kTokBuzz);
      if (r.rewards->r_outcome == 0.0) {
        ++incorrect;
        rt_incorrect_sum += r.rewards->r_think_gated;
      }
      total_tokens += r.tokens.size();
      rewards.push_back(r.rewards->r_total);
      group.rollouts.push_back(std::move(r));
    }
    group.advantages = group_advantages(rewards);
    bool zero_adv = std::all_of(group.advantages.begin(), group.advantages.end(),
                                [](double a) { return a == 0.0; });
    if (zero_adv) metrics.zero_adv_fraction += 1.0;
    groups.push_back(std::move(group));
  }

  // token-level aggregation: the batch loss averages over every token in
  // the batch, not per sequence
  std::vector<double> grad(TabularPolicy::table_size(), 0.0);
  double inv_tokens = total_tokens > 0 ? 1.0 / static_cast<double>(total_tokens) : 0.0;
  for (const GroupBatch& group : groups) {
    for (size_t i = 0; i < group.rollouts.size(); ++i) {
      const Rollout& r = group.rollouts[i];
      if (group.advantages[i] == 0.0 || r.tokens.empty()) continue;
      std::vector<double> new_lp = policy_logprobs(*policy, r.tokens);
      TokenLoss tl = clipped_token_loss(new_lp, r.old_logprobs, group.advantages[i], cfg.clip);
      std::vector<double> coeffs(tl.grad_scale);
      for (double& c : coeffs) c *= inv_tokens;
      add_logprob_gradient(*policy, r.tokens, coeffs, &grad);
    }
  }
  optimizer->apply(&policy->logits, grad);

  int n = static_cast<int>(problems.size()) * cfg.group_size;
  metrics.n_rollouts = n;
  if (n > 0) {
    metrics.mean_total /= n;
    metrics.mean_r_o /= n;
    metrics.mean_gated_rt /= n;
    metrics.hack_freq /= n;
  }
  if (!problems.empty())
    metrics.zero_adv_fraction /= static_cast<double>(problems.size());
  metrics.mean_rt_incorrect = incorrect > 0 ? rt_incorrect_sum / incorrect : 0.0;

  if (groups_out) *groups_out = std::move(groups);
  return metrics;
}

double greedy_success_rate(const TabularPolicy& policy,
                           const std::vector<Problem>& problems) {
  if (problems.empty()) return 0.0;
  int ok = 0;
  for (const Problem& p : problems) {
    Rollout r = greedy_rollout(policy, p);
    ParsedResponse parsed = parse_response(r.raw_text);
    if (parsed.format_ok && evaluate_outcome(parsed.answer_text, p).r_outcome == 1.0) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(problems.size());
}

}  // namespace pgrpo
