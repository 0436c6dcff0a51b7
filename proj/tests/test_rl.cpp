#include <cmath>

#include "doctest.h"
#include "pgrpo/env.hpp"
#include "pgrpo/rl.hpp"

using namespace pgrpo;

TEST_CASE("reward composition by mode") {
  RewardBreakdown g = compose_reward(1, 1, 1.0, 0.21, CompositionMode::Gated);
  CHECK(g.r_think_gated == doctest::Approx(0.21));
  CHECK(g.r_total == doctest::Approx(2.21));

  RewardBreakdown gate_closed = compose_reward(1, 0, 0.75, 0.9, CompositionMode::Gated);
  CHECK(gate_closed.r_think_gated == 0.0);
  CHECK(gate_closed.r_total == doctest::Approx(1.0));

  RewardBreakdown soft = compose_reward(1, 0, 0.75, 0.9, CompositionMode::Soft);
  CHECK(soft.r_think_gated == doctest::Approx(0.675));
  CHECK(soft.r_total == doctest::Approx(1.675));

  RewardBreakdown oo = compose_reward(1, 1, 1.0, 0.9, CompositionMode::OutcomeOnly);
  CHECK(oo.r_think_gated == 0.0);
  CHECK(oo.r_total == doctest::Approx(2.0));

  CHECK_THROWS_AS(compose_reward(2, 0, 0, 0, CompositionMode::Gated), RangeViolation);
  CHECK_THROWS_AS(compose_reward(1, 1, 1.5, 0, CompositionMode::Gated), RangeViolation);
  CHECK_THROWS_AS(compose_reward(1, 1, 1, -0.1, CompositionMode::Gated), RangeViolation);
}

TEST_CASE("mode names round-trip") {
  for (CompositionMode m :
       {CompositionMode::Gated, CompositionMode::Soft, CompositionMode::OutcomeOnly})
    CHECK(composition_mode_from_string(to_string(m)) == m);
  CHECK_THROWS(composition_mode_from_string("other"));
}

TEST_CASE("group advantages") {
  CHECK(group_advantages({2, 2, 2, 2}) == std::vector<double>{0, 0, 0, 0});

  std::vector<double> two = group_advantages({3, 1});
  CHECK(two[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(two[1] == doctest::Approx(-1.0).epsilon(1e-5));

  // frozen values from an independent mean/std computation
  std::vector<double> a = group_advantages({2.21, 2.0, 1.0, 0.0});
  CHECK(a[0] == doctest::Approx(1.0311697691277608).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(0.7925519713130723).epsilon(1e-12));
  CHECK(a[2] == doctest::Approx(-0.3437232563759202).epsilon(1e-12));
  CHECK(a[3] == doctest::Approx(-1.4799984840649127).epsilon(1e-12));

  CHECK_THROWS_AS(group_advantages({1.0}), GroupTooSmall);
}

TEST_CASE("advantage properties") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    size_t n = 2 + rng.uniform_int(7);
    std::vector<double> r(n);
    for (double& x : r) x = rng.uniform_real() * 3;
    std::vector<double> a = group_advantages(r);
    double sum = 0.0;
    for (double v : a) sum += v;
    CHECK(std::fabs(sum) < 1e-9);

    // shifting all rewards by a constant leaves advantages unchanged
    std::vector<double> shifted = r;
    for (double& x : shifted) x += 0.5;
    std::vector<double> b = group_advantages(shifted);
    for (size_t i = 0; i < n; ++i)
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
  }
}

TEST_CASE("clipped token loss") {
  ClipConfig cfg;

  SUBCASE("ratio 1 sits inside the clip window") {
    TokenLoss tl = clipped_token_loss({-0.5, -1.0}, {-0.5, -1.0}, 1.0, cfg);
    CHECK(tl.loss == doctest::Approx(-2.0));
    CHECK(tl.grad_scale[0] == doctest::Approx(-1.0));
    CHECK(tl.grad_scale[1] == doctest::Approx(-1.0));
  }
  SUBCASE("clip saturation kills the gradient") {
    double old_lp = -1.0, new_lp = old_lp + std::log(2.0);  // ratio 2
    TokenLoss tl = clipped_token_loss({new_lp}, {old_lp}, 1.0, cfg);
    CHECK(tl.loss == doctest::Approx(-1.28));
    CHECK(tl.grad_scale[0] == 0.0);
  }
  SUBCASE("negative advantage clips on the low side") {
    double old_lp = -1.0, new_lp = old_lp + std::log(0.5);  // ratio 0.5
    TokenLoss tl = clipped_token_loss({new_lp}, {old_lp}, -1.0, cfg);
    CHECK(tl.loss == doctest::Approx(0.8));
    CHECK(tl.grad_scale[0] == 0.0);
  }
  SUBCASE("length mismatch is rejected") {
    CHECK_THROWS_AS(clipped_token_loss({-1.0}, {-1.0, -2.0}, 1.0, cfg), LengthMismatch);
  }
}

namespace {

struct StepFixture {
  std::vector<Problem> problems;
  TabularPolicy policy;
  ThinkRewardModel model;

  StepFixture() {
    problems = generate_corpus({4, {OpCode::Max}, 2, 4}, 7);
    policy = make_initial_policy();
    model.weights.assign(kNumFeatures, 0.0);
    model.weights[kEdgeCaseMention] = 1.0;
  }
};

}  // namespace

TEST_CASE("pgrpo step determinism and metrics") {
  StepFixture f;
  PgrpoConfig cfg;

  TabularPolicy p1 = f.policy, p2 = f.policy;
  Optimizer o1({0.5, false, 0.9, 0.999, 1e-8}), o2({0.5, false, 0.9, 0.999, 1e-8});
  Rng r1(9), r2(9);
  StepMetrics m1 = pgrpo_step(&p1, f.problems, cfg, &f.model, &o1, r1);
  StepMetrics m2 = pgrpo_step(&p2, f.problems, cfg, &f.model, &o2, r2);
  CHECK(p1.logits == p2.logits);
  CHECK(m1.mean_total == m2.mean_total);
  CHECK(m1.n_rollouts == 4 * cfg.group_size);
  CHECK(m1.mean_r_o >= 0.0);
  CHECK(m1.mean_r_o <= 1.0);
  CHECK(m1.zero_adv_fraction >= 0.0);
  CHECK(m1.zero_adv_fraction <= 1.0);
}

TEST_CASE("outcome-only all-success groups carry no gradient") {
  StepFixture f;
  // force the reference path so every rollout is correct
  for (int prev2 = 0; prev2 <= kVocabSize; ++prev2)
    for (int prev1 = 0; prev1 <= kVocabSize; ++prev1) {
      double* row = f.policy.row(prev2, prev1);
      for (int t = 0; t < kVocabSize; ++t) row[t] = -30.0;
      row[kTokProgRobust] = 30.0;
    }
  f.policy.row(kPadToken, kPadToken)[kTokThinkOpen] = 60.0;
  f.policy.row(kPadToken, kTokThinkOpen)[kTokConclude] = 60.0;
  f.policy.row(kTokThinkOpen, kTokConclude)[kTokThinkClose] = 60.0;

  PgrpoConfig cfg;
  cfg.mode = CompositionMode::OutcomeOnly;
  TabularPolicy before = f.policy;
  Optimizer opt({0.5, false, 0.9, 0.999, 1e-8});
  Rng rng(3);
  StepMetrics m = pgrpo_step(&f.policy, f.problems, cfg, nullptr, &opt, rng);
  CHECK(m.mean_r_o == 1.0);
  CHECK(m.zero_adv_fraction == 1.0);
  CHECK(f.policy.logits == before.logits);
}

TEST_CASE("positive advantage raises sequence probability") {
  StepFixture f;
  PgrpoConfig cfg;
  Optimizer opt({0.5, false, 0.9, 0.999, 1e-8});
  Rng rng(11);
  std::vector<GroupBatch> groups;
  TabularPolicy before = f.policy;
  pgrpo_step(&f.policy, f.problems, cfg, &f.model, &opt, rng, &groups);
  REQUIRE_FALSE(groups.empty());
  int checked = 0;
  for (const GroupBatch& g : groups) {
    for (size_t i = 0; i < g.rollouts.size(); ++i) {
      if (g.advantages[i] <= 0.2) continue;
      double lp_before = 0.0, lp_after = 0.0;
      for (double v : policy_logprobs(before, g.rollouts[i].tokens)) lp_before += v;
      for (double v : policy_logprobs(f.policy, g.rollouts[i].tokens)) lp_after += v;
      CHECK(lp_after >= lp_before);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("greedy success rate of canned policies") {
  StepFixture f;
  // initial template policy prefers the sign-dropping program
  double init = greedy_success_rate(make_initial_policy(), f.problems);
  CHECK(init < 1.0);
}
