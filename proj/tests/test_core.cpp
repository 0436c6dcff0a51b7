#include <set>

#include "doctest.h"
#include "pgrpo/core.hpp"

using namespace pgrpo;

TEST_CASE("rng determinism and stream independence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng parent(7);
  Rng c1 = parent.derive(1), c2 = parent.derive(2);
  CHECK(c1.next_u64() != c2.next_u64());
  // string tags are stable and distinct from integer tags
  CHECK(parent.derive("step").seed() == parent.derive("step").seed());
  CHECK(parent.derive("step").seed() != parent.derive("eval").seed());
}

TEST_CASE("rng uniform ranges") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    CHECK(rng.uniform_int(10) < 10);
    int64_t v = rng.uniform_range(-9, 9);
    CHECK(v >= -9);
    CHECK(v <= 9);
    double r = rng.uniform_real();
    CHECK(r >= 0.0);
    CHECK(r < 1.0);
  }
  CHECK_THROWS_AS(rng.uniform_int(0), std::invalid_argument);
}

TEST_CASE("rng shuffle is a permutation") {
  Rng rng(5);
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  rng.shuffle(v);
  CHECK(std::set<int>(v.begin(), v.end()).size() == 8);
}

static Problem sample_problem() {
  Problem p;
  p.id = "p0000";
  p.prompt = "compute max(a, b)";
  p.arity = 2;
  p.test_cases = {{{4, 7}, 7}, {{-3, 2}, 2}};
  return p;
}

TEST_CASE("serialization round-trips") {
  Problem p = sample_problem();
  CHECK(deserialize_problems(serialize_record(p) + "\n") ==
        std::vector<Problem>{p});

  Rollout r;
  r.problem_id = "p0000";
  r.tokens = {0, 3, 1};
  r.old_logprobs = {-0.1, -0.2, -0.3};
  r.raw_text = "<think>Step 1: plan.</think><answer>ARG 0 ARG 1 MAX</answer>";
  r.parsed = ParsedResponse{"Step 1: plan.", "ARG 0 ARG 1 MAX", true};
  r.rewards = RewardBreakdown{1, 1, 1, 0.5, 0.5, 2.5};
  CHECK(deserialize_rollouts(serialize_record(r) + "\n") ==
        std::vector<Rollout>{r});

  PreferencePair pair;
  pair.problem_id = "p0000";
  pair.chosen = "Step 1: good.";
  pair.rejected = "Step 1: bad.";
  pair.pair_type = PairType::OptVsDeg;
  pair.source = PairSource{9, {"DegradeChaotic"}};
  CHECK(deserialize_pairs(serialize_record(pair) + "\n") ==
        std::vector<PreferencePair>{pair});
}

TEST_CASE("empty list serializes to empty stream") {
  CHECK(serialize_corpus(std::vector<Problem>{}).empty());
  CHECK(deserialize_problems("").empty());
}

TEST_CASE("invariant violations are rejected with the item index") {
  Rollout bad;
  bad.problem_id = "p0000";
  bad.tokens = {0, 1};
  bad.old_logprobs = {-0.1};  // length mismatch
  try {
    serialize_corpus(std::vector<Rollout>{bad});
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("0") != std::string::npos);
  }
}

TEST_CASE("pair type names round-trip") {
  for (PairType t : {PairType::OptVsDeg, PairType::OriVsDeg, PairType::OptVsOri,
                     PairType::Bench})
    CHECK(pair_type_from_string(to_string(t)) == t);
}
