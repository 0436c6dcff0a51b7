#include <cmath>
#include <set>

#include "doctest.h"
#include "pgrpo/bench.hpp"
#include "pgrpo/env.hpp"

using namespace pgrpo;

namespace {

Problem max_problem() {
  Problem p;
  p.id = "p0000";
  p.prompt = "Compute MAX(a, b) for two integers a and b.";
  p.arity = 2;
  p.test_cases = {{{4, 7}, 7}, {{-3, 2}, 2}};
  return p;
}

CandidateSolution candidate(const std::string& reasoning, const std::string& answer) {
  CandidateSolution c;
  c.problem_id = "p0000";
  c.reasoning = reasoning;
  c.answer_text = answer;
  return c;
}

}  // namespace

TEST_CASE("rule-based validator verdicts") {
  Problem p = max_problem();
  RuleBasedValidator v;

  CandidateSolution sound =
      candidate("Step 1: plan MAX of both inputs. Step 2: Conclusion: done.",
                "ARG 0 ARG 1 MAX");
  ValidationVerdict sv = validate_candidate(p, &sound, v);
  CHECK(sv.reasoning_flawed == FlawVerdict::No);
  CHECK(sv.consistent);
  REQUIRE(sound.validation.has_value());
  CHECK(sound.validation->consistent);

  CandidateSolution mismatch =
      candidate("Step 1: plan MAX of both inputs. Step 2: Conclusion: done.",
                "ARG 0 ARG 1 ADD");
  ValidationVerdict mv = v.validate(p, mismatch);
  CHECK(mv.reasoning_flawed == FlawVerdict::None);
  CHECK_FALSE(mv.consistent);

  CandidateSolution corrupted =
      candidate("Step 1: plan MAX; note MAX(2, 3) = 9. Step 2: Conclusion: done.",
                "ARG 0 ARG 1 MAX");
  ValidationVerdict cv = v.validate(p, corrupted);
  CHECK(cv.reasoning_flawed == FlawVerdict::Yes);
  CHECK(cv.consistent);

  // a consistent plan that never concludes is flawed
  CandidateSolution open = candidate("Step 1: plan MAX of both inputs.",
                                     "ARG 0 ARG 1 MAX");
  CHECK(v.validate(p, open).reasoning_flawed == FlawVerdict::Yes);
}

TEST_CASE("benchmark pairing rules") {
  Problem p = max_problem();
  ProblemMap map = problem_map({p});

  auto make = [&](const std::string& reasoning, bool correct, FlawVerdict flaw) {
    CandidateSolution c = candidate(reasoning, correct ? "ARG 0 ARG 1 MAX" : "ARG 0");
    c.outcome = evaluate_outcome(c.answer_text, p);
    c.validation = ValidationVerdict{flaw, true, ""};
    return c;
  };

  std::vector<CandidateSolution> cands;
  for (int i = 0; i < 3; ++i)
    cands.push_back(make("Step 1: good v" + std::to_string(i), true, FlawVerdict::No));
  for (int i = 0; i < 2; ++i)
    cands.push_back(make("Step 1: bad v" + std::to_string(i), false, FlawVerdict::Yes));

  std::vector<PreferencePair> pairs = build_benchmark(cands, map, 3);
  REQUIRE(pairs.size() == 2);
  std::set<std::string> rejected;
  for (const PreferencePair& pp : pairs) {
    CHECK(pp.problem_id == "p0000");
    CHECK(pp.pair_type == PairType::Bench);
    CHECK(pp.chosen.find("good") != std::string::npos);
    CHECK(pp.rejected.find("bad") != std::string::npos);
    rejected.insert(pp.rejected);
  }
  CHECK(rejected.size() == 2);  // one pair per rejected candidate

  // deterministic in the seed
  CHECK(build_benchmark(cands, map, 3) == pairs);

  // a chosen-only pool yields nothing
  std::vector<CandidateSolution> chosen_only(cands.begin(), cands.begin() + 3);
  CHECK(build_benchmark(chosen_only, map, 3).empty());

  // mixed-quality candidates (correct but flawed, incorrect but sound) join no pool
  std::vector<CandidateSolution> mixed{make("Step 1: odd", true, FlawVerdict::Yes),
                                       make("Step 1: odd2", false, FlawVerdict::No)};
  CHECK(build_benchmark(mixed, map, 3).empty());
}

TEST_CASE("contingency table from candidates") {
  Problem p = max_problem();
  auto make = [&](bool correct, FlawVerdict flaw, bool consistent) {
    CandidateSolution c = candidate("r", correct ? "ARG 0 ARG 1 MAX" : "ARG 0");
    c.outcome = evaluate_outcome(c.answer_text, p);
    c.validation = ValidationVerdict{flaw, consistent, ""};
    return c;
  };
  std::vector<CandidateSolution> cands{
      make(true, FlawVerdict::No, true),   make(true, FlawVerdict::No, true),
      make(false, FlawVerdict::No, true),  make(true, FlawVerdict::Yes, true),
      make(false, FlawVerdict::Yes, true), make(false, FlawVerdict::Yes, true),
      make(true, FlawVerdict::None, false),  // inconsistent: not counted
  };
  ContingencyTable2x2 t = contingency_from_candidates(cands);
  CHECK(t.a == 2);
  CHECK(t.b == 1);
  CHECK(t.c == 1);
  CHECK(t.d == 2);
}

TEST_CASE("chi-square statistic") {
  ChiSquareResult uniform = chi_square({10, 10, 10, 10});
  CHECK(uniform.statistic == 0.0);
  CHECK(uniform.p_value == 1.0);

  // frozen against an independent statistical-library computation
  ChiSquareResult r = chi_square({20, 5, 5, 20});
  CHECK(r.statistic == doctest::Approx(18.0).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(2.2090496998585475e-05).epsilon(1e-9));

  CHECK_THROWS_AS(chi_square({0, 0, 1, 1}), DegenerateTable);
  CHECK_THROWS_AS(chi_square({-1, 2, 3, 4}), DegenerateTable);
}

TEST_CASE("stronger association raises the statistic") {
  double weak = chi_square({15, 10, 10, 15}).statistic;
  double strong = chi_square({24, 1, 1, 24}).statistic;
  CHECK(strong > weak);
  CHECK(chi_square({24, 1, 1, 24}).p_value < chi_square({15, 10, 10, 15}).p_value);
}
