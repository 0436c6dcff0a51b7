#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pgrpo/core.hpp"
#include "pgrpo/exec.hpp"
#include "pgrpo/thinkrm.hpp"

namespace pgrpo {

enum class FlawVerdict { Yes, No, None };

std::string to_string(FlawVerdict v);

struct ValidationVerdict {
  FlawVerdict reasoning_flawed = FlawVerdict::None;
  bool consistent = false;  // verdict None <=> consistent == false
  std::string rationale;
};

struct CandidateSolution {
  std::string problem_id;
  std::string reasoning;
  std::string answer_text;
  OutcomeResult outcome;
  std::optional<ValidationVerdict> validation;
};

class ValidatorUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConsistencyValidator {
 public:
  virtual ~ConsistencyValidator() = default;
  virtual ValidationVerdict validate(const Problem& problem,
                                     const CandidateSolution& candidate) const = 0;
};

// Deterministic default: consistent iff the first operator named in the
// reasoning equals the operator the program actually applies last; flawed
// iff the reasoning states a false fact or lacks a conclusion.
class RuleBasedValidator final : public ConsistencyValidator {
 public:
  ValidationVerdict validate(const Problem& problem,
                             const CandidateSolution& candidate) const override;
};

// Remote LLM judge speaking the first-line Yes/No/None protocol; retries
// with exponential backoff, surfaces failures as ValidatorUnavailable.
class RemoteValidator final : public ConsistencyValidator {
 public:
  RemoteValidator(std::string host, int port, std::string model_id,
                  double temperature = 0.0);
  ValidationVerdict validate(const Problem& problem,
                             const CandidateSolution& candidate) const override;

 private:
  std::string host_;
  int port_;
  std::string model_id_;
  double temperature_;
};

ValidationVerdict validate_candidate(const Problem& problem, CandidateSolution* candidate,
                                     const ConsistencyValidator& validator);

// Keep consistent candidates only; chosen pool = correct code with sound
// reasoning, rejected pool = incorrect code with flawed reasoning; one
// chosen sampled per rejected (without replacement while the pool lasts).
std::vector<PreferencePair> build_benchmark(const std::vector<CandidateSolution>& candidates,
                                            const ProblemMap& problems, uint64_t seed);

struct ContingencyTable2x2 {
  // rows: reasoning sound / flawed; columns: code correct / incorrect
  int64_t a = 0;  // sound, correct
  int64_t b = 0;  // sound, incorrect
  int64_t c = 0;  // flawed, correct
  int64_t d = 0;  // flawed, incorrect
};

class DegenerateTable : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Pearson chi-square with 1 degree of freedom, no continuity correction
ChiSquareResult chi_square(const ContingencyTable2x2& table);

ContingencyTable2x2 contingency_from_candidates(const std::vector<CandidateSolution>& candidates);

}  // namespace pgrpo
