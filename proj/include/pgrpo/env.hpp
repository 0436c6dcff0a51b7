#pragma once

#include <string>
#include <vector>

#include "pgrpo/core.hpp"
#include "pgrpo/exec.hpp"
#include "pgrpo/thinkrm.hpp"

namespace pgrpo {

// --- token vocabulary ---------------------------------------------------

// The policy's token ids. Content tokens render as "Step k: ..." sentences
// inside the think block; program tokens render as a whole answer block and
// terminate the sequence.
enum Token : int {
  kTokThinkOpen = 0,
  kTokThinkClose,
  kTokRestate,
  kTokPlan,
  kTokEdge,
  kTokNote,
  kTokBuzz,  // renders the reserved hack token
  kTokConclude,
  kTokSayAdd,
  kTokSaySub,
  kTokSayMul,
  kTokSayMax,
  kTokSayMin,
  kTokProgRobust,
  kTokProgNaive,
  kTokProgBad,
  kTokEnd,
  kVocabSize,  // = 17
};

constexpr int kPadToken = kVocabSize;  // context placeholder, never emitted
constexpr int kHorizon = 24;
inline const char* kHackToken = "BUZZWORD";

bool is_think_content(int token);
bool is_program_token(int token);

struct ToyCorpusConfig {
  int n_problems = 50;
  std::vector<OpCode> operators = {OpCode::Max};
  int arity = 2;
  int tests_per_problem = 4;  // includes one negative-operand case
};

// reference program for a problem: "ARG 0 ARG 1 OP"
std::string reference_program(const Problem& problem);
// plausible-but-sloppy variant that drops operand signs; passes exactly the
// non-negative test cases
std::string naive_program(const Problem& problem);

std::vector<Problem> generate_corpus(const ToyCorpusConfig& cfg, uint64_t seed);

// --- tabular policy -----------------------------------------------------

// Autoregressive policy conditioned on the previous two tokens.
struct TabularPolicy {
  // row-major: [(prev2 * (kVocabSize+1) + prev1) * kVocabSize + token]
  std::vector<double> logits;

  TabularPolicy() : logits(table_size(), 0.0) {}

  static size_t table_size() {
    return static_cast<size_t>(kVocabSize + 1) * (kVocabSize + 1) * kVocabSize;
  }
  static size_t row_index(int prev2, int prev1) {
    return (static_cast<size_t>(prev2) * (kVocabSize + 1) + static_cast<size_t>(prev1)) *
           kVocabSize;
  }
  double* row(int prev2, int prev1) { return logits.data() + row_index(prev2, prev1); }
  const double* row(int prev2, int prev1) const {
    return logits.data() + row_index(prev2, prev1);
  }
};

// template-biased starting point: formats mostly correctly, prefers the
// naive program
TabularPolicy make_initial_policy();

class UnknownToken : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string detokenize(const Problem& problem, const std::vector<int>& tokens);

Rollout sample_rollout(const TabularPolicy& policy, const Problem& problem, Rng& rng,
                       double temperature = 1.0);
Rollout greedy_rollout(const TabularPolicy& policy, const Problem& problem);

// per-token log-probabilities of an existing sequence under the current policy
std::vector<double> policy_logprobs(const TabularPolicy& policy,
                                    const std::vector<int>& tokens);

// accumulates d(sum_t coeffs[t] * logprob_t)/d logits into grad
// (grad has TabularPolicy::table_size() entries)
void add_logprob_gradient(const TabularPolicy& policy, const std::vector<int>& tokens,
                          const std::vector<double>& coeffs, std::vector<double>* grad);

// model whose pre-sigmoid score gains `bonus` per hack-token occurrence
ThinkRewardModel plant_hack(const ThinkRewardModel& model, double bonus);

std::string serialize_policy(const TabularPolicy& policy);
TabularPolicy deserialize_policy(const std::string& text);

}  // namespace pgrpo
