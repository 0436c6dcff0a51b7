#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgrpo {

// Deterministic RNG used everywhere. Wraps mt19937_64 but owns the
// int/real derivation so streams do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), state_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return mix(state_ += 0x9e3779b97f4a7c15ULL); }

  // uniform in [0, n)
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n == 0");
    return next_u64() % n;
  }

  // uniform in [lo, hi] inclusive
  int64_t uniform_range(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(uniform_int(static_cast<uint64_t>(hi - lo + 1)));
  }

  // uniform in [0, 1)
  double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // independent child stream; tag disambiguates siblings
  Rng derive(uint64_t tag) const { return Rng(mix(seed_ ^ mix(tag))); }
  Rng derive(const std::string& tag) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_int(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  uint64_t seed_;
  uint64_t state_;
};

struct TestCase {
  std::vector<int64_t> inputs;
  int64_t expected = 0;

  bool operator==(const TestCase&) const = default;
};

struct Problem {
  std::string id;
  std::string prompt;
  std::vector<TestCase> test_cases;
  int arity = 0;

  bool operator==(const Problem&) const = default;
};

struct ParsedResponse {
  std::string think_text;
  std::string answer_text;
  bool format_ok = false;

  bool operator==(const ParsedResponse&) const = default;
};

struct RewardBreakdown {
  double r_format = 0.0;       // {0,1}
  double r_outcome = 0.0;      // {0,1}
  double pass_rate = 0.0;      // [0,1]
  double r_think_raw = 0.0;    // [0,1]
  double r_think_gated = 0.0;  // [0,1]
  double r_total = 0.0;        // [0,3]

  bool operator==(const RewardBreakdown&) const = default;
};

struct Rollout {
  std::string problem_id;
  std::vector<int> tokens;
  std::vector<double> old_logprobs;  // natural log, one per token, each <= 0
  std::string raw_text;
  std::optional<ParsedResponse> parsed;
  std::optional<RewardBreakdown> rewards;

  bool operator==(const Rollout&) const = default;
};

enum class PairType { OptVsDeg, OriVsDeg, OptVsOri, Bench };

std::string to_string(PairType t);
PairType pair_type_from_string(const std::string& s);

struct PairSource {
  uint64_t seed = 0;
  std::vector<std::string> methods;  // applied transformation names

  bool operator==(const PairSource&) const = default;
};

struct PreferencePair {
  std::string problem_id;
  std::string chosen;
  std::string rejected;
  PairType pair_type = PairType::Bench;
  PairSource source;

  bool operator==(const PreferencePair&) const = default;
};

// --- line-delimited record serialization -------------------------------

void validate(const Problem& p);
void validate(const Rollout& r);
void validate(const PreferencePair& p);

std::string serialize_record(const Problem& p);
std::string serialize_record(const Rollout& r);
std::string serialize_record(const PreferencePair& p);

// one record per line; throws std::invalid_argument naming the item index
// when an invariant is violated
std::string serialize_corpus(const std::vector<Problem>& items);
std::string serialize_corpus(const std::vector<Rollout>& items);
std::string serialize_corpus(const std::vector<PreferencePair>& items);

std::vector<Problem> deserialize_problems(const std::string& stream);
std::vector<Rollout> deserialize_rollouts(const std::string& stream);
std::vector<PreferencePair> deserialize_pairs(const std::string& stream);

}  // namespace pgrpo
