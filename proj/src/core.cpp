#include "pgrpo/core.hpp"

#include <functional>
#include <sstream>

#include "json.hpp"

namespace pgrpo {

using nlohmann::json;

Rng Rng::derive(const std::string& tag) const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return derive(h);
}

std::string to_string(PairType t) {
  switch (t) {
    case PairType::OptVsDeg: return "opt_vs_deg";
    case PairType::OriVsDeg: return "ori_vs_deg";
    case PairType::OptVsOri: return "opt_vs_ori";
    case PairType::Bench: return "bench";
  }
  throw std::logic_error("unreachable pair type");
}

PairType pair_type_from_string(const std::string& s) {
  if (s == "opt_vs_deg") return PairType::OptVsDeg;
  if (s == "ori_vs_deg") return PairType::OriVsDeg;
  if (s == "opt_vs_ori") return PairType::OptVsOri;
  if (s == "bench") return PairType::Bench;
  throw std::invalid_argument("unknown pair type: " + s);
}

void validate(const Problem& p) {
  if (p.id.empty()) throw std::invalid_argument("Problem: empty id");
  if (p.test_cases.empty()) throw std::invalid_argument("Problem: no test cases");
  if (p.arity < 0) throw std::invalid_argument("Problem: negative arity");
  for (const auto& tc : p.test_cases) {
    if (static_cast<int>(tc.inputs.size()) != p.arity)
      throw std::invalid_argument("Problem: test case input count != arity");
  }
}

void validate(const Rollout& r) {
  if (r.old_logprobs.size() != r.tokens.size())
    throw std::invalid_argument("Rollout: old_logprobs length != tokens length");
  for (double lp : r.old_logprobs) {
    if (!(lp <= 0.0))
      throw std::invalid_argument("Rollout: log-probability > 0");
  }
}

void validate(const PreferencePair& p) {
  if (p.chosen == p.rejected)
    throw std::invalid_argument("PreferencePair: chosen == rejected");
}

namespace {

constexpr int kSchemaVersion = 1;

json to_json(const TestCase& tc) {
  return json{{"inputs", tc.inputs}, {"expected", tc.expected}};
}

json to_json(const Problem& p) {
  json tcs = json::array();
  for (const auto& tc : p.test_cases) tcs.push_back(to_json(tc));
  return json{{"t", "problem"}, {"v", kSchemaVersion}, {"id", p.id},
              {"prompt", p.prompt}, {"test_cases", tcs}, {"arity", p.arity}};
}

json to_json(const Rollout& r) {
  json j{{"t", "rollout"}, {"v", kSchemaVersion}, {"problem_id", r.problem_id},
         {"tokens", r.tokens}, {"old_logprobs", r.old_logprobs},
         {"raw_text", r.raw_text}};
  if (r.parsed) {
    j["parsed"] = json{{"think_text", r.parsed->think_text},
                       {"answer_text", r.parsed->answer_text},
                       {"format_ok", r.parsed->format_ok}};
  }
  if (r.rewards) {
    const auto& w = *r.rewards;
    j["rewards"] = json{{"r_format", w.r_format}, {"r_outcome", w.r_outcome},
                        {"pass_rate", w.pass_rate}, {"r_think_raw", w.r_think_raw},
                        {"r_think_gated", w.r_think_gated}, {"r_total", w.r_total}};
  }
  return j;
}

json to_json(const PreferencePair& p) {
  return json{{"t", "pair"}, {"v", kSchemaVersion}, {"problem_id", p.problem_id},
              {"chosen", p.chosen}, {"rejected", p.rejected},
              {"pair_type", to_string(p.pair_type)},
              {"source", json{{"seed", p.source.seed}, {"methods", p.source.methods}}}};
}

Problem problem_from_json(const json& j) {
  Problem p;
  p.id = j.at("id").get<std::string>();
  p.prompt = j.at("prompt").get<std::string>();
  p.arity = j.at("arity").get<int>();
  for (const auto& t : j.at("test_cases")) {
    TestCase tc;
    tc.inputs = t.at("inputs").get<std::vector<int64_t>>();
    tc.expected = t.at("expected").get<int64_t>();
    p.test_cases.push_back(std::move(tc));
  }
  return p;
}

Rollout rollout_from_json(const json& j) {
  Rollout r;
  r.problem_id = j.at("problem_id").get<std::string>();
  r.tokens = j.at("tokens").get<std::vector<int>>();
  r.old_logprobs = j.at("old_logprobs").get<std::vector<double>>();
  r.raw_text = j.at("raw_text").get<std::string>();
  if (j.contains("parsed")) {
    ParsedResponse pr;
    pr.think_text = j["parsed"].at("think_text").get<std::string>();
    pr.answer_text = j["parsed"].at("answer_text").get<std::string>();
    pr.format_ok = j["parsed"].at("format_ok").get<bool>();
    r.parsed = pr;
  }
  if (j.contains("rewards")) {
    RewardBreakdown w;
    const auto& jw = j["rewards"];
    w.r_format = jw.at("r_format").get<double>();
    w.r_outcome = jw.at("r_outcome").get<double>();
    w.pass_rate = jw.at("pass_rate").get<double>();
    w.r_think_raw = jw.at("r_think_raw").get<double>();
    w.r_think_gated = jw.at("r_think_gated").get<double>();
    w.r_total = jw.at("r_total").get<double>();
    r.rewards = w;
  }
  return r;
}

PreferencePair pair_from_json(const json& j) {
  PreferencePair p;
  p.problem_id = j.at("problem_id").get<std::string>();
  p.chosen = j.at("chosen").get<std::string>();
  p.rejected = j.at("rejected").get<std::string>();
  p.pair_type = pair_type_from_string(j.at("pair_type").get<std::string>());
  p.source.seed = j.at("source").at("seed").get<uint64_t>();
  p.source.methods = j.at("source").at("methods").get<std::vector<std::string>>();
  return p;
}

template <typename T>
std::string serialize_all(const std::vector<T>& items) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    try {
      validate(items[i]);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("item " + std::to_string(i) + ": " + e.what());
    }
    out += to_json(items[i]).dump();
    out += '\n';
  }
  return out;
}

template <typename T>
std::vector<T> deserialize_all(const std::string& stream, const char* tag,
                               T (*from)(const json&)) {
  std::vector<T> out;
  std::istringstream in(stream);
  std::string line;
  size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (j.at("t").get<std::string>() != tag)
      throw std::invalid_argument("line " + std::to_string(n) + ": expected record type '" +
                                  tag + "', got '" + j.at("t").get<std::string>() + "'");
    out.push_back(from(j));
    ++n;
  }
  return out;
}

}  // namespace

std::string serialize_record(const Problem& p) { return to_json(p).dump(); }
std::string serialize_record(const Rollout& r) { return to_json(r).dump(); }
std::string serialize_record(const PreferencePair& p) { return to_json(p).dump(); }

std::string serialize_corpus(const std::vector<Problem>& items) { return serialize_all(items); }
std::string serialize_corpus(const std::vector<Rollout>& items) { return serialize_all(items); }
std::string serialize_corpus(const std::vector<PreferencePair>& items) { return serialize_all(items); }

std::vector<Problem> deserialize_problems(const std::string& stream) {
  return deserialize_all<Problem>(stream, "problem", &problem_from_json);
}
std::vector<Rollout> deserialize_rollouts(const std::string& stream) {
  return deserialize_all<Rollout>(stream, "rollout", &rollout_from_json);
}
std::vector<PreferencePair> deserialize_pairs(const std::string& stream) {
  return deserialize_all<PreferencePair>(stream, "pair", &pair_from_json);
}

}  // namespace pgrpo
