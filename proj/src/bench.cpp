#include "pgrpo/bench.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace pgrpo {

std::string to_string(FlawVerdict v) {
  switch (v) {
    case FlawVerdict::Yes: return "yes";
    case FlawVerdict::No: return "no";
    case FlawVerdict::None: return "none";
  }
  throw std::logic_error("unreachable verdict");
}

ValidationVerdict RuleBasedValidator::validate(const Problem& problem,
                                               const CandidateSolution& candidate) const {
  ValidationVerdict out;

  // operator the program actually applies last
  std::optional<std::string> code_op;
  ParseProgramResult prog = parse_program(candidate.answer_text, problem.arity);
  if (prog.ok()) {
    for (auto it = prog.program.ops.rbegin(); it != prog.program.ops.rend(); ++it) {
      if (it->code != OpCode::Push && it->code != OpCode::Arg && it->code != OpCode::Neg &&
          it->code != OpCode::Dup && it->code != OpCode::Swap) {
        code_op = binary_op_name(it->code);
        break;
      }
    }
  }
  std::optional<std::string> plan_op = first_op_name(candidate.reasoning);

  out.consistent = plan_op && code_op && *plan_op == *code_op;
  if (!out.consistent) {
    out.reasoning_flawed = FlawVerdict::None;
    out.rationale = "implementation does not follow the stated plan";
    return out;
  }

  FeatureVector f = extract_features(problem, candidate.reasoning);
  bool flawed = f[kFactViolationCount] > 0 || f[kConclusionPresent] == 0;
  out.reasoning_flawed = flawed ? FlawVerdict::Yes : FlawVerdict::No;
  out.rationale = flawed ? "reasoning states a false fact or never concludes"
                         : "reasoning is sound and the code follows it";
  return out;
}

namespace {

const char* kValidationPromptTemplate =
    "You review a programming solution. Decide two things: (1) is the plan in the\n"
    "reasoning sound, and (2) does the program follow that plan.\n"
    "Answer on the first line with exactly one word:\n"
    "  Yes  - the reasoning is flawed and the program follows it anyway\n"
    "  No   - the reasoning is sound and the program follows it\n"
    "  None - the program does not follow the reasoning\n"
    "Explain on the second line.\n\n"
    "[Problem]\n{problem}\n\n[Reasoning]\n{reasoning}\n\n[Program]\n{program}\n";

std::string fill_template(std::string tpl, const std::string& key, const std::string& value) {
  for (size_t p = tpl.find(key); p != std::string::npos; p = tpl.find(key))
    tpl.replace(p, key.size(), value);
  return tpl;
}

}  // namespace

RemoteValidator::RemoteValidator(std::string host, int port, std::string model_id,
                                 double temperature)
    : host_(std::move(host)), port_(port), model_id_(std::move(model_id)),
      temperature_(temperature) {}

ValidationVerdict RemoteValidator::validate(const Problem& problem,
                                            const CandidateSolution& candidate) const {
  std::string prompt = kValidationPromptTemplate;
  prompt = fill_template(prompt, "{problem}", problem.prompt);
  prompt = fill_template(prompt, "{reasoning}", candidate.reasoning);
  prompt = fill_template(prompt, "{program}", candidate.answer_text);

  nlohmann::json request{{"model", model_id_}, {"prompt", prompt},
                         {"temperature", temperature_}};

  httplib::Client client(host_, port_);
  std::string body;
  bool got = false;
  for (int attempt = 0; attempt < 3 && !got; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(100 << attempt));
    auto res = client.Post("/v1/generate", request.dump(), "application/json");
    if (res && res->status == 200) {
      body = res->body;
      got = true;
    }
  }
  if (!got) throw ValidatorUnavailable("validator gateway unreachable: " + host_);

  std::string text = nlohmann::json::parse(body).at("text").get<std::string>();
  std::string first = text.substr(0, text.find('\n'));
  ValidationVerdict out;
  out.rationale = text;
  if (first.find("Yes") != std::string::npos) {
    out.reasoning_flawed = FlawVerdict::Yes;
    out.consistent = true;
  } else if (first.find("No") != std::string::npos && first.find("None") == std::string::npos) {
    out.reasoning_flawed = FlawVerdict::No;
    out.consistent = true;
  } else {
    out.reasoning_flawed = FlawVerdict::None;
    out.consistent = false;
  }
  return out;
}

ValidationVerdict validate_candidate(const Problem& problem, CandidateSolution* candidate,
                                     const ConsistencyValidator& validator) {
  ValidationVerdict v = validator.validate(problem, *candidate);
  candidate->validation = v;
  return v;
}

std::vector<PreferencePair> build_benchmark(const std::vector<CandidateSolution>& candidates,
                                            const ProblemMap& problems, uint64_t seed) {
  std::map<std::string, std::pair<std::vector<const CandidateSolution*>,
                                  std::vector<const CandidateSolution*>>>
      pools;  // problem_id -> (chosen, rejected)
  for (const CandidateSolution& c : candidates) {
    if (!c.validation || !c.validation->consistent) continue;
    auto& [chosen, rejected] = pools[c.problem_id];
    if (c.outcome.r_outcome == 1.0 && c.validation->reasoning_flawed == FlawVerdict::No)
      chosen.push_back(&c);
    else if (c.outcome.r_outcome == 0.0 && c.validation->reasoning_flawed == FlawVerdict::Yes)
      rejected.push_back(&c);
  }

  std::vector<PreferencePair> out;
  for (const auto& [problem_id, pool] : pools) {
    const auto& [chosen, rejected] = pool;
    if (chosen.empty() || rejected.empty()) continue;
    if (problems.find(problem_id) == problems.end()) continue;

    Rng rng = Rng(seed).derive(problem_id).derive("bench");
    std::vector<const CandidateSolution*> deck = chosen;
    rng.shuffle(deck);
    size_t next = 0;
    for (const CandidateSolution* rej : rejected) {
      const CandidateSolution* pick;
      if (next < deck.size())
        pick = deck[next++];  // without replacement while the pool lasts
      else
        pick = chosen[rng.uniform_int(chosen.size())];
      if (pick->reasoning == rej->reasoning) continue;
      out.push_back({problem_id, pick->reasoning, rej->reasoning, PairType::Bench,
                     {seed, {}}});
    }
  }
  return out;
}

ChiSquareResult chi_square(const ContingencyTable2x2& table) {
  const double a = static_cast<double>(table.a), b = static_cast<double>(table.b);
  const double c = static_cast<double>(table.c), d = static_cast<double>(table.d);
  if (table.a < 0 || table.b < 0 || table.c < 0 || table.d < 0)
    throw DegenerateTable("negative cell count");
  const double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
  if (r1 <= 0 || r2 <= 0 || c1 <= 0 || c2 <= 0)
    throw DegenerateTable("zero marginal; test undefined");
  const double n = r1 + r2;

  double stat = 0.0;
  const double obs[2][2] = {{a, b}, {c, d}};
  const double rows[2] = {r1, r2}, cols[2] = {c1, c2};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      double expected = rows[i] * cols[j] / n;
      double diff = obs[i][j] - expected;
      stat += diff * diff / expected;
    }
  }
  // upper tail of chi-square with 1 dof
  double p = std::erfc(std::sqrt(stat / 2.0));
  return {stat, p};
}

ContingencyTable2x2 contingency_from_candidates(const std::vector<CandidateSolution>& candidates) {
  ContingencyTable2x2 t;
  for (const CandidateSolution& c : candidates) {
    if (!c.validation || !c.validation->consistent) continue;
    bool correct = c.outcome.r_outcome == 1.0;
    if (c.validation->reasoning_flawed == FlawVerdict::No)
      correct ? ++t.a : ++t.b;
    else if (c.validation->reasoning_flawed == FlawVerdict::Yes)
      correct ? ++t.c : ++t.d;
  }
  return t;
}

}  // namespace pgrpo
