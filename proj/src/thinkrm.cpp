#include "pgrpo/thinkrm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pgrpo/exec.hpp"

namespace pgrpo {

using nlohmann::json;

const std::array<const char*, kNumFeatures> kFeatureNames = {
    "step_count",        "step_order_consistency", "edge_case_mention",
    "redundancy_score",  "dangling_reference",     "fact_violation_count",
    "conclusion_present", "gap_count",             "length_bucket",
    "irrelevant_step_fraction", "plan_matches_problem", "bias"};

// --- reasoning document -------------------------------------------------

namespace {

const std::regex kStepMarker(R"(Step\s+(\d+)\s*:)");
const std::regex kStepMention(R"(Step\s+(\d+))");
const std::regex kFactPattern(R"((ADD|SUB|MUL|MAX|MIN)\((-?\d+),\s*(-?\d+)\)\s*=\s*(-?\d+))");
const std::regex kOpWord(R"(\b(ADD|SUB|MUL|MAX|MIN)\b)");

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// words that tie a step to the task; a step containing none of them is
// treated as off-topic
bool step_on_topic(const std::string& body) {
  std::string b = lower(body);
  static const char* kTopical[] = {"arg",     "input",   "task",    "plan",
                                   "compute", "operation", "conclusion", "result",
                                   "program", "negative", "integer", "goal",
                                   "add", "sub", "mul", "max", "min", "step"};
  for (const char* w : kTopical)
    if (b.find(w) != std::string::npos) return true;
  return false;
}

}  // namespace

ReasoningDoc parse_reasoning(const std::string& text) {
  ReasoningDoc doc;
  std::vector<std::pair<size_t, size_t>> markers;  // (pos, end-of-marker)
  std::vector<int> numbers;
  auto begin = std::sregex_iterator(text.begin(), text.end(), kStepMarker);
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    markers.emplace_back(static_cast<size_t>(it->position()),
                         static_cast<size_t>(it->position() + it->length()));
    numbers.push_back(std::stoi((*it)[1].str()));
  }
  if (markers.empty()) {
    doc.preamble = trim(text);
    return doc;
  }
  doc.preamble = trim(text.substr(0, markers[0].first));
  for (size_t i = 0; i < markers.size(); ++i) {
    size_t body_begin = markers[i].second;
    size_t body_end = (i + 1 < markers.size()) ? markers[i + 1].first : text.size();
    doc.steps.push_back({numbers[i], trim(text.substr(body_begin, body_end - body_begin))});
  }
  return doc;
}

std::string ReasoningDoc::render() const {
  std::string out = preamble;
  for (const auto& s : steps) {
    if (!out.empty()) out += ' ';
    out += "Step " + std::to_string(s.number) + ": " + s.body;
  }
  return out;
}

std::optional<std::string> first_op_name(const std::string& text) {
  std::smatch m;
  if (std::regex_search(text, m, kOpWord)) return m[1].str();
  return std::nullopt;
}

FeatureVector extract_features(const Problem& problem, const std::string& reasoning) {
  FeatureVector f;
  ReasoningDoc doc = parse_reasoning(reasoning);
  const size_t n = doc.steps.size();

  f[kStepCount] = static_cast<double>(n);

  // adjacent inversion fraction over the step-number sequence
  if (n >= 2) {
    int inversions = 0;
    for (size_t i = 0; i + 1 < n; ++i)
      if (doc.steps[i].number > doc.steps[i + 1].number) ++inversions;
    f[kStepOrderConsistency] = 1.0 - static_cast<double>(inversions) / static_cast<double>(n - 1);
  } else {
    f[kStepOrderConsistency] = 1.0;
  }

  f[kEdgeCaseMention] = lower(reasoning).find("negative") != std::string::npos ? 1.0 : 0.0;

  // repeated word-3-gram fraction
  std::vector<std::string> words = words_of(reasoning);
  if (words.size() >= 3) {
    size_t total = words.size() - 2;
    std::set<std::string> distinct;
    for (size_t i = 0; i < total; ++i)
      distinct.insert(words[i] + ' ' + words[i + 1] + ' ' + words[i + 2]);
    f[kRedundancyScore] = static_cast<double>(total - distinct.size()) / static_cast<double>(total);
  }

  // step mentions that do not resolve to a declared step number
  {
    std::set<int> declared;
    for (const auto& s : doc.steps) declared.insert(s.number);
    auto it = std::sregex_iterator(reasoning.begin(), reasoning.end(), kStepMention);
    for (; it != std::sregex_iterator(); ++it) {
      size_t end = static_cast<size_t>(it->position() + it->length());
      while (end < reasoning.size() && reasoning[end] == ' ') ++end;
      bool is_marker = end < reasoning.size() && reasoning[end] == ':';
      if (!is_marker && !declared.count(std::stoi((*it)[1].str()))) {
        f[kDanglingReference] = 1.0;
        break;
      }
    }
  }

  // check every stated "OP(a, b) = c" against the operator semantics
  {
    int violations = 0;
    auto it = std::sregex_iterator(reasoning.begin(), reasoning.end(), kFactPattern);
    for (; it != std::sregex_iterator(); ++it) {
      OpCode op = *binary_op_from_name((*it)[1].str());
      int64_t a = std::stoll((*it)[2].str());
      int64_t b = std::stoll((*it)[3].str());
      int64_t stated = std::stoll((*it)[4].str());
      if (apply_binary_op(op, a, b) != stated) ++violations;
    }
    f[kFactViolationCount] = violations;
  }

  // a conclusion only counts when it actually closes the reasoning
  if (n > 0 && doc.steps.back().body.rfind("Conclusion", 0) == 0)
    f[kConclusionPresent] = 1.0;

  // gaps in the sorted distinct numbering
  {
    std::set<int> declared;
    for (const auto& s : doc.steps) declared.insert(s.number);
    int gaps = 0, prev = -1;
    for (int num : declared) {
      if (prev >= 0 && num - prev >= 2) ++gaps;
      prev = num;
    }
    f[kGapCount] = gaps;
  }

  {
    size_t w = words.size();
    f[kLengthBucket] = w < 20 ? 0.0 : w < 40 ? 1.0 : w < 80 ? 2.0 : 3.0;
  }

  if (n > 0) {
    size_t off_topic = 0;
    for (const auto& s : doc.steps)
      if (!step_on_topic(s.body)) ++off_topic;
    f[kIrrelevantStepFraction] = static_cast<double>(off_topic) / static_cast<double>(n);
  }

  {
    auto plan_op = first_op_name(reasoning);
    auto problem_op = first_op_name(problem.prompt);
    f[kPlanMatchesProblem] = (plan_op && problem_op && *plan_op == *problem_op) ? 1.0 : 0.0;
  }

  f[kBias] = 1.0;
  return f;
}

// --- transformations ----------------------------------------------------

bool is_degrade(TransformMethod m) {
  switch (m) {
    case TransformMethod::DegradeFactualError:
    case TransformMethod::DegradeIrrelevantPath:
    case TransformMethod::DegradeIncomplete:
    case TransformMethod::DegradeLogicalGap:
    case TransformMethod::DegradeChaotic:
      return true;
    default:
      return false;
  }
}

std::string to_string(TransformMethod m) {
  switch (m) {
    case TransformMethod::DegradeFactualError: return "degrade_factual_error";
    case TransformMethod::DegradeIrrelevantPath: return "degrade_irrelevant_path";
    case TransformMethod::DegradeIncomplete: return "degrade_incomplete";
    case TransformMethod::DegradeLogicalGap: return "degrade_logical_gap";
    case TransformMethod::DegradeChaotic: return "degrade_chaotic";
    case TransformMethod::OptimizeFactualCorrection: return "optimize_factual_correction";
    case TransformMethod::OptimizeFocusingLogic: return "optimize_focusing_logic";
    case TransformMethod::OptimizeComprehensiveReasoning: return "optimize_comprehensive_reasoning";
    case TransformMethod::OptimizeBridgingGaps: return "optimize_bridging_gaps";
    case TransformMethod::OptimizeEnhancingFlow: return "optimize_enhancing_flow";
  }
  throw std::logic_error("unreachable transform method");
}

namespace {

const char* kOffTopicPool[] = {
    "The capital of France is Paris.",
    "Bubble charts are a kind of diagram.",
    "Tuesday follows Monday in the week.",
    "A kilometer equals one thousand meters.",
};

// rewrite each "OP(a, b) = c" with corrupt=true forcing c wrong, or
// corrupt=false forcing c right; returns edit count
int rewrite_facts(std::string* text, bool corrupt, Rng* rng) {
  std::string out;
  int edits = 0;
  auto begin = std::sregex_iterator(text->begin(), text->end(), kFactPattern);
  size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    OpCode op = *binary_op_from_name((*it)[1].str());
    int64_t a = std::stoll((*it)[2].str());
    int64_t b = std::stoll((*it)[3].str());
    int64_t stated = std::stoll((*it)[4].str());
    int64_t truth = apply_binary_op(op, a, b);
    int64_t target = stated;
    if (corrupt && stated == truth) {
      target = truth + 1 + static_cast<int64_t>(rng->uniform_int(3));
      ++edits;
    } else if (!corrupt && stated != truth) {
      target = truth;
      ++edits;
    }
    out += text->substr(last, static_cast<size_t>(it->position()) - last);
    out += binary_op_name(op) + "(" + std::to_string(a) + ", " + std::to_string(b) +
           ") = " + std::to_string(target);
    last = static_cast<size_t>(it->position() + it->length());
  }
  out += text->substr(last);
  *text = std::move(out);
  return edits;
}

int max_step_number(const ReasoningDoc& doc) {
  int m = 0;
  for (const auto& s : doc.steps) m = std::max(m, s.number);
  return m;
}

void apply_degrade(ReasoningDoc* doc, TransformMethod m, Rng* rng,
                   std::vector<TransformEdit>* edits) {
  const size_t n = doc->steps.size();
  switch (m) {
    case TransformMethod::DegradeFactualError: {
      std::string text = doc->render();
      if (rewrite_facts(&text, /*corrupt=*/true, rng) == 0) {
        // no stated fact to corrupt: plant a false one in the first step
        if (n == 0) throw InsufficientSteps("factual error needs at least one step");
        int64_t a = rng->uniform_range(2, 9), b = rng->uniform_range(2, 9);
        std::string op = first_op_name(text).value_or("ADD");
        int64_t wrong = apply_binary_op(*binary_op_from_name(op), a, b) + 1 +
                        static_cast<int64_t>(rng->uniform_int(3));
        doc->steps[0].body += " Recall that " + op + "(" + std::to_string(a) + ", " +
                              std::to_string(b) + ") = " + std::to_string(wrong) + ".";
        edits->push_back({m, "planted false fact in step 1"});
      } else {
        *doc = parse_reasoning(text);
        edits->push_back({m, "corrupted a stated fact"});
      }
      break;
    }
    case TransformMethod::DegradeIrrelevantPath: {
      if (n == 0) throw InsufficientSteps("irrelevant path needs at least one step");
      int inserted = 2 + static_cast<int>(rng->uniform_int(2));
      for (int k = 0; k < inserted; ++k) {
        size_t sz = doc->steps.size();
        size_t pos = 1 + rng->uniform_int(sz);  // after some existing step
        int number = max_step_number(*doc) + 1;
        const char* body = kOffTopicPool[rng->uniform_int(std::size(kOffTopicPool))];
        doc->steps.insert(doc->steps.begin() + static_cast<long>(std::min(pos, sz)),
                          {number, body});
      }
      edits->push_back({m, "inserted " + std::to_string(inserted) + " off-topic step(s)"});
      break;
    }
    case TransformMethod::DegradeIncomplete: {
      if (n < 2) throw InsufficientSteps("incomplete needs >= 2 steps");
      edits->push_back({m, "deleted final step " + std::to_string(doc->steps.back().number)});
      doc->steps.pop_back();
      break;
    }
    case TransformMethod::DegradeLogicalGap: {
      if (n < 2) throw InsufficientSteps("logical gap needs >= 2 steps");
      size_t idx = n >= 3 ? 1 + rng->uniform_int(n - 2) : 1;
      edits->push_back({m, "deleted step " + std::to_string(doc->steps[idx].number)});
      doc->steps.erase(doc->steps.begin() + static_cast<long>(idx));
      break;
    }
    case TransformMethod::DegradeChaotic: {
      if (n < 2) throw InsufficientSteps("chaotic needs >= 2 steps");
      auto same = [](const ReasoningStep& a, const ReasoningStep& b) {
        return a.number == b.number && a.body == b.body;
      };
      std::vector<ReasoningStep> shuffled = doc->steps;
      for (int attempt = 0; attempt < 16; ++attempt) {
        shuffled = doc->steps;
        rng->shuffle(shuffled);
        if (!std::equal(shuffled.begin(), shuffled.end(), doc->steps.begin(), same)) break;
      }
      if (std::equal(shuffled.begin(), shuffled.end(), doc->steps.begin(), same))
        std::rotate(shuffled.begin(), shuffled.begin() + 1, shuffled.end());
      doc->steps = std::move(shuffled);
      edits->push_back({m, "permuted step order"});
      break;
    }
    default:
      throw std::invalid_argument("degrade: not a degradation method: " + to_string(m));
  }
}

void apply_optimize(ReasoningDoc* doc, TransformMethod m,
                    std::vector<TransformEdit>* edits) {
  switch (m) {
    case TransformMethod::OptimizeFactualCorrection: {
      std::string text = doc->render();
      Rng unused(0);
      if (rewrite_facts(&text, /*corrupt=*/false, &unused) > 0) {
        *doc = parse_reasoning(text);
        edits->push_back({m, "repaired stated facts"});
      }
      break;
    }
    case TransformMethod::OptimizeFocusingLogic: {
      std::set<std::string> seen;
      std::vector<ReasoningStep> kept;
      int removed = 0;
      for (const auto& s : doc->steps) {
        bool duplicate = !seen.insert(s.body).second;
        if (duplicate || !step_on_topic(s.body)) {
          ++removed;
          continue;
        }
        kept.push_back(s);
      }
      if (removed > 0 && !kept.empty()) {
        doc->steps = std::move(kept);
        edits->push_back({m, "removed " + std::to_string(removed) + " redundant/off-topic step(s)"});
      }
      break;
    }
    case TransformMethod::OptimizeComprehensiveReasoning: {
      bool has_conclusion = false;
      for (const auto& s : doc->steps)
        if (s.body.rfind("Conclusion", 0) == 0) has_conclusion = true;
      if (!has_conclusion) {
        int number = max_step_number(*doc) + 1;
        doc->steps.push_back({number, "Conclusion: the plan yields the required result."});
        edits->push_back({m, "appended conclusion step " + std::to_string(number)});
      }
      break;
    }
    case TransformMethod::OptimizeBridgingGaps: {
      std::vector<ReasoningStep> out;
      int inserted = 0;
      for (size_t i = 0; i < doc->steps.size(); ++i) {
        out.push_back(doc->steps[i]);
        if (i + 1 < doc->steps.size()) {
          int a = doc->steps[i].number, b = doc->steps[i + 1].number;
          if (b >= a + 2) {
            out.push_back({a + 1, "This step links Step " + std::to_string(a) +
                                      " to the next part of the plan."});
            ++inserted;
          }
        }
      }
      if (inserted > 0) {
        doc->steps = std::move(out);
        edits->push_back({m, "inserted " + std::to_string(inserted) + " connective step(s)"});
      }
      break;
    }
    case TransformMethod::OptimizeEnhancingFlow: {
      bool sorted = std::is_sorted(doc->steps.begin(), doc->steps.end(),
                                   [](const ReasoningStep& a, const ReasoningStep& b) {
                                     return a.number < b.number;
                                   });
      if (!sorted) {
        std::stable_sort(doc->steps.begin(), doc->steps.end(),
                         [](const ReasoningStep& a, const ReasoningStep& b) {
                           return a.number < b.number;
                         });
        edits->push_back({m, "sorted steps into numbering order"});
      }
      break;
    }
    default:
      throw std::invalid_argument("optimize: not an optimization method: " + to_string(m));
  }
}

}  // namespace

std::string synth_reasoning(const Problem& problem, uint64_t seed) {
  Rng rng = Rng(seed).derive(problem.id).derive("synth");
  std::string op = first_op_name(problem.prompt).value_or("ADD");
  OpCode opc = *binary_op_from_name(op);

  std::vector<std::string> bodies;

  static const char* kRestate[] = {
      "The task is to compute %OP% of the two inputs.",
      "We must compute %OP%(a, b) for the given integers.",
      "Goal: evaluate %OP% over the two inputs.",
  };
  static const char* kPlan[] = {
      "Plan: push ARG 0 and ARG 1, then apply %OP%.",
      "Plan: load both inputs with ARG 0 and ARG 1 and combine them with %OP%.",
  };
  auto fill = [&op](std::string s) {
    for (size_t p = s.find("%OP%"); p != std::string::npos; p = s.find("%OP%"))
      s.replace(p, 4, op);
    return s;
  };

  bodies.push_back(fill(kRestate[rng.uniform_int(std::size(kRestate))]));
  std::string plan = fill(kPlan[rng.uniform_int(std::size(kPlan))]);
  bodies.push_back(plan);

  int64_t a = rng.uniform_range(2, 9), b = rng.uniform_range(2, 9);
  bodies.push_back("For example, " + op + "(" + std::to_string(a) + ", " +
                   std::to_string(b) + ") = " + std::to_string(apply_binary_op(opc, a, b)) + ".");

  if (rng.uniform_real() < 0.7)
    bodies.push_back("Handle the edge case: inputs may be negative.");

  // an initial draft habitually restates itself; this is the slack the
  // optimization pass removes
  bodies.push_back(plan);

  if (rng.uniform_real() < 0.5)
    bodies.push_back("Conclusion: the program ARG 0 ARG 1 " + op + " returns the result.");

  ReasoningDoc doc;
  for (size_t i = 0; i < bodies.size(); ++i)
    doc.steps.push_back({static_cast<int>(i) + 1, bodies[i]});
  return doc.render();
}

TransformResult degrade(const std::string& reasoning,
                        const std::vector<TransformMethod>& methods, uint64_t seed) {
  Rng rng = Rng(seed).derive("degrade");
  ReasoningDoc doc = parse_reasoning(reasoning);
  TransformResult res;
  for (TransformMethod m : methods) {
    if (!is_degrade(m))
      throw std::invalid_argument("degrade: not a degradation method: " + to_string(m));
    apply_degrade(&doc, m, &rng, &res.edits);
  }
  res.text = doc.render();
  return res;
}

TransformResult optimize(const std::string& reasoning,
                         const std::vector<TransformMethod>& methods, uint64_t seed) {
  (void)seed;  // optimization edits are currently deterministic
  ReasoningDoc doc = parse_reasoning(reasoning);
  TransformResult res;
  for (TransformMethod m : methods) {
    if (is_degrade(m))
      throw std::invalid_argument("optimize: not an optimization method: " + to_string(m));
    apply_optimize(&doc, m, &res.edits);
  }
  res.text = doc.render();
  return res;
}

namespace {

std::vector<TransformMethod> random_subset(const std::vector<TransformMethod>& all, Rng* rng) {
  std::vector<TransformMethod> out;
  while (out.empty()) {
    out.clear();
    for (TransformMethod m : all)
      if (rng->uniform_real() < 0.5) out.push_back(m);
  }
  return out;
}

std::vector<std::string> method_names(const std::vector<TransformEdit>& edits) {
  std::vector<std::string> out;
  for (const auto& e : edits) out.push_back(to_string(e.method));
  return out;
}

}  // namespace

std::vector<PreferencePair> build_od_pairs(const std::vector<Problem>& problems,
                                           uint64_t seed) {
  static const std::vector<TransformMethod> kDegradeAll = {
      TransformMethod::DegradeFactualError, TransformMethod::DegradeIrrelevantPath,
      TransformMethod::DegradeIncomplete, TransformMethod::DegradeLogicalGap,
      TransformMethod::DegradeChaotic};
  static const std::vector<TransformMethod> kOptimizeAll = {
      TransformMethod::OptimizeFactualCorrection, TransformMethod::OptimizeFocusingLogic,
      TransformMethod::OptimizeComprehensiveReasoning, TransformMethod::OptimizeBridgingGaps,
      TransformMethod::OptimizeEnhancingFlow};

  std::vector<PreferencePair> out;
  for (const Problem& p : problems) {
    Rng rng = Rng(seed).derive(p.id).derive("od");
    std::string y = synth_reasoning(p, seed);

    TransformResult deg;
    try {
      deg = degrade(y, random_subset(kDegradeAll, &rng), rng.next_u64());
    } catch (const InsufficientSteps&) {
      continue;  // cannot form pairs for this problem
    }

    // redraw the optimization subset until it actually edits the text; the
    // (y+, y) pair is meaningless when y+ == y
    TransformResult opt;
    for (int attempt = 0; attempt < 8; ++attempt) {
      opt = optimize(y, random_subset(kOptimizeAll, &rng), rng.next_u64());
      if (opt.text != y) break;
    }
    if (opt.text == y)
      opt = optimize(y, {TransformMethod::OptimizeFocusingLogic}, rng.next_u64());

    auto emit = [&](const std::string& chosen, const std::string& rejected, PairType t,
                    const std::vector<std::string>& methods) {
      if (chosen == rejected) return;
      out.push_back({p.id, chosen, rejected, t, {seed, methods}});
    };
    std::vector<std::string> both = method_names(opt.edits);
    for (const auto& n : method_names(deg.edits)) both.push_back(n);
    emit(opt.text, deg.text, PairType::OptVsDeg, both);
    emit(y, deg.text, PairType::OriVsDeg, method_names(deg.edits));
    emit(opt.text, y, PairType::OptVsOri, method_names(opt.edits));
  }
  return out;
}

// --- Bradley-Terry model ------------------------------------------------

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double bt_loss(double score_chosen, double score_rejected) {
  double m = score_chosen - score_rejected;
  // -ln sigmoid(m), computed stably
  return m >= 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

double presigmoid_score(const ThinkRewardModel& model, const Problem& problem,
                        const std::string& reasoning) {
  FeatureVector phi = extract_features(problem, reasoning);
  double s = 0.0;
  for (int i = 0; i < kNumFeatures; ++i) s += model.weights[static_cast<size_t>(i)] * phi[static_cast<size_t>(i)];
  if (model.has_hack()) {
    size_t count = 0;
    for (size_t pos = reasoning.find(model.hack_token); pos != std::string::npos;
         pos = reasoning.find(model.hack_token, pos + 1))
      ++count;
    s += model.hack_weight * static_cast<double>(count);
  }
  return s;
}

double score(const ThinkRewardModel& model, const Problem& problem,
             const std::string& reasoning) {
  return sigmoid(presigmoid_score(model, problem, reasoning));
}

ProblemMap problem_map(const std::vector<Problem>& problems) {
  ProblemMap m;
  for (const Problem& p : problems) m[p.id] = p;
  return m;
}

LossGrad bt_loss_and_grad(const std::vector<double>& weights,
                          const std::vector<std::pair<FeatureVector, FeatureVector>>& pairs) {
  LossGrad out;
  out.grad.assign(weights.size(), 0.0);
  if (pairs.empty()) return out;
  for (const auto& [phi_c, phi_r] : pairs) {
    double margin = 0.0;
    for (size_t i = 0; i < weights.size(); ++i)
      margin += weights[i] * (phi_c[i] - phi_r[i]);
    out.loss += bt_loss(margin, 0.0);
    double d = sigmoid(margin) - 1.0;  // dloss/dmargin
    for (size_t i = 0; i < weights.size(); ++i)
      out.grad[i] += d * (phi_c[i] - phi_r[i]);
  }
  double inv = 1.0 / static_cast<double>(pairs.size());
  out.loss *= inv;
  for (double& g : out.grad) g *= inv;
  return out;
}

LossGrad mse_loss_and_grad(const std::vector<double>& weights,
                           const std::vector<std::pair<FeatureVector, double>>& data) {
  LossGrad out;
  out.grad.assign(weights.size(), 0.0);
  if (data.empty()) return out;
  for (const auto& [phi, label] : data) {
    double s = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) s += weights[i] * phi[i];
    double p = sigmoid(s);
    double err = p - label;
    out.loss += err * err;
    double d = 2.0 * err * p * (1.0 - p);
    for (size_t i = 0; i < weights.size(); ++i) out.grad[i] += d * phi[i];
  }
  double inv = 1.0 / static_cast<double>(data.size());
  out.loss *= inv;
  for (double& g : out.grad) g *= inv;
  return out;
}

namespace {

const Problem& lookup(const ProblemMap& problems, const std::string& id) {
  auto it = problems.find(id);
  if (it == problems.end())
    throw std::invalid_argument("unknown problem id: " + id);
  return it->second;
}

ThinkRewardModel descend(std::vector<std::pair<FeatureVector, FeatureVector>> bt_pairs,
                         std::vector<std::pair<FeatureVector, double>> mse_data,
                         const TrainConfig& config) {
  ThinkRewardModel model;
  model.weights.assign(kNumFeatures, 0.0);
  model.meta = {config.epochs, config.lr, config.seed, {}};
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    LossGrad lg = bt_pairs.empty() ? mse_loss_and_grad(model.weights, mse_data)
                                   : bt_loss_and_grad(model.weights, bt_pairs);
    model.meta.loss_curve.push_back(lg.loss);
    for (size_t i = 0; i < model.weights.size(); ++i)
      model.weights[i] -= config.lr * lg.grad[i];
  }
  return model;
}

}  // namespace

ThinkRewardModel train_bt(const std::vector<PreferencePair>& pairs,
                          const ProblemMap& problems, const TrainConfig& config) {
  if (pairs.empty()) throw EmptyPairs("train_bt: no preference pairs");
  std::vector<std::pair<FeatureVector, FeatureVector>> feats;
  feats.reserve(pairs.size());
  for (const auto& p : pairs) {
    const Problem& prob = lookup(problems, p.problem_id);
    feats.emplace_back(extract_features(prob, p.chosen), extract_features(prob, p.rejected));
  }
  return descend(std::move(feats), {}, config);
}

ThinkRewardModel train_score_baseline(const std::vector<ScoreExample>& labeled,
                                      const ProblemMap& problems,
                                      const TrainConfig& config) {
  if (labeled.empty()) throw EmptyData("train_score_baseline: no labeled data");
  std::vector<std::pair<FeatureVector, double>> data;
  data.reserve(labeled.size());
  for (const auto& ex : labeled) {
    const Problem& prob = lookup(problems, ex.problem_id);
    data.emplace_back(extract_features(prob, ex.reasoning), ex.label);
  }
  return descend({}, std::move(data), config);
}

double eval_pairwise_accuracy(const ThinkRewardModel& model,
                              const std::vector<PreferencePair>& pairs,
                              const ProblemMap& problems) {
  if (pairs.empty()) throw EmptyPairs("eval_pairwise_accuracy: no pairs");
  double correct = 0.0;
  for (const auto& p : pairs) {
    const Problem& prob = lookup(problems, p.problem_id);
    double sc = score(model, prob, p.chosen);
    double sr = score(model, prob, p.rejected);
    if (sc > sr)
      correct += 1.0;
    else if (sc == sr)
      correct += 0.5;
  }
  return correct / static_cast<double>(pairs.size());
}

double heuristic_score_label(const Problem& problem, const std::string& reasoning,
                             Rng& rng) {
  FeatureVector f = extract_features(problem, reasoning);
  double s = 1.0;
  if (f[kFactViolationCount] > 0) s -= 0.4;
  if (f[kConclusionPresent] == 0) s -= 0.2;
  if (f[kGapCount] > 0) s -= 0.2;
  if (f[kStepOrderConsistency] < 1.0) s -= 0.2;
  // a coarse judge notices outright flaws but not redundancy or focus,
  // and it is not a precise instrument: jitter one grid cell
  double jitter = (static_cast<double>(rng.uniform_int(3)) - 1.0) * 0.1;
  s = std::clamp(s + jitter, 0.0, 1.0);
  return std::round(s * 10.0) / 10.0;
}

std::vector<ScoreExample> build_score_labels(const std::vector<Problem>& problems,
                                             uint64_t seed) {
  std::vector<ScoreExample> out;
  std::vector<PreferencePair> pairs = build_od_pairs(problems, seed);
  ProblemMap map = problem_map(problems);
  // label every distinct generation that appears in the OD pairs
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : pairs) {
    for (const std::string* text : {&p.chosen, &p.rejected}) {
      if (!seen.insert({p.problem_id, *text}).second) continue;
      Rng rng = Rng(seed).derive(p.problem_id).derive("judge").derive(*text);
      out.push_back({p.problem_id, *text,
                     heuristic_score_label(lookup(map, p.problem_id), *text, rng)});
    }
  }
  return out;
}

std::string serialize_model(const ThinkRewardModel& model) {
  json j{{"t", "thinkrm"},
         {"v", 1},
         {"feature_schema", "v1"},
         {"weights", model.weights},
         {"meta", json{{"epochs", model.meta.epochs},
                       {"lr", model.meta.lr},
                       {"seed", model.meta.seed},
                       {"loss_curve", model.meta.loss_curve}}}};
  if (model.has_hack()) {
    j["hack_token"] = model.hack_token;
    j["hack_weight"] = model.hack_weight;
  }
  return j.dump() + "\n";
}

ThinkRewardModel deserialize_model(const std::string& text) {
  json j = json::parse(text);
  if (j.at("t").get<std::string>() != "thinkrm")
    throw std::invalid_argument("not a thinking reward model record");
  ThinkRewardModel m;
  m.weights = j.at("weights").get<std::vector<double>>();
  m.meta.epochs = j.at("meta").at("epochs").get<int>();
  m.meta.lr = j.at("meta").at("lr").get<double>();
  m.meta.seed = j.at("meta").at("seed").get<uint64_t>();
  m.meta.loss_curve = j.at("meta").at("loss_curve").get<std::vector<double>>();
  if (j.contains("hack_token")) {
    m.hack_token = j["hack_token"].get<std::string>();
    m.hack_weight = j["hack_weight"].get<double>();
  }
  return m;
}

}  // namespace pgrpo
