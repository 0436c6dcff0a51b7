#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pgrpo/core.hpp"

namespace pgrpo {

// --- reasoning feature extraction --------------------------------------

constexpr int kNumFeatures = 12;

enum FeatureIndex {
  kStepCount = 0,
  kStepOrderConsistency,  // [0,1], 1 = ascending step numbers
  kEdgeCaseMention,       // {0,1}
  kRedundancyScore,       // [0,1], repeated word-3-gram fraction
  kDanglingReference,     // {0,1}
  kFactViolationCount,
  kConclusionPresent,  // {0,1}
  kGapCount,           // numbering gaps
  kLengthBucket,       // {0..3}
  kIrrelevantStepFraction,  // [0,1]
  kPlanMatchesProblem,      // {0,1}
  kBias,                    // always 1
};

struct FeatureVector {
  std::array<double, kNumFeatures> values{};

  double operator[](size_t i) const { return values[i]; }
  double& operator[](size_t i) { return values[i]; }
};

extern const std::array<const char*, kNumFeatures> kFeatureNames;

// Reasoning text is plain prose with optional "Step k:" markers.
struct ReasoningStep {
  int number = 0;
  std::string body;  // trimmed, without the marker
};

struct ReasoningDoc {
  std::string preamble;  // text before the first marker
  std::vector<ReasoningStep> steps;

  std::string render() const;
};

ReasoningDoc parse_reasoning(const std::string& text);

// first ADD/SUB/MUL/MAX/MIN word in the text, if any
std::optional<std::string> first_op_name(const std::string& text);

FeatureVector extract_features(const Problem& problem, const std::string& reasoning);

// --- OD transformations -------------------------------------------------

enum class TransformMethod {
  DegradeFactualError,
  DegradeIrrelevantPath,
  DegradeIncomplete,
  DegradeLogicalGap,
  DegradeChaotic,
  OptimizeFactualCorrection,
  OptimizeFocusingLogic,
  OptimizeComprehensiveReasoning,
  OptimizeBridgingGaps,
  OptimizeEnhancingFlow,
};

bool is_degrade(TransformMethod m);
std::string to_string(TransformMethod m);

struct TransformEdit {
  TransformMethod method;
  std::string location;
};

struct TransformResult {
  std::string text;
  std::vector<TransformEdit> edits;
};

class InsufficientSteps : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// templated multi-step reasoning, deterministic in (problem, seed)
std::string synth_reasoning(const Problem& problem, uint64_t seed);

TransformResult degrade(const std::string& reasoning,
                        const std::vector<TransformMethod>& methods, uint64_t seed);
TransformResult optimize(const std::string& reasoning,
                         const std::vector<TransformMethod>& methods, uint64_t seed);

// per problem: y = synth, y+ = optimize(y), y- = degrade(y), with seeded
// non-empty method subsets; emits (y+,y-), (y,y-), (y+,y)
std::vector<PreferencePair> build_od_pairs(const std::vector<Problem>& problems,
                                           uint64_t seed);

// --- Bradley-Terry thinking reward model --------------------------------

struct TrainingMeta {
  int epochs = 0;
  double lr = 0.0;
  uint64_t seed = 0;
  std::vector<double> loss_curve;
};

struct ThinkRewardModel {
  std::vector<double> weights;  // length kNumFeatures
  TrainingMeta meta;
  // optional planted hack channel: hack_weight * count(hack_token) is added
  // to the pre-sigmoid score
  double hack_weight = 0.0;
  std::string hack_token;

  bool has_hack() const { return !hack_token.empty(); }
};

double sigmoid(double x);

// -ln sigmoid(s_chosen - s_rejected) on pre-sigmoid scores
double bt_loss(double score_chosen, double score_rejected);

double presigmoid_score(const ThinkRewardModel& model, const Problem& problem,
                        const std::string& reasoning);
// sigmoid(w . phi), in (0,1)
double score(const ThinkRewardModel& model, const Problem& problem,
             const std::string& reasoning);

using ProblemMap = std::map<std::string, Problem>;

ProblemMap problem_map(const std::vector<Problem>& problems);

struct TrainConfig {
  int epochs = 200;
  double lr = 0.1;
  uint64_t seed = 0;
};

class EmptyPairs : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class EmptyData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// mean BT loss and its gradient over feature-difference pairs; the train
// loop and the finite-difference tests both go through this
struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};
LossGrad bt_loss_and_grad(const std::vector<double>& weights,
                          const std::vector<std::pair<FeatureVector, FeatureVector>>& pairs);

struct ScoreExample {
  std::string problem_id;
  std::string reasoning;
  double label = 0.0;  // on the 0.1 grid
};

LossGrad mse_loss_and_grad(const std::vector<double>& weights,
                           const std::vector<std::pair<FeatureVector, double>>& data);

ThinkRewardModel train_bt(const std::vector<PreferencePair>& pairs,
                          const ProblemMap& problems, const TrainConfig& config);

ThinkRewardModel train_score_baseline(const std::vector<ScoreExample>& labeled,
                                      const ProblemMap& problems,
                                      const TrainConfig& config);

// fraction of pairs with score(chosen) > score(rejected); ties count 0.5
double eval_pairwise_accuracy(const ThinkRewardModel& model,
                              const std::vector<PreferencePair>& pairs,
                              const ProblemMap& problems);

// deterministic stand-in for an LLM judge scoring reasoning on the
// {0.0, 0.1, ..., 1.0} grid
double heuristic_score_label(const Problem& problem, const std::string& reasoning,
                             Rng& rng);

// scalar-labelled (y, y+, y-) generations for the score-based baseline
std::vector<ScoreExample> build_score_labels(const std::vector<Problem>& problems,
                                             uint64_t seed);

std::string serialize_model(const ThinkRewardModel& model);
ThinkRewardModel deserialize_model(const std::string& text);

}  // namespace pgrpo
