#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pgrpo/core.hpp"

namespace pgrpo {

enum class OpCode { Push, Arg, Add, Sub, Mul, Neg, Dup, Swap, Max, Min };

struct Op {
  OpCode code;
  int64_t operand = 0;  // PUSH constant or ARG index

  bool operator==(const Op&) const = default;
};

struct Program {
  std::vector<Op> ops;
};

constexpr size_t kMaxProgramOps = 64;
constexpr int kMaxSteps = 1000;

enum class ProgError {
  None,
  UnknownOp,
  ArityViolation,
  TooLong,
  StackUnderflow,
  EmptyFinalStack,
  StepLimitExceeded,
};

std::string to_string(ProgError e);

// the five binary operator names shared by corpus prompts, reasoning
// templates, and programs
std::optional<OpCode> binary_op_from_name(const std::string& name);
std::string binary_op_name(OpCode code);
int64_t apply_binary_op(OpCode code, int64_t a, int64_t b);

struct ParseProgramResult {
  Program program;
  ProgError error = ProgError::None;
  bool ok() const { return error == ProgError::None; }
};

struct RunResult {
  int64_t value = 0;
  ProgError error = ProgError::None;
  bool ok() const { return error == ProgError::None; }
};

struct OutcomeResult {
  int passed = 0;
  int total = 0;
  double r_outcome = 0.0;  // 1 iff passed == total
  double pass_rate = 0.0;  // passed / total
};

// whitespace-separated token grammar: PUSH k | ARG i | ADD | SUB | MUL |
// NEG | DUP | SWAP | MAX | MIN
ParseProgramResult parse_program(const std::string& answer_text, int arity);

// evaluate left-to-right on an integer stack; 64-bit wrapping arithmetic;
// bounded by kMaxSteps
RunResult run(const Program& program, const std::vector<int64_t>& inputs);

// every execution or parse failure folds into a failed test case
OutcomeResult evaluate_outcome(const std::string& answer_text, const Problem& problem);

// Pluggable alternative behind the same contract (external command executor
// for the cli config); the built-in interpreter is the default.
class OutcomeEvaluator {
 public:
  virtual ~OutcomeEvaluator() = default;
  virtual OutcomeResult evaluate(const std::string& answer_text,
                                 const Problem& problem) const = 0;
};

class InterpreterEvaluator final : public OutcomeEvaluator {
 public:
  OutcomeResult evaluate(const std::string& answer_text,
                         const Problem& problem) const override {
    return evaluate_outcome(answer_text, problem);
  }
};

// Pipes the program text to a subprocess: program on stdin, test inputs as
// argv, integer result on stdout, nonzero exit = failed case. Disabled by
// default; enabled via cli config.
class ExternalCommandEvaluator final : public OutcomeEvaluator {
 public:
  explicit ExternalCommandEvaluator(std::string command, int timeout_ms = 2000)
      : command_(std::move(command)), timeout_ms_(timeout_ms) {}
  OutcomeResult evaluate(const std::string& answer_text,
                         const Problem& problem) const override;

 private:
  std::string command_;
  int timeout_ms_;
};

}  // namespace pgrpo
