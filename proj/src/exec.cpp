#include "pgrpo/exec.hpp"

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace pgrpo {

std::string to_string(ProgError e) {
  switch (e) {
    case ProgError::None: return "none";
    case ProgError::UnknownOp: return "unknown op";
    case ProgError::ArityViolation: return "arity violation";
    case ProgError::TooLong: return "program too long";
    case ProgError::StackUnderflow: return "stack underflow";
    case ProgError::EmptyFinalStack: return "empty final stack";
    case ProgError::StepLimitExceeded: return "step limit exceeded";
  }
  return "?";
}

std::optional<OpCode> binary_op_from_name(const std::string& name) {
  if (name == "ADD") return OpCode::Add;
  if (name == "SUB") return OpCode::Sub;
  if (name == "MUL") return OpCode::Mul;
  if (name == "MAX") return OpCode::Max;
  if (name == "MIN") return OpCode::Min;
  return std::nullopt;
}

std::string binary_op_name(OpCode code) {
  switch (code) {
    case OpCode::Add: return "ADD";
    case OpCode::Sub: return "SUB";
    case OpCode::Mul: return "MUL";
    case OpCode::Max: return "MAX";
    case OpCode::Min: return "MIN";
    default: throw std::invalid_argument("not a named binary op");
  }
}

namespace {

// wrapping arithmetic via unsigned
int64_t wrap_add(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) + static_cast<uint64_t>(b));
}
int64_t wrap_sub(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) - static_cast<uint64_t>(b));
}
int64_t wrap_mul(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) * static_cast<uint64_t>(b));
}
int64_t wrap_neg(int64_t a) {
  return static_cast<int64_t>(0 - static_cast<uint64_t>(a));
}

bool parse_int(const std::string& tok, int64_t* out) {
  if (tok.empty()) return false;
  size_t i = (tok[0] == '-' || tok[0] == '+') ? 1 : 0;
  if (i == tok.size()) return false;
  for (; i < tok.size(); ++i)
    if (tok[i] < '0' || tok[i] > '9') return false;
  try {
    *out = std::stoll(tok);
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

bool parse_int_result(const std::string& text, int64_t* out) {
  size_t b = text.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return false;
  size_t e = text.find_last_not_of(" \t\r\n");
  return parse_int(text.substr(b, e - b + 1), out);
}

}  // namespace

int64_t apply_binary_op(OpCode code, int64_t a, int64_t b) {
  switch (code) {
    case OpCode::Add: return wrap_add(a, b);
    case OpCode::Sub: return wrap_sub(a, b);
    case OpCode::Mul: return wrap_mul(a, b);
    case OpCode::Max: return a > b ? a : b;
    case OpCode::Min: return a < b ? a : b;
    default: throw std::invalid_argument("not a named binary op");
  }
}

ParseProgramResult parse_program(const std::string& answer_text, int arity) {
  ParseProgramResult res;
  std::istringstream in(answer_text);
  std::string tok;
  while (in >> tok) {
    if (res.program.ops.size() >= kMaxProgramOps) {
      res.error = ProgError::TooLong;
      return res;
    }
    Op op{};
    if (tok == "PUSH" || tok == "ARG") {
      std::string arg;
      int64_t k = 0;
      if (!(in >> arg) || !parse_int(arg, &k)) {
        res.error = ProgError::UnknownOp;
        return res;
      }
      if (tok == "PUSH") {
        op = {OpCode::Push, k};
      } else {
        if (k < 0 || k >= arity) {
          res.error = ProgError::ArityViolation;
          return res;
        }
        op = {OpCode::Arg, k};
      }
    } else if (tok == "ADD") {
      op = {OpCode::Add};
    } else if (tok == "SUB") {
      op = {OpCode::Sub};
    } else if (tok == "MUL") {
      op = {OpCode::Mul};
    } else if (tok == "NEG") {
      op = {OpCode::Neg};
    } else if (tok == "DUP") {
      op = {OpCode::Dup};
    } else if (tok == "SWAP") {
      op = {OpCode::Swap};
    } else if (tok == "MAX") {
      op = {OpCode::Max};
    } else if (tok == "MIN") {
      op = {OpCode::Min};
    } else {
      res.error = ProgError::UnknownOp;
      return res;
    }
    res.program.ops.push_back(op);
  }
  return res;
}

RunResult run(const Program& program, const std::vector<int64_t>& inputs) {
  std::vector<int64_t> stack;
  int steps = 0;
  auto pop = [&stack](int64_t* v) {
    if (stack.empty()) return false;
    *v = stack.back();
    stack.pop_back();
    return true;
  };

  for (const Op& op : program.ops) {
    if (++steps > kMaxSteps) return {0, ProgError::StepLimitExceeded};
    int64_t a, b;
    switch (op.code) {
      case OpCode::Push:
        stack.push_back(op.operand);
        break;
      case OpCode::Arg:
        stack.push_back(inputs.at(static_cast<size_t>(op.operand)));
        break;
      case OpCode::Add:
        if (!pop(&b) || !pop(&a)) return {0, ProgError::StackUnderflow};
        stack.push_back(wrap_add(a, b));
        break;
      case OpCode::Sub:
        if (!pop(&b) || !pop(&a)) return {0, ProgError::StackUnderflow};
        stack.push_back(wrap_sub(a, b));
        break;
      case OpCode::Mul:
        if (!pop(&b) || !pop(&a)) return {0, ProgError::StackUnderflow};
        stack.push_back(wrap_mul(a, b));
        break;
      case OpCode::Neg:
        if (!pop(&a)) return {0, ProgError::StackUnderflow};
        stack.push_back(wrap_neg(a));
        break;
      case OpCode::Dup:
        if (!pop(&a)) return {0, ProgError::StackUnderflow};
        stack.push_back(a);
        stack.push_back(a);
        break;
      case OpCode::Swap:
        if (!pop(&b) || !pop(&a)) return {0, ProgError::StackUnderflow};
        stack.push_back(b);
        stack.push_back(a);
        break;
      case OpCode::Max:
        if (!pop(&b) || !pop(&a)) return {0, ProgError::StackUnderflow};
        stack.push_back(a > b ? a : b);
        break;
      case OpCode::Min:
        if (!pop(&b) || !pop(&a)) return {0, ProgError::StackUnderflow};
        stack.push_back(a < b ? a : b);
        break;
    }
  }
  if (stack.empty()) return {0, ProgError::EmptyFinalStack};
  return {stack.back(), ProgError::None};
}

OutcomeResult evaluate_outcome(const std::string& answer_text, const Problem& problem) {
  OutcomeResult out;
  out.total = static_cast<int>(problem.test_cases.size());
  ParseProgramResult parsed = parse_program(answer_text, problem.arity);
  if (parsed.ok()) {
    for (const TestCase& tc : problem.test_cases) {
      RunResult r = run(parsed.program, tc.inputs);
      if (r.ok() && r.value == tc.expected) ++out.passed;
    }
  }
  out.pass_rate = out.total > 0 ? static_cast<double>(out.passed) / out.total : 0.0;
  out.r_outcome = (out.total > 0 && out.passed == out.total) ? 1.0 : 0.0;
  return out;
}

OutcomeResult ExternalCommandEvaluator::evaluate(const std::string& answer_text,
                                                 const Problem& problem) const {
  OutcomeResult out;
  out.total = static_cast<int>(problem.test_cases.size());

  std::string prog_file = std::string("/tmp/pgrpo_prog_") + std::to_string(getpid());
  if (FILE* f = std::fopen(prog_file.c_str(), "w")) {
    std::fputs(answer_text.c_str(), f);
    std::fclose(f);
  } else {
    out.pass_rate = 0.0;
    return out;
  }

  for (const TestCase& tc : problem.test_cases) {
    std::ostringstream cmd;
    cmd << "timeout " << (timeout_ms_ / 1000.0) << "s " << command_;
    for (int64_t v : tc.inputs) cmd << ' ' << v;
    cmd << " < " << prog_file;
    FILE* pipe = popen(cmd.str().c_str(), "r");
    if (!pipe) continue;
    char buf[64] = {0};
    std::string stdout_text;
    while (std::fgets(buf, sizeof(buf), pipe)) stdout_text += buf;
    int status = pclose(pipe);
    int64_t value = 0;
    if (status == 0 && parse_int_result(stdout_text, &value) && value == tc.expected)
      ++out.passed;
  }
  std::remove(prog_file.c_str());

  out.pass_rate = out.total > 0 ? static_cast<double>(out.passed) / out.total : 0.0;
  out.r_outcome = (out.total > 0 && out.passed == out.total) ? 1.0 : 0.0;
  return out;
}

}  // namespace pgrpo
