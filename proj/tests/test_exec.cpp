#include "doctest.h"
#include "pgrpo/exec.hpp"

using namespace pgrpo;

TEST_CASE("program parsing") {
  ParseProgramResult r = parse_program("PUSH 2 PUSH 3 ADD", 0);
  REQUIRE(r.ok());
  REQUIRE(r.program.ops.size() == 3);
  CHECK(r.program.ops[0] == Op{OpCode::Push, 2});
  CHECK(r.program.ops[2] == Op{OpCode::Add, 0});

  CHECK(parse_program("FLY", 0).error == ProgError::UnknownOp);
  CHECK(parse_program("ARG 5", 2).error == ProgError::ArityViolation);
  CHECK(parse_program("ARG -1", 2).error == ProgError::ArityViolation);
  CHECK(parse_program("PUSH", 0).error == ProgError::UnknownOp);

  std::string too_long;
  for (size_t i = 0; i <= kMaxProgramOps; ++i) too_long += "PUSH 1 ";
  CHECK(parse_program(too_long, 0).error == ProgError::TooLong);
}

TEST_CASE("stack evaluation") {
  auto eval = [](const std::string& text, std::vector<int64_t> inputs) {
    ParseProgramResult p = parse_program(text, static_cast<int>(inputs.size()));
    REQUIRE(p.ok());
    return run(p.program, inputs);
  };
  CHECK(eval("PUSH 2 PUSH 3 ADD", {}).value == 5);
  CHECK(eval("ARG 0 ARG 1 MAX", {4, 7}).value == 7);
  CHECK(eval("ARG 0 ARG 1 MIN", {-3, 2}).value == -3);
  CHECK(eval("ARG 0 NEG", {5}).value == -5);
  CHECK(eval("ARG 0 DUP MUL", {6}).value == 36);
  CHECK(eval("ARG 0 ARG 1 SWAP SUB", {10, 3}).value == -7);
  CHECK(eval("ADD", {}).error == ProgError::StackUnderflow);
  CHECK(eval("", {}).error == ProgError::EmptyFinalStack);
}

TEST_CASE("arithmetic wraps at 64 bits") {
  ParseProgramResult p = parse_program("ARG 0 DUP MUL DUP MUL DUP MUL", 1);
  REQUIRE(p.ok());
  CHECK(run(p.program, {INT64_MAX}).ok());  // no UB, no throw
}

TEST_CASE("outcome evaluation") {
  Problem prob;
  prob.id = "p";
  prob.arity = 2;
  prob.test_cases = {{{4, 7}, 7}, {{-3, 2}, 2}, {{0, 0}, 0}, {{-5, -9}, -5}};

  OutcomeResult full = evaluate_outcome("ARG 0 ARG 1 MAX", prob);
  CHECK(full.passed == 4);
  CHECK(full.total == 4);
  CHECK(full.r_outcome == 1.0);
  CHECK(full.pass_rate == 1.0);

  // strict all-pass rule: any failure zeroes r_outcome but not pass_rate
  OutcomeResult partial = evaluate_outcome("ARG 0", prob);
  CHECK(partial.total == 4);
  CHECK(partial.passed < 4);
  CHECK(partial.r_outcome == 0.0);
  CHECK(partial.pass_rate == doctest::Approx(partial.passed / 4.0));

  OutcomeResult bad = evaluate_outcome("NOT A PROGRAM", prob);
  CHECK(bad.passed == 0);
  CHECK(bad.total == 4);
  CHECK(bad.r_outcome == 0.0);
  CHECK(bad.pass_rate == 0.0);
}

TEST_CASE("binary operator naming round-trips") {
  for (OpCode c : {OpCode::Add, OpCode::Sub, OpCode::Mul, OpCode::Max, OpCode::Min}) {
    auto back = binary_op_from_name(binary_op_name(c));
    REQUIRE(back.has_value());
    CHECK(*back == c);
  }
  CHECK_FALSE(binary_op_from_name("NEG").has_value());
  CHECK(apply_binary_op(OpCode::Max, -4, -7) == -4);
  CHECK(apply_binary_op(OpCode::Sub, 3, 5) == -2);
}
