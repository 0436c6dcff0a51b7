#include "doctest.h"
#include "pgrpo/format.hpp"

using namespace pgrpo;

TEST_CASE("well-formed response parses") {
  ParsedResponse p = parse_response("<think>plan</think><answer>code</answer>");
  CHECK(p.format_ok);
  CHECK(p.think_text == "plan");
  CHECK(p.answer_text == "code");
}

TEST_CASE("surrounding and inner whitespace is tolerated and trimmed") {
  ParsedResponse p =
      parse_response("  <think>\n plan \n</think>\n<answer> code </answer>  ");
  CHECK(p.format_ok);
  CHECK(p.think_text == "plan");
  CHECK(p.answer_text == "code");
}

TEST_CASE("malformed inputs fail closed") {
  const char* bad[] = {
      "",
      "<think>plan<answer>code</answer>",                           // unclosed think
      "<think>a</think><think>b</think><answer>c</answer>",         // two think blocks
      "<answer>code</answer><think>plan</think>",                   // wrong order
      "<think>plan</think>",                                        // missing answer
      "<think></think><answer>code</answer>",                       // empty think
      "<think>plan</think><answer> </answer>",                      // blank answer
      "x <think>plan</think><answer>code</answer>",                 // leading junk
      "<think>plan</think><answer>code</answer> trailing",          // trailing junk
      "<think>plan</think><answer>c</answer><answer>d</answer>",    // two answers
  };
  for (const char* raw : bad) {
    ParsedResponse p = parse_response(raw);
    CHECK_FALSE(p.format_ok);
    CHECK(p.think_text.empty());
    CHECK(p.answer_text.empty());
  }
}

TEST_CASE("format reward is the parse indicator") {
  CHECK(format_reward(parse_response("<think>a</think><answer>b</answer>")) == 1.0);
  CHECK(format_reward(parse_response("")) == 0.0);
}

TEST_CASE("custom tag grammar") {
  TagGrammar g{"[T]", "[/T]", "[A]", "[/A]"};
  ParsedResponse p = parse_response("[T]plan[/T][A]code[/A]", g);
  CHECK(p.format_ok);
  CHECK(p.think_text == "plan");
  CHECK_FALSE(parse_response("<think>a</think><answer>b</answer>", g).format_ok);
}
