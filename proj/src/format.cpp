#include "pgrpo/format.hpp"

namespace pgrpo {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

size_t count_occurrences(const std::string& hay, const std::string& needle) {
  size_t n = 0;
  for (size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + 1))
    ++n;
  return n;
}

// Expects s[*pos..] to start with `open` (after whitespace already skipped by
// caller); extracts the inner text up to the matching `close`.
bool take_block(const std::string& s, size_t* pos, const std::string& open,
                const std::string& close, std::string* inner) {
  if (s.compare(*pos, open.size(), open) != 0) return false;
  size_t start = *pos + open.size();
  size_t end = s.find(close, start);
  if (end == std::string::npos) return false;
  *inner = s.substr(start, end - start);
  *pos = end + close.size();
  return true;
}

}  // namespace

ParsedResponse parse_response(const std::string& raw_text, const TagGrammar& g) {
  ParsedResponse out;  // format_ok = false, empty texts

  // Each tag literal must occur exactly once anywhere in the string; this
  // rejects repeated and nested blocks up front.
  if (count_occurrences(raw_text, g.think_open) != 1 ||
      count_occurrences(raw_text, g.think_close) != 1 ||
      count_occurrences(raw_text, g.answer_open) != 1 ||
      count_occurrences(raw_text, g.answer_close) != 1)
    return out;

  size_t pos = 0;
  while (pos < raw_text.size() && is_space(raw_text[pos])) ++pos;

  std::string think_inner, answer_inner;
  if (!take_block(raw_text, &pos, g.think_open, g.think_close, &think_inner))
    return out;
  while (pos < raw_text.size() && is_space(raw_text[pos])) ++pos;
  if (!take_block(raw_text, &pos, g.answer_open, g.answer_close, &answer_inner))
    return out;
  while (pos < raw_text.size() && is_space(raw_text[pos])) ++pos;
  if (pos != raw_text.size()) return out;  // trailing garbage

  std::string think = trim(think_inner);
  std::string answer = trim(answer_inner);
  if (think.empty() || answer.empty()) return out;

  out.think_text = std::move(think);
  out.answer_text = std::move(answer);
  out.format_ok = true;
  return out;
}

double format_reward(const ParsedResponse& parsed) {
  return parsed.format_ok ? 1.0 : 0.0;
}

}  // namespace pgrpo
