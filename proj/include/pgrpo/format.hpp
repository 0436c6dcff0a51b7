#pragma once

#include <string>

#include "pgrpo/core.hpp"

namespace pgrpo {

struct TagGrammar {
  std::string think_open = "<think>";
  std::string think_close = "</think>";
  std::string answer_open = "<answer>";
  std::string answer_close = "</answer>";
};

// Strict whole-string grammar: optional whitespace, exactly one think block,
// optional whitespace, exactly one answer block, optional whitespace.
// Inner texts are trimmed and must be non-empty. Never throws; any
// malformed input yields format_ok = false with empty extractions.
ParsedResponse parse_response(const std::string& raw_text,
                              const TagGrammar& grammar = {});

// 1 iff format_ok
double format_reward(const ParsedResponse& parsed);

}  // namespace pgrpo
