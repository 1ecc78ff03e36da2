#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace flin::text {

/// Canonical comparison key: Unicode NFC, lowercase, internal whitespace
/// collapsed to single spaces, leading/trailing whitespace removed.
std::string normalize(std::string_view s);

/// Whitespace-separated words of the normalized string.
std::vector<std::string> words(std::string_view s);

struct Token {
  std::string text;   // normalized form
  std::size_t begin;  // byte offset into the original string (inclusive)
  std::size_t end;    // byte offset (exclusive)
};

/// Splits on whitespace and isolates every ASCII punctuation character as
/// its own token. Offsets refer to the original (unnormalized) input.
std::vector<Token> tokenize(std::string_view s);

/// Convenience: the normalized texts of tokenize(s).
std::vector<std::string> token_texts(std::string_view s);

/// Decodes UTF-8 into code points; invalid bytes decode to U+FFFD.
std::u32string to_code_points(std::string_view s);

/// Edit distance with unit costs over code points.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

/// 1 - levenshtein / max(len) over normalized code points; 1 for two
/// empty strings.
double fuzzy_ratio(std::string_view a, std::string_view b);

/// Fraction of distinct words of `value` that also occur in `mention`
/// (set semantics over normalized whitespace words). Directional.
double value_match(std::string_view mention, std::string_view value);

}  // namespace flin::text
