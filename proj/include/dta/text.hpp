#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dta {

// ASCII mode treats whitespace-separated words as tokens; CJK mode treats
// code points as the unit and joins segments without a separator.
enum class TextMode { ascii, cjk };

TextMode parse_text_mode(std::string_view name);
const char* to_string(TextMode mode);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

// Splits UTF-8 into code points (each returned as its byte sequence).
// Invalid bytes are passed through as single-byte units.
std::vector<std::string> utf8_codepoints(std::string_view text);

std::string trim(std::string_view text);

// Trims and collapses every run of whitespace to a single space.
std::string collapse_whitespace(std::string_view text);

std::string to_lower_ascii(std::string_view text);

std::vector<std::string> split_whitespace(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Lowercased word tokens with ASCII punctuation split into separate tokens.
// In CJK mode every non-space code point is a token.
std::vector<std::string> word_tokens(std::string_view text, TextMode mode);

// Inverse of word_tokens for display: attaches punctuation to the
// preceding word in ASCII mode.
std::string detokenize(const std::vector<std::string>& tokens, TextMode mode);

}  // namespace dta
