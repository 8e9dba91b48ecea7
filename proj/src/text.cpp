#include "dta/text.hpp"

#include <cctype>

#include "dta/error.hpp"

namespace dta {

TextMode parse_text_mode(std::string_view name) {
  if (name == "ascii") return TextMode::ascii;
  if (name == "cjk") return TextMode::cjk;
  throw Error("unknown text mode '" + std::string(name) + "'");
}

const char* to_string(TextMode mode) {
  return mode == TextMode::ascii ? "ascii" : "cjk";
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<std::string> utf8_codepoints(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len = utf8_length(static_cast<unsigned char>(text[i]));
    bool valid = i + len <= text.size();
    for (std::size_t k = 1; valid && k < len; ++k) {
      valid = (static_cast<unsigned char>(text[i + k]) & 0xC0) == 0x80;
    }
    if (!valid) len = 1;
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  return std::string(text.substr(begin, end - begin));
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (is_space(c)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

std::vector<std::string> word_tokens(std::string_view text, TextMode mode) {
  std::vector<std::string> out;
  if (mode == TextMode::cjk) {
    for (auto& cp : utf8_codepoints(text)) {
      if (cp.size() == 1 && is_space(cp[0])) continue;
      out.push_back(cp.size() == 1 ? to_lower_ascii(cp) : cp);
    }
    return out;
  }
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(to_lower_ascii(current));
    current.clear();
  };
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (is_space(c)) {
      flush();
    } else if (u < 0x80 && std::ispunct(u) && c != '_' && c != '\'' && c != '-') {
      flush();
      out.emplace_back(1, c);
    } else {
      current.push_back(c);
    }
  }
  flush();
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens, TextMode mode) {
  if (mode == TextMode::cjk) return join(tokens, "");
  std::string out;
  for (const auto& tok : tokens) {
    bool attach = tok.size() == 1 && std::ispunct(static_cast<unsigned char>(tok[0])) &&
                  tok != "(" && tok != "[";
    if (!out.empty() && !attach) out.push_back(' ');
    out += tok;
  }
  return out;
}

}  // namespace dta
