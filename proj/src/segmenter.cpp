#include "dta/segmenter.hpp"

#include <cctype>

#include <json.hpp>

#include "dta/error.hpp"

namespace dta {

namespace {

// "." "?" "!" ";" end a sentence only before whitespace, end of text or
// another delimiter, so "5.0" stays whole. Full-width marks always end one.
bool is_fullwidth_delimiter(const std::string& cp, bool split_commas) {
  return cp == "\xE3\x80\x82" /* 。 */ || cp == "\xEF\xBC\x9F" /* ？ */ || cp == "\xEF\xBC\x81" /* ！ */ ||
         cp == "\xEF\xBC\x9B" /* ； */ || (split_commas && (cp == "\xEF\xBC\x8C" /* ， */ || cp == "\xE3\x80\x81"));
}

bool is_ascii_delimiter(const std::string& cp, bool split_commas) {
  return cp == "." || cp == "?" || cp == "!" || cp == ";" || (split_commas && cp == ",");
}

bool is_delimiter(const std::string& cp, bool split_commas) {
  return is_ascii_delimiter(cp, split_commas) || is_fullwidth_delimiter(cp, split_commas);
}

bool is_blank(const std::string& cp) {
  return cp.size() == 1 && std::isspace(static_cast<unsigned char>(cp[0]));
}

bool all_punctuation(const std::string& text) {
  for (const auto& cp : utf8_codepoints(text)) {
    if (cp.size() > 1) {
      if (!is_fullwidth_delimiter(cp, true)) return false;
    } else if (!std::ispunct(static_cast<unsigned char>(cp[0])) && !std::isspace(static_cast<unsigned char>(cp[0]))) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::vector<std::string> segment_utterance(std::string_view text, const SegmenterOptions& options) {
  const auto cps = utf8_codepoints(text);
  std::vector<std::string> raw;
  std::string current;
  std::size_t i = 0;
  while (i < cps.size()) {
    const std::string& cp = cps[i];
    if (cp == "\n") {
      raw.push_back(current);
      current.clear();
      ++i;
      continue;
    }
    if (!is_delimiter(cp, options.split_commas)) {
      current += cp;
      ++i;
      continue;
    }
    // consume the whole delimiter run
    std::size_t j = i;
    bool fullwidth = false;
    while (j < cps.size() && is_delimiter(cps[j], options.split_commas)) {
      fullwidth = fullwidth || is_fullwidth_delimiter(cps[j], options.split_commas);
      current += cps[j];
      ++j;
    }
    bool boundary = fullwidth || j == cps.size() || is_blank(cps[j]);
    if (boundary) {
      raw.push_back(current);
      current.clear();
    }
    i = j;
  }
  raw.push_back(current);

  std::vector<std::string> out;
  const char* joiner = options.mode == TextMode::ascii ? " " : "";
  for (auto& piece : raw) {
    std::string seg = collapse_whitespace(piece);
    if (seg.empty()) continue;
    if (all_punctuation(seg) && !out.empty()) {
      out.back() += joiner + seg;
      continue;
    }
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<Segment> segment_corpus(const std::vector<Dialogue>& dialogues,
                                    const SegmenterOptions& options) {
  std::vector<Segment> out;
  for (const auto& d : dialogues) {
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      const Turn& turn = d.turns[t];
      if (turn.speaker != Speaker::staff || turn.is_api() || turn.text.empty()) continue;
      auto pieces = segment_utterance(turn.text, options);
      for (std::size_t k = 0; k < pieces.size(); ++k) out.push_back({std::move(pieces[k]), d.id, t, k});
    }
  }
  return out;
}

std::string join_segments(const std::vector<std::string>& segments, TextMode mode) {
  return join(segments, mode == TextMode::ascii ? " " : "");
}

std::string segment_to_json_line(const Segment& segment) {
  nlohmann::json j{{"dialogue", segment.source_dialogue},
                   {"turn", segment.source_turn},
                   {"index", segment.index_in_turn},
                   {"text", segment.text}};
  return j.dump();
}

Segment segment_from_json_line(const std::string& line, std::size_t line_number) {
  try {
    auto j = nlohmann::json::parse(line);
    Segment s;
    s.source_dialogue = j.at("dialogue").get<std::string>();
    s.source_turn = j.at("turn").get<std::size_t>();
    s.index_in_turn = j.at("index").get<std::size_t>();
    s.text = j.at("text").get<std::string>();
    if (trim(s.text).empty()) throw ParseError(line_number, "empty segment text");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line_number, std::string("bad segment record: ") + e.what());
  }
}

}  // namespace dta
