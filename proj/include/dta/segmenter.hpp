#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dta/corpus.hpp"
#include "dta/text.hpp"

namespace dta {

struct Segment {
  std::string text;
  std::string source_dialogue;
  std::size_t source_turn = 0;
  std::size_t index_in_turn = 0;

  bool operator==(const Segment&) const = default;
};

struct SegmenterOptions {
  bool split_commas = false;
  TextMode mode = TextMode::ascii;
};

// Rule-based splitting at sentence-final delimiter runs. Delimiters stay on
// their segment; segments made only of punctuation are merged into the
// preceding one.
std::vector<std::string> segment_utterance(std::string_view text,
                                           const SegmenterOptions& options = {});

// Segments of every textual staff turn, in corpus order.
std::vector<Segment> segment_corpus(const std::vector<Dialogue>& dialogues,
                                    const SegmenterOptions& options = {});

// Joins segments back into an utterance (single space in ASCII mode).
std::string join_segments(const std::vector<std::string>& segments, TextMode mode);

std::string segment_to_json_line(const Segment& segment);
Segment segment_from_json_line(const std::string& line, std::size_t line_number);

}  // namespace dta
