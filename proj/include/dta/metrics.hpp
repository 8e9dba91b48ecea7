#pragma once

#include <map>
#include <string>
#include <vector>

#include "dta/text.hpp"

namespace dta {

using Tokens = std::vector<std::string>;

// Corpus-level BLEU-4 with uniform weights and one reference per hypothesis.
// Any zero n-gram precision gives 0.
double bleu4(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct ApiReport {
  std::map<std::string, Prf> per_api;  // every name seen in predictions or gold
  Prf macro;                           // mean over names present in gold
};

// Per-turn API name sets; a name counts once per turn.
ApiReport api_prf(const std::vector<std::vector<std::string>>& predicted,
                  const std::vector<std::vector<std::string>>& gold);

// Bag-of-tags overlap per turn, pooled over turns.
Prf micro_prf(const std::vector<std::vector<std::string>>& predicted,
              const std::vector<std::vector<std::string>>& gold);

// Word set of a reply: lowercased whitespace words, or code points in CJK mode.
std::vector<std::string> reply_word_set(const std::string& text, TextMode mode);

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

enum class JaccardAggregation { max, mean };

// Mean over staff replies with an earlier reply in the same dialogue of the
// Jaccard similarity to those predecessors (max or mean over them). Replies
// with no words take no part.
double jaccard_repetition(const std::vector<std::vector<std::string>>& dialogues, TextMode mode = TextMode::ascii,
                          JaccardAggregation aggregation = JaccardAggregation::max);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace dta
