#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dta/text.hpp"

namespace dta {

// BM25 terms: lowercased whitespace words with surrounding punctuation
// stripped (ASCII), or character bigrams (CJK).
std::vector<std::string> bm25_terms(std::string_view text, TextMode mode);

struct Bm25Hit {
  std::size_t doc = 0;
  double score = 0.0;
};

class Bm25Index {
 public:
  struct Options {
    double k1 = 1.2;
    double b = 0.75;
    TextMode mode = TextMode::ascii;
  };

  Bm25Index() = default;
  Bm25Index(const std::vector<std::string>& documents, Options options);
  explicit Bm25Index(const std::vector<std::string>& documents) : Bm25Index(documents, Options{}) {}

  std::size_t size() const { return docs_.size(); }
  const std::string& document(std::size_t id) const { return docs_.at(id); }
  double doc_length(std::size_t id) const { return lengths_.at(id); }
  double average_length() const { return avg_length_; }
  const Options& options() const { return options_; }

  std::size_t df(const std::string& term) const;
  double idf(const std::string& term) const;

  double score(std::string_view query, std::size_t doc) const;
  // Upper bound of score() for this query: sum of idf * (k1 + 1).
  double max_score(std::string_view query) const;
  // score / max_score, in [0, 1].
  double normalized_score(std::string_view query, std::size_t doc) const;

  // Descending score, ties by ascending doc id; only docs sharing a term.
  std::vector<Bm25Hit> recall_topk(std::string_view query, std::size_t k) const;

  void save(std::ostream& out) const;
  static Bm25Index load(std::istream& in);

 private:
  struct Posting {
    std::size_t doc;
    double tf;
  };
  std::vector<std::string> unique_terms(std::string_view query) const;

  Options options_;
  std::vector<std::string> docs_;
  std::vector<double> lengths_;
  double avg_length_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

}  // namespace dta
