#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dta {

struct SegmentVector {
  Eigen::VectorXd values;
  bool degenerate = false;  // all-zero input; values stay zero

  Eigen::Index dim() const { return values.size(); }
};

// Unit-normalizes `raw`; an all-zero vector is returned flagged degenerate.
SegmentVector make_segment_vector(Eigen::VectorXd raw);

// Dot product of two unit vectors. Throws on dimension mismatch.
double cosine(const SegmentVector& a, const SegmentVector& b);

// Hashed character n-gram tf-idf.
class Vectorizer {
 public:
  struct Options {
    int min_n = 1;
    int max_n = 3;
    std::size_t dim = 4096;  // power of two
  };

  Vectorizer() : Vectorizer(Options{}) {}
  explicit Vectorizer(Options options);

  // Replaces the document-frequency table with counts over `segments`.
  void fit(const std::vector<std::string>& segments);

  bool fitted() const { return fitted_; }
  const Options& options() const { return options_; }
  std::size_t document_count() const { return documents_; }
  std::uint32_t df(std::size_t slot) const { return df_.at(slot); }

  // Smoothed inverse document frequency of a slot.
  double idf(std::size_t slot) const;

  std::size_t slot_of(std::string_view ngram) const;

  // Hashed n-gram term counts of a text (before weighting).
  std::map<std::size_t, double> term_counts(std::string_view text) const;

  // tf-idf weights before normalization.
  std::map<std::size_t, double> weights(std::string_view text) const;

  SegmentVector embed(std::string_view text) const;

  void save(std::ostream& out) const;
  static Vectorizer load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Vectorizer load(const std::filesystem::path& path);

  bool operator==(const Vectorizer& other) const;

 private:
  std::vector<std::string> ngrams(std::string_view text) const;

  Options options_;
  std::vector<std::uint32_t> df_;
  std::size_t documents_ = 0;
  bool fitted_ = false;
};

}  // namespace dta
