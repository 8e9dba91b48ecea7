#include "dta/vectorizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dta/error.hpp"
#include "dta/text.hpp"

namespace dta {

SegmentVector make_segment_vector(Eigen::VectorXd raw) {
  SegmentVector v;
  const double norm = raw.norm();
  if (norm == 0.0 || !std::isfinite(norm)) {
    v.values = Eigen::VectorXd::Zero(raw.size());
    v.degenerate = true;
    return v;
  }
  v.values = raw / norm;
  return v;
}

double cosine(const SegmentVector& a, const SegmentVector& b) {
  if (a.dim() != b.dim())
    throw Error("cosine: dimension mismatch " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  return std::clamp(a.values.dot(b.values), -1.0, 1.0);
}

Vectorizer::Vectorizer(Options options) : options_(options) {
  if (options_.dim == 0 || (options_.dim & (options_.dim - 1)) != 0)
    throw Error("vectorizer dimension must be a power of two");
  if (options_.min_n < 1 || options_.max_n < options_.min_n) throw Error("invalid n-gram range");
  df_.assign(options_.dim, 0);
}

std::vector<std::string> Vectorizer::ngrams(std::string_view text) const {
  const auto cps = utf8_codepoints(to_lower_ascii(collapse_whitespace(text)));
  std::vector<std::string> out;
  for (int n = options_.min_n; n <= options_.max_n; ++n) {
    const auto len = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + len <= cps.size(); ++i) {
      std::string gram;
      for (std::size_t k = 0; k < len; ++k) gram += cps[i + k];
      out.push_back(std::move(gram));
    }
  }
  return out;
}

std::size_t Vectorizer::slot_of(std::string_view ngram) const {
  return static_cast<std::size_t>(fnv1a64(ngram) & (options_.dim - 1));
}

void Vectorizer::fit(const std::vector<std::string>& segments) {
  if (segments.empty()) throw Error("vectorizer fit needs at least one segment");
  df_.assign(options_.dim, 0);
  for (const auto& seg : segments) {
    std::set<std::size_t> seen;
    for (const auto& gram : ngrams(seg)) seen.insert(slot_of(gram));
    for (auto slot : seen) ++df_[slot];
  }
  documents_ = segments.size();
  fitted_ = true;
}

double Vectorizer::idf(std::size_t slot) const {
  const double n = static_cast<double>(documents_);
  return std::log((n + 1.0) / (static_cast<double>(df_.at(slot)) + 1.0)) + 1.0;
}

std::map<std::size_t, double> Vectorizer::term_counts(std::string_view text) const {
  std::map<std::size_t, double> counts;
  for (const auto& gram : ngrams(text)) counts[slot_of(gram)] += 1.0;
  return counts;
}

std::map<std::size_t, double> Vectorizer::weights(std::string_view text) const {
  if (!fitted_) throw Error("vectorizer is not fitted");
  auto w = term_counts(text);
  for (auto& [slot, value] : w) value *= idf(slot);
  return w;
}

SegmentVector Vectorizer::embed(std::string_view text) const {
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(options_.dim));
  for (const auto& [slot, value] : weights(text)) raw[static_cast<Eigen::Index>(slot)] = value;
  return make_segment_vector(std::move(raw));
}

void Vectorizer::save(std::ostream& out) const {
  out << "dta-vectorizer 1\n";
  out << options_.min_n << ' ' << options_.max_n << ' ' << options_.dim << ' ' << documents_ << '\n';
  for (std::size_t slot = 0; slot < df_.size(); ++slot)
    if (df_[slot]) out << slot << ' ' << df_[slot] << '\n';
}

Vectorizer Vectorizer::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "dta-vectorizer 1") throw ParseError(1, "not a dta-vectorizer v1 file");
  Options options;
  std::size_t documents = 0;
  if (!std::getline(in, line)) throw ParseError(2, "missing header");
  {
    std::istringstream header(line);
    if (!(header >> options.min_n >> options.max_n >> options.dim >> documents))
      throw ParseError(2, "bad header");
  }
  Vectorizer v(options);
  std::size_t number = 2;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t slot = 0;
    std::uint32_t count = 0;
    if (!(fields >> slot >> count) || slot >= options.dim) throw ParseError(number, "bad df entry");
    if (count > documents) throw ParseError(number, "df exceeds document count");
    v.df_[slot] = count;
  }
  v.documents_ = documents;
  v.fitted_ = documents > 0;
  return v;
}

void Vectorizer::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  save(out);
}

Vectorizer Vectorizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return load(in);
}

bool Vectorizer::operator==(const Vectorizer& other) const {
  return options_.min_n == other.options_.min_n && options_.max_n == other.options_.max_n &&
         options_.dim == other.options_.dim && documents_ == other.documents_ && df_ == other.df_ &&
         fitted_ == other.fitted_;
}

}  // namespace dta
