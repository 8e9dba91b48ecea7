#include "dta/bm25.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "dta/error.hpp"

namespace dta {

std::vector<std::string> bm25_terms(std::string_view text, TextMode mode) {
  std::vector<std::string> out;
  if (mode == TextMode::cjk) {
    std::vector<std::string> cps;
    for (auto& cp : utf8_codepoints(text))
      if (!(cp.size() == 1 && std::isspace(static_cast<unsigned char>(cp[0])))) cps.push_back(to_lower_ascii(cp));
    if (cps.size() == 1) out.push_back(cps[0]);
    for (std::size_t i = 0; i + 1 < cps.size(); ++i) out.push_back(cps[i] + cps[i + 1]);
    return out;
  }
  for (auto& word : split_whitespace(text)) {
    std::size_t b = 0, e = word.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(word[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(word[e - 1]))) --e;
    if (e > b) out.push_back(to_lower_ascii(word.substr(b, e - b)));
  }
  return out;
}

Bm25Index::Bm25Index(const std::vector<std::string>& documents, Options options) : options_(options) {
  if (documents.empty()) throw Error("bm25: cannot index an empty collection");
  docs_ = documents;
  lengths_.resize(docs_.size());
  double total = 0.0;
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    std::map<std::string, double> tf;
    auto terms = bm25_terms(docs_[d], options_.mode);
    for (auto& t : terms) tf[t] += 1.0;
    lengths_[d] = std::max<double>(1.0, static_cast<double>(terms.size()));
    total += lengths_[d];
    for (auto& [term, count] : tf) postings_[term].push_back({d, count});
  }
  avg_length_ = total / static_cast<double>(docs_.size());
}

std::size_t Bm25Index::df(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

double Bm25Index::idf(const std::string& term) const {
  const double n = static_cast<double>(docs_.size());
  const double d = static_cast<double>(df(term));
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

std::vector<std::string> Bm25Index::unique_terms(std::string_view query) const {
  auto terms = bm25_terms(query, options_.mode);
  std::set<std::string> seen(terms.begin(), terms.end());
  return {seen.begin(), seen.end()};
}

double Bm25Index::score(std::string_view query, std::size_t doc) const {
  if (doc >= docs_.size()) throw Error("bm25: doc id out of range");
  const double norm = options_.k1 * (1.0 - options_.b + options_.b * lengths_[doc] / avg_length_);
  double s = 0.0;
  for (const auto& term : unique_terms(query)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    auto p = std::lower_bound(it->second.begin(), it->second.end(), doc,
                              [](const Posting& a, std::size_t d) { return a.doc < d; });
    if (p == it->second.end() || p->doc != doc) continue;
    s += idf(term) * p->tf * (options_.k1 + 1.0) / (p->tf + norm);
  }
  return s;
}

double Bm25Index::max_score(std::string_view query) const {
  double s = 0.0;
  for (const auto& term : unique_terms(query)) s += idf(term) * (options_.k1 + 1.0);
  return s;
}

double Bm25Index::normalized_score(std::string_view query, std::size_t doc) const {
  const double upper = max_score(query);
  return upper > 0.0 ? std::clamp(score(query, doc) / upper, 0.0, 1.0) : 0.0;
}

std::vector<Bm25Hit> Bm25Index::recall_topk(std::string_view query, std::size_t k) const {
  if (k < 1) throw Error("bm25: k must be at least 1");
  std::map<std::size_t, double> acc;
  for (const auto& term : unique_terms(query)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = idf(term);
    for (const auto& p : it->second) {
      const double norm = options_.k1 * (1.0 - options_.b + options_.b * lengths_[p.doc] / avg_length_);
      acc[p.doc] += w * p.tf * (options_.k1 + 1.0) / (p.tf + norm);
    }
  }
  std::vector<Bm25Hit> hits;
  hits.reserve(acc.size());
  for (auto& [doc, s] : acc) hits.push_back({doc, s});
  std::stable_sort(hits.begin(), hits.end(), [](const Bm25Hit& a, const Bm25Hit& b) {
    return a.score != b.score ? a.score > b.score : a.doc < b.doc;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

void Bm25Index::save(std::ostream& out) const {
  out << "dta-bm25 1\n" << options_.k1 << ' ' << options_.b << ' ' << to_string(options_.mode) << ' '
      << docs_.size() << '\n';
  for (const auto& d : docs_) out << d << '\n';
}

Bm25Index Bm25Index::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "dta-bm25 1") throw ParseError(1, "not a dta-bm25 v1 file");
  Options options;
  std::string mode;
  std::size_t n = 0;
  if (!(in >> options.k1 >> options.b >> mode >> n)) throw ParseError(2, "bad header");
  options.mode = parse_text_mode(mode);
  std::getline(in, line);
  std::vector<std::string> docs;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw ParseError(3 + i, "truncated document list");
    docs.push_back(line);
  }
  return Bm25Index(docs, options);
}

}  // namespace dta
