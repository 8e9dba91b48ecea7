#include "dta/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "dta/error.hpp"

namespace dta {

namespace {

std::map<Tokens, std::size_t> ngrams(const Tokens& tokens, std::size_t n) {
  std::map<Tokens, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

void finish(Prf& p) {
  p.precision = p.tp + p.fp ? static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp) : 0.0;
  p.recall = p.tp + p.fn ? static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fn) : 0.0;
  p.f1 = p.precision + p.recall > 0 ? 2 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double bleu4(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references) {
  if (hypotheses.size() != references.size())
    throw Error("bleu4: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                std::to_string(references.size()) + " references");
  if (references.empty()) throw Error("bleu4: no references");
  std::size_t c = 0, r = 0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    std::size_t matched = 0, total = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
      const auto hyp = ngrams(hypotheses[i], n);
      const auto ref = ngrams(references[i], n);
      for (const auto& [gram, count] : hyp) {
        total += count;
        if (auto it = ref.find(gram); it != ref.end()) matched += std::min(count, it->second);
      }
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
  }
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    c += hypotheses[i].size();
    r += references[i].size();
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * std::exp(log_sum / 4.0);
}

ApiReport api_prf(const std::vector<std::vector<std::string>>& predicted,
                  const std::vector<std::vector<std::string>>& gold) {
  if (predicted.size() != gold.size()) throw Error("api_prf: turn lists are not aligned");
  ApiReport report;
  std::set<std::string> gold_names;
  for (std::size_t t = 0; t < gold.size(); ++t) {
    const std::set<std::string> p(predicted[t].begin(), predicted[t].end());
    const std::set<std::string> g(gold[t].begin(), gold[t].end());
    for (const auto& name : p) {
      auto& row = report.per_api[name];
      if (g.count(name))
        ++row.tp;
      else
        ++row.fp;
    }
    for (const auto& name : g) {
      gold_names.insert(name);
      if (!p.count(name)) ++report.per_api[name].fn;
    }
  }
  for (auto& [name, row] : report.per_api) finish(row);
  for (const auto& name : gold_names) {
    const auto& row = report.per_api.at(name);
    report.macro.precision += row.precision;
    report.macro.recall += row.recall;
    report.macro.f1 += row.f1;
  }
  if (!gold_names.empty()) {
    const double n = static_cast<double>(gold_names.size());
    report.macro.precision /= n;
    report.macro.recall /= n;
    report.macro.f1 /= n;
  }
  return report;
}

Prf micro_prf(const std::vector<std::vector<std::string>>& predicted,
              const std::vector<std::vector<std::string>>& gold) {
  if (predicted.size() != gold.size()) throw Error("micro_prf: turn lists are not aligned");
  Prf out;
  for (std::size_t t = 0; t < gold.size(); ++t) {
    std::map<std::string, long> bag;
    for (const auto& g : gold[t]) ++bag[g];
    std::size_t tp = 0;
    for (const auto& p : predicted[t])
      if (auto it = bag.find(p); it != bag.end() && it->second > 0) {
        --it->second;
        ++tp;
      }
    out.tp += tp;
    out.fp += predicted[t].size() - tp;
    out.fn += gold[t].size() - tp;
  }
  finish(out);
  return out;
}

std::vector<std::string> reply_word_set(const std::string& text, TextMode mode) {
  std::vector<std::string> words;
  if (mode == TextMode::ascii) {
    words = split_whitespace(to_lower_ascii(text));
  } else {
    for (auto& cp : utf8_codepoints(text))
      if (!collapse_whitespace(cp).empty()) words.push_back(std::move(cp));
  }
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return words;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t common = 0;
  for (const auto& w : sa) common += sb.count(w);
  const std::size_t uni = sa.size() + sb.size() - common;
  return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

double jaccard_repetition(const std::vector<std::vector<std::string>>& dialogues, TextMode mode,
                          JaccardAggregation aggregation) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& replies : dialogues) {
    std::vector<std::vector<std::string>> seen;
    for (const auto& reply : replies) {
      auto words = reply_word_set(reply, mode);
      if (words.empty()) continue;
      if (!seen.empty()) {
        double agg = 0.0;
        for (const auto& prev : seen) {
          const double j = jaccard(words, prev);
          agg = aggregation == JaccardAggregation::max ? std::max(agg, j) : agg + j;
        }
        if (aggregation == JaccardAggregation::mean) agg /= static_cast<double>(seen.size());
        total += agg;
        ++count;
      }
      seen.push_back(std::move(words));
    }
  }
  if (count == 0) throw Error("jaccard_repetition: no reply has a predecessor in its dialogue");
  return total / static_cast<double>(count);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("spearman: need two aligned series of length >= 2");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace dta
