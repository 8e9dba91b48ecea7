#include "dta/vocab.hpp"

#include <algorithm>
#include <fstream>

#include "dta/error.hpp"

namespace dta {

Vocab::Vocab() {
  for (const char* t : {"PAD", "UNK", "BOS", "EOS"}) add(t);
}

int Vocab::add(const std::string& token) {
  if (token.empty() || token.find('\n') != std::string::npos) throw Error("vocab: invalid token");
  auto [it, inserted] = ids_.emplace(token, size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

void Vocab::save(std::ostream& out) const {
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(std::istream& in) {
  Vocab v;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number <= static_cast<std::size_t>(kReserved)) {
      if (line != v.tokens_[number - 1]) throw ParseError(number, "reserved token mismatch");
      continue;
    }
    if (v.contains(line)) throw ParseError(number, "duplicate token '" + line + "'");
    v.add(line);
  }
  if (number < static_cast<std::size_t>(kReserved)) throw ParseError(number, "truncated vocabulary");
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  save(out);
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return load(in);
}

void add_by_frequency(Vocab& vocab, const std::unordered_map<std::string, std::size_t>& counts,
                      std::size_t min_freq) {
  std::vector<std::pair<std::string, std::size_t>> items;
  for (const auto& [tok, n] : counts)
    if (n >= min_freq) items.emplace_back(tok, n);
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (const auto& [tok, n] : items) vocab.add(tok);
}

}  // namespace dta
