#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace dta {

// Bijective token <-> id map with PAD=0, UNK=1, BOS=2, EOS=3 reserved.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  Vocab();

  // Returns the existing id when the token is already present.
  int add(const std::string& token);

  int id(const std::string& token) const;  // UNK when absent
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  // One token per line, in id order.
  void save(std::ostream& out) const;
  static Vocab load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Adds tokens with count >= min_freq ordered by (-count, token).
void add_by_frequency(Vocab& vocab, const std::unordered_map<std::string, std::size_t>& counts,
                      std::size_t min_freq);

}  // namespace dta
