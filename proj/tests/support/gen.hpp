#pragma once

#include <string>
#include <vector>

#include "dta/corpus.hpp"
#include "dta/random.hpp"

// Hand-rolled generators for property tests.
namespace dta::testing {

inline constexpr int kTrials = 60;

inline std::string word(Rng& rng, std::size_t alphabet = 8, std::size_t max_len = 5) {
  std::string w;
  for (std::size_t i = 0, n = 1 + rng.below(max_len); i < n; ++i) w += static_cast<char>('a' + rng.below(alphabet));
  return w;
}

inline std::string sentence(Rng& rng, std::size_t max_words = 6, const char* end = ".") {
  std::string s;
  for (std::size_t i = 0, n = 1 + rng.below(max_words); i < n; ++i) s += (i ? " " : "") + word(rng);
  return s + end;
}

inline std::vector<std::string> words(Rng& rng, std::size_t max_words = 8) {
  std::vector<std::string> out;
  for (std::size_t i = 0, n = rng.below(max_words + 1); i < n; ++i) out.push_back(word(rng, 6, 3));
  return out;
}

// A valid dialogue: user/staff alternation with optional API records before
// a staff reply.
inline Dialogue dialogue(Rng& rng, const std::string& id) {
  static const char* apis[] = {"check_order_status", "lock_bike", "reduce_fee", "query_refund"};
  Dialogue d{id, {}};
  for (std::size_t e = 0, n = 1 + rng.below(4); e < n; ++e) {
    d.turns.push_back({Speaker::user, sentence(rng, 6, "?"), std::nullopt, std::nullopt});
    if (rng.chance(0.3)) {
      ApiCall call{apis[rng.below(4)], {{"order_id", "BK" + std::to_string(rng.below(1000))}}};
      std::optional<std::string> result;
      if (rng.chance(0.7)) result = "ok \"" + word(rng) + "\"";
      d.turns.push_back({Speaker::staff, "", call, result});
    }
    std::string reply = sentence(rng);
    if (rng.chance(0.5)) reply += " " + sentence(rng, 4, "!");
    d.turns.push_back({Speaker::staff, reply, std::nullopt, std::nullopt});
  }
  return d;
}

}  // namespace dta::testing
