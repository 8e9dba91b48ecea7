#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "../support/gen.hpp"
#include "dta/api.hpp"
#include "dta/error.hpp"
#include "dta/generator.hpp"
#include "dta/segmenter.hpp"

using namespace dta;

namespace {

Turn user(std::string text) { return {Speaker::user, std::move(text), std::nullopt, std::nullopt}; }
Turn staff(std::string text) { return {Speaker::staff, std::move(text), std::nullopt, std::nullopt}; }
Turn api(std::string name, std::optional<std::string> result = std::nullopt) {
  return {Speaker::staff, "", ApiCall{std::move(name), {{"order_id", "BK1"}}}, std::move(result)};
}

std::vector<Dialogue> sample_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Dialogue> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::dialogue(rng, "d" + std::to_string(i)));
  return out;
}

}  // namespace

TEST_CASE("save then load returns the same corpus") {
  Rng rng(11);
  for (int trial = 0; trial < testing::kTrials; ++trial) {
    std::vector<Dialogue> corpus;
    for (std::size_t i = 0, n = rng.below(5); i < n; ++i)
      corpus.push_back(testing::dialogue(rng, "t" + std::to_string(trial) + "-" + std::to_string(i)));
    std::stringstream buf;
    write_corpus(buf, corpus);
    CHECK(read_corpus(buf) == corpus);
  }
}

TEST_CASE("reading records") {
  SUBCASE("two lines") {
    std::stringstream in(R"({"id": "a", "turns": [{"speaker": "user", "text": "hi"}]}
{"id": "b", "turns": [{"speaker": "user", "text": "x"}, {"speaker": "staff", "text": "", "api_call": {"name": "lock_bike", "args": {"order_id": "BK1"}}, "api_result": "locked"}]}
)");
    const auto corpus = read_corpus(in);
    REQUIRE(corpus.size() == 2);
    CHECK(corpus[1].turns[1].api_call->args.at("order_id") == "BK1");
    CHECK(corpus[1].turns[1].api_result == "locked");
  }
  SUBCASE("empty input") {
    std::stringstream in("");
    CHECK(read_corpus(in).empty());
  }
  SUBCASE("missing turns names the line") {
    std::stringstream in("{\"id\": \"a\", \"turns\": []}\n{\"id\": \"b\"}\n");
    try {
      read_corpus(in);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("turns") != std::string::npos);
    }
  }
  SUBCASE("duplicate id") {
    std::stringstream in("{\"id\": \"a\", \"turns\": []}\n{\"id\": \"a\", \"turns\": []}\n");
    CHECK_THROWS_AS(read_corpus(in), ParseError);
  }
  SUBCASE("unknown speaker") {
    std::stringstream in(R"({"id": "a", "turns": [{"speaker": "bot", "text": "x"}]})");
    CHECK_THROWS_AS(read_corpus(in), ParseError);
  }
}

TEST_CASE("dialogue invariants") {
  CHECK_NOTHROW(validate_dialogue({"ok", {user("a"), api("lock_bike", "locked"), staff("done."), user("b")}}));
  CHECK_THROWS_AS(validate_dialogue({"s", {staff("hello.")}}), Error);
  CHECK_THROWS_AS(validate_dialogue({"e", {user("a"), staff("")}}), Error);
  CHECK_THROWS_AS(validate_dialogue({"u", {user("a"), user("b")}}), Error);
  CHECK_THROWS_AS(validate_dialogue({"ss", {user("a"), staff("x."), staff("y.")}}), Error);
  Turn orphan = staff("x.");
  orphan.api_result = "r";
  CHECK_THROWS_AS(validate_dialogue({"r", {user("a"), orphan}}), Error);
}

TEST_CASE("reply spans group API records with the text that follows") {
  const Dialogue d{"x", {user("a"), api("check_order_status"), api("lock_bike"), staff("ok."), user("b"), staff("c.")}};
  const auto spans = reply_spans(d);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].user_turn == 0);
  CHECK(spans[0].first == 1);
  CHECK(spans[0].last == 4);
  CHECK(spans[1].first == 5);
  CHECK(spans[1].last == 6);
}

TEST_CASE("split sizes and determinism") {
  const auto ten = sample_corpus(10, 1);
  const auto s = split_corpus(ten, {0.8, 0.1, 0.1}, 5);
  CHECK(s.train.size() == 8);
  CHECK(s.dev.size() == 1);
  CHECK(s.test.size() == 1);

  const auto one = split_corpus(sample_corpus(1, 2), {1.0, 0.0, 0.0}, 5);
  CHECK(one.train.size() == 1);
  CHECK(one.dev.empty());

  const auto again = split_corpus(ten, {0.8, 0.1, 0.1}, 5);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);

  CHECK_THROWS_AS(split_corpus(ten, {0.5, 0.1, 0.1}, 1), Error);
  CHECK_THROWS_AS(split_corpus(sample_corpus(2, 1), {0.8, 0.1, 0.1}, 1), Error);
}

TEST_CASE("split partitions the corpus") {
  Rng rng(3);
  for (int trial = 0; trial < testing::kTrials; ++trial) {
    const std::size_t n = 3 + rng.below(40);
    const auto corpus = sample_corpus(n, rng.next());
    const double dev = 0.05 + 0.2 * rng.uniform(), test = 0.05 + 0.2 * rng.uniform();
    const auto s = split_corpus(corpus, {1.0 - dev - test, dev, test}, rng.next());
    std::multiset<std::string> ids;
    for (const auto* part : {&s.train, &s.dev, &s.test})
      for (const auto& d : *part) ids.insert(d.id);
    std::multiset<std::string> want;
    for (const auto& d : corpus) want.insert(d.id);
    CHECK(ids == want);
  }
}

TEST_CASE("stats") {
  const std::vector<Dialogue> c{{"a", {user("x"), staff("y.")}}, {"b", {user("x"), staff("y."), user("z")}}};
  const auto s = corpus_stats(c, 7);
  CHECK(s.dialog_count == 2);
  CHECK(s.total_turns == 5);
  CHECK(s.avg_turns_per_dialog == doctest::Approx(2.5));
  CHECK(s.action_count == 7);
}

TEST_CASE("synthetic corpus") {
  const auto a = generate_synthetic(GeneratorConfig{}, 9);
  const auto stats = corpus_stats(a.dialogues);
  CHECK(stats.dialog_count == 1000);
  CHECK(stats.avg_turns_per_dialog == doctest::Approx(6.65).epsilon(0.5 / 6.65));

  std::set<std::string> distinct(a.catalogue.begin(), a.catalogue.end());
  CHECK(distinct.size() == 150);

  const auto b = generate_synthetic(GeneratorConfig{}, 9);
  std::stringstream sa, sb;
  write_corpus(sa, a.dialogues);
  write_corpus(sb, b.dialogues);
  CHECK(sa.str() == sb.str());

  const auto labels = a.label_index();
  std::size_t api_turns = 0;
  for (const auto& d : a.dialogues) {
    CHECK_NOTHROW(validate_dialogue(d));
    for (const auto& t : d.turns) {
      if (t.speaker != Speaker::staff) continue;
      if (t.is_api()) {
        ++api_turns;
        CHECK(is_known_api(t.api_call->name));
        continue;
      }
      for (const auto& seg : segment_utterance(t.text)) CHECK(labels.count(seg) == 1);
    }
  }
  CHECK(api_turns > 0);

  // gold annotation agrees with the text
  std::map<std::string, const Dialogue*> by_id;
  for (const auto& d : a.dialogues) by_id[d.id] = &d;
  for (const auto& g : a.gold) {
    const Turn& t = by_id.at(g.dialogue_id)->turns.at(g.turn_index);
    if (!g.api.empty()) {
      CHECK(t.api_call->name == g.api);
      continue;
    }
    const auto segs = segment_utterance(t.text);
    REQUIRE(segs.size() == g.templates.size());
    for (std::size_t k = 0; k < segs.size(); ++k) CHECK(labels.at(segs[k]) == g.templates[k]);
  }
}

TEST_CASE("generator config") {
  std::stringstream in("# small\ndialogs = 12\ntemplates = 30\nvariants = 3\n");
  const auto c = parse_generator_config(in);
  CHECK(c.dialog_count == 12);
  CHECK(c.variants == 3);
  const auto corpus = generate_synthetic(c, 1);
  CHECK(corpus.dialogues.size() == 12);
  CHECK(corpus.catalogue.size() == 90);

  std::stringstream bad("colour = red\n");
  CHECK_THROWS_AS(parse_generator_config(bad), ParseError);
  GeneratorConfig none;
  none.dialog_count = 0;
  CHECK_THROWS_AS(generate_synthetic(none, 1), Error);
}

TEST_CASE("gold annotation round trip") {
  GeneratorConfig c;
  c.dialog_count = 15;
  const auto corpus = generate_synthetic(c, 4);
  std::stringstream buf;
  write_gold(buf, corpus.gold);
  const auto back = read_gold(buf);
  REQUIRE(back.size() == corpus.gold.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].dialogue_id == corpus.gold[i].dialogue_id);
    CHECK(back[i].turn_index == corpus.gold[i].turn_index);
    CHECK(back[i].templates == corpus.gold[i].templates);
    CHECK(back[i].api == corpus.gold[i].api);
  }
}
