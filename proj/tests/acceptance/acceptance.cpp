// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Usage: acceptance [name ...] to run a subset.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "../support/gradcheck.hpp"
#include "dta/api.hpp"
#include "dta/error.hpp"
#include "dta/generator.hpp"
#include "dta/pipeline.hpp"
#include "dta/service.hpp"

using namespace dta;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

constexpr std::uint64_t kSeed = 42;

// The 1,000-dialogue run shared by the end-to-end, reliability, reranker,
// efficiency and service criteria.
struct SyntheticRun {
  SyntheticCorpus corpus;
  PipelineRun run;
  EvalReport report;
  double purity = 0.0;
  double standardization_accuracy = 0.0;
  std::size_t standardized_segments = 0;
  double seconds = 0.0;
};

std::optional<SyntheticRun> g_run;

// Clustered action -> majority gold template, weighted by segment frequency.
std::map<std::string, std::size_t> majority_template(const ActionDiscovery& d,
                                                     const std::unordered_map<std::string, std::size_t>& labels) {
  std::map<std::string, std::map<std::size_t, std::size_t>> votes;
  for (std::size_t i = 0; i < d.segments.size(); ++i)
    votes[ActionId::clustered(d.clustering.assignment[i]).tag()][labels.at(d.segments[i].text)] +=
        d.segments[i].frequency;
  std::map<std::string, std::size_t> out;
  for (const auto& [tag, counts] : votes) {
    std::size_t best = 0, best_count = 0;
    for (const auto& [t, n] : counts)
      if (n > best_count) best = t, best_count = n;
    out[tag] = best;
  }
  return out;
}

SyntheticRun& synthetic_run() {
  if (g_run) return *g_run;
  const auto start = Clock::now();
  SyntheticRun r;
  r.corpus = generate_synthetic(GeneratorConfig{}, kSeed);
  PipelineConfig config;
  config.seed = kSeed;
  r.run = run_pipeline(r.corpus.dialogues, config);

  const auto labels = r.corpus.label_index();
  std::vector<std::size_t> gold;
  for (const auto& s : r.run.discovery.segments) gold.push_back(labels.at(s.text));
  r.purity = cluster_purity(r.run.discovery.clustering.assignment, gold);

  // standardized tags of held-out turns against the generator's annotation
  const auto majority = majority_template(r.run.discovery, labels);
  std::map<std::pair<std::string, std::size_t>, const GoldTurn*> gold_turns;
  for (const auto& g : r.corpus.gold) gold_turns[{g.dialogue_id, g.turn_index}] = &g;
  std::size_t correct = 0;
  for (const auto& t : r.run.test_std) {
    const GoldTurn& g = *gold_turns.at({t.dialogue_id, t.turn_index});
    if (!g.api.empty()) continue;
    for (std::size_t k = 0; k < g.templates.size(); ++k) {
      ++r.standardized_segments;
      if (k >= t.actions.size()) continue;
      auto it = majority.find(t.actions[k].tag());
      if (it != majority.end() && it->second == g.templates[k]) ++correct;
    }
  }
  r.standardization_accuracy = static_cast<double>(correct) / static_cast<double>(r.standardized_segments);
  r.report = evaluate(r.run.bundle, r.run.split.test, r.run.test_std, kSeed);
  r.seconds = seconds_since(start);
  g_run = std::move(r);
  return *g_run;
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  const auto start = Clock::now();
  ModelConfig c;
  c.encoder_vocab = 20;
  c.decoder_vocab = 6;
  c.embedding_dim = 8;
  c.hidden = 8;
  c.dropout = 0.0;
  c.init_range = 0.5;
  Seq2Seq<double> model(c, 7);
  const std::vector<Example> data{
      {{4, 5, 6, 7, 8}, {4, 5}}, {{9, 10, 11}, {5}}, {{12, 13, 14, 15, 16, 17, 18, 19}, {4, 4, 5}}};
  std::vector<const Example*> batch;
  for (const auto& e : data) batch.push_back(&e);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& row : testing::gradient_check(model, batch, 1e-4))
    if (row.max_rel >= worst) worst = row.max_rel, worst_name = row.name;
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 10.0,
          fmt::format("max relative error {:.2e} ({}), {:.2f}s", worst, worst_name, secs)};
}

Outcome overfit() {
  const auto start = Clock::now();
  GeneratorConfig gc;
  gc.dialog_count = 20;
  const auto syn = generate_synthetic(gc, kSeed);
  const auto labels = syn.label_index();

  // gold template annotation stands in for the clustered actions
  std::vector<std::string> occurrences;
  for (const auto& s : segment_corpus(syn.dialogues)) occurrences.push_back(s.text);
  const auto segments = count_segments(occurrences);
  std::map<std::size_t, std::size_t> dense;  // template -> action index, for templates that occur
  std::vector<std::size_t> assignment;
  for (const auto& s : segments)
    assignment.push_back(dense.emplace(labels.at(s.text), dense.size()).first->second);
  const auto registry =
      build_registry(assignment, segments, {kApiInventory.begin(), kApiInventory.end()}, dense.size());
  std::vector<StandardizedTurn> actions;
  for (const auto& g : syn.gold) {
    StandardizedTurn t{g.dialogue_id, g.turn_index, {}, {}};
    if (!g.api.empty()) t.actions.push_back(ActionId::api(g.api));
    for (auto k : g.templates) t.actions.push_back(ActionId::clustered(dense.at(k)));
    t.confidence.assign(t.actions.size(), 1.0);
    actions.push_back(std::move(t));
  }
  const auto exchanges = corpus_exchanges(syn.dialogues, actions, TextMode::ascii);
  const auto vocab = build_vocab(exchanges, registry, OutputMode::actions);
  const auto examples = make_examples(exchanges, vocab, OutputMode::actions, 3, HistoryMode::full);

  PipelineConfig pc;
  pc.dropout = 0.0;
  pc.seed = kSeed;
  auto model = make_model(pc, vocab);
  TrainOptions opt;
  opt.learning_rate = 3e-3;
  opt.epochs = 200;
  opt.dropout = false;
  opt.keep_best = false;
  opt.clean_loss = true;
  opt.stop_below = 0.05;
  opt.seed = kSeed;
  const auto result = fit(model, examples, {}, opt);
  const double loss = evaluate_loss(model, examples);

  Generator<float> generator(model);
  std::size_t exact = 0;
  for (const auto& e : examples)
    if (generator.decode(e.source, kMaxActions).ids == e.target) ++exact;
  const double secs = seconds_since(start);
  return {loss < 0.05 && exact == examples.size() && result.epochs.size() <= 200 && secs < 60.0,
          fmt::format("{} pairs, loss {:.4f} after {} epochs, exact match {}/{}, {:.1f}s", examples.size(), loss,
                      result.epochs.size(), exact, examples.size(), secs)};
}

Outcome end_to_end() {
  const auto& r = synthetic_run();
  const auto& rep = r.report;
  const bool pass = rep.actions.f1 >= 0.90 && rep.api.macro.f1 >= 0.90 && r.standardization_accuracy >= 0.95 &&
                    r.purity >= 0.95 && r.seconds < 15 * 60;
  return {pass, fmt::format("micro-F1 {:.4f}, macro API F1 {:.4f}, standardization {:.4f} ({} segments), purity "
                            "{:.4f}, {:.0f}s",
                            rep.actions.f1, rep.api.macro.f1, r.standardization_accuracy, r.standardized_segments,
                            r.purity, r.seconds)};
}

// Independent word-set Jaccard repetition with max aggregation.
double jaccard_oracle(const std::vector<std::vector<std::string>>& dialogues) {
  double total = 0.0;
  int count = 0;
  for (const auto& replies : dialogues) {
    std::vector<std::set<std::string>> earlier;
    for (const auto& reply : replies) {
      std::set<std::string> words;
      std::istringstream in(reply);
      for (std::string w; in >> w;) {
        for (auto& ch : w) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        words.insert(w);
      }
      if (words.empty()) continue;
      if (!earlier.empty()) {
        double best = 0.0;
        for (const auto& prev : earlier) {
          std::size_t common = 0;
          for (const auto& w : words) common += prev.count(w);
          const double uni = static_cast<double>(words.size() + prev.size() - common);
          best = std::max(best, static_cast<double>(common) / uni);
        }
        total += best;
        ++count;
      }
      earlier.push_back(words);
    }
  }
  return total / count;
}

Outcome reliability() {
  const std::vector<std::vector<std::string>> hand = {
      {"a b", "a b", "c d"},
      {"hello there", "hello again there", "goodbye"},
      {"The bike is locked", "the BIKE is locked now", "fee reduced"},
      {"x", "y", "z", "x y z"},
      {"one two three", "three two one", "one"},
      {"a", "a", "a", "a"},
      {"p q r s", "s t u v", "v w x y", "y z p q"},
      {"sorry for that", "", "sorry again", "that is all"},
      {"a b c d e f", "a", "b", "a b"},
      {"Hi", "hi", "HI there"},
      {"red green", "green blue", "blue red", "red green blue"},
      {"lock it", "locked it", "it is locked"},
      {"k1 k2 k3", "k4 k5", "k1 k5", "k2 k4", "k3"},
      {"same same same", "same"},
      {"alpha beta", "gamma delta", "epsilon"},
      {"w1 w2 w3 w4", "w1 w2", "w3 w4", "w1 w3", "w2 w4", "w1 w2 w3 w4"},
      {"order checked", "order locked", "order reduced", "order closed"},
      {"m n", "n o", "o p", "p m", "m n o p"},
      {"one reply only", "then two"},
      {"a b c", "d e f", "a d", "b e", "c f", "a b c d e f"},
  };
  const double got = jaccard_repetition(hand, TextMode::ascii, JaccardAggregation::max);
  const double want = jaccard_oracle(hand);
  const auto& rep = synthetic_run().report;
  const bool pass = std::abs(got - want) <= 1e-12 && rep.jaccard < rep.jaccard_argmax;
  return {pass, fmt::format("oracle |diff| {:.1e} on {} dialogues; sampling {:.4f} vs most-frequent {:.4f} "
                            "(reference {:.4f})",
                            std::abs(got - want), hand.size(), rep.jaccard, rep.jaccard_argmax,
                            rep.jaccard_reference)};
}

std::vector<std::string> words(const std::string& s) { return split_whitespace(s); }

Outcome metric_oracles() {
  std::vector<std::string> notes;
  bool ok = true;
  struct BleuCase {
    std::vector<std::pair<std::string, std::string>> pairs;  // hypothesis, reference
    double expected;
  };
  const std::vector<BleuCase> cases = {
      {{{"a b c d e", "a b c d e"}}, 1.0},
      {{{"a b c d", "a b c d e"}}, std::exp(-0.25)},
      {{{"a b c d", "a b d c"}}, 0.0},
      {{{"a b c d e f", "a b c d e f"}, {"a b c x", "a b c y"}},
       std::pow(0.9 * 0.875 * (5.0 / 6.0) * 0.75, 0.25)},
      {{{"a a b c d", "a b c d e f"}}, std::exp(-0.2) * std::pow(0.8 * 0.75 * (2.0 / 3.0) * 0.5, 0.25)},
  };
  double worst = 0.0;
  for (const auto& c : cases) {
    std::vector<Tokens> hyp, ref;
    for (const auto& [h, r] : c.pairs) {
      hyp.push_back(words(h));
      ref.push_back(words(r));
    }
    worst = std::max(worst, std::abs(bleu4(hyp, ref) - c.expected));
  }
  ok = ok && worst <= 1e-9;
  notes.push_back(fmt::format("bleu4 max |diff| {:.1e}", worst));

  // A: P = 1, R = 1/2; B: P = 1/2, R = 1
  const auto api = api_prf({{"A"}, {}, {"B"}, {"B"}}, {{"A"}, {"A"}, {"B"}, {}});
  const bool api_ok = api.macro.f1 == 2.0 / 3.0 && api.per_api.at("A").f1 == 2.0 / 3.0;
  ok = ok && api_ok;
  notes.push_back(fmt::format("api macro F1 {:.17g}", api.macro.f1));

  // BM25 ranking against direct scoring of every document
  Rng rng(kSeed);
  const std::vector<std::string> vocab = {"bike", "lock", "fee", "order", "refund", "ride", "photo", "park",
                                          "helmet", "card", "deposit", "app", "time", "money", "sorry", "help"};
  std::vector<std::string> docs;
  for (int d = 0; d < 100; ++d) {
    std::string text;
    const std::size_t len = 2 + rng.below(10);
    for (std::size_t i = 0; i < len; ++i) text += (i ? " " : "") + vocab[rng.below(vocab.size())];
    docs.push_back(text);
  }
  const Bm25Index index(docs);
  std::vector<std::vector<std::string>> doc_terms;
  double avg = 0.0;
  for (const auto& d : docs) {
    doc_terms.push_back(bm25_terms(d, TextMode::ascii));
    avg += static_cast<double>(doc_terms.back().size());
  }
  avg /= static_cast<double>(docs.size());
  const double k1 = 1.2, b = 0.75, n = static_cast<double>(docs.size());
  std::size_t mismatched = 0;
  for (int q = 0; q < 30; ++q) {
    std::string query;
    for (std::size_t i = 0, len = 1 + rng.below(4); i < len; ++i) query += (i ? " " : "") + vocab[rng.below(vocab.size())];
    const auto qterms = bm25_terms(query, TextMode::ascii);
    const std::set<std::string> unique(qterms.begin(), qterms.end());
    std::vector<Bm25Hit> brute;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      double s = 0.0;
      bool any = false;
      for (const auto& t : unique) {
        double df = 0.0;
        for (const auto& terms : doc_terms) df += std::count(terms.begin(), terms.end(), t) > 0 ? 1.0 : 0.0;
        const double tf = static_cast<double>(std::count(doc_terms[d].begin(), doc_terms[d].end(), t));
        if (tf == 0.0) continue;
        any = true;
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        const double dl = static_cast<double>(doc_terms[d].size());
        s += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avg));
      }
      if (any) brute.push_back({d, s});
    }
    std::stable_sort(brute.begin(), brute.end(), [](const Bm25Hit& x, const Bm25Hit& y) {
      return x.score != y.score ? x.score > y.score : x.doc < y.doc;
    });
    const auto hits = index.recall_topk(query, docs.size());
    bool same = hits.size() == brute.size();
    for (std::size_t i = 0; same && i < hits.size(); ++i)
      same = hits[i].doc == brute[i].doc && std::abs(hits[i].score - brute[i].score) <= 1e-12;
    if (!same) ++mismatched;
  }
  ok = ok && mismatched == 0;
  notes.push_back(fmt::format("bm25 rankings differing {}/30 on 100 docs", mismatched));
  std::string detail;
  for (const auto& s : notes) detail += (detail.empty() ? "" : "; ") + s;
  return {ok, detail};
}

Outcome reranker_protocol() {
  auto& r = synthetic_run();
  const auto& registry = r.run.discovery.registry;
  const auto index = registry_index(registry);
  const auto samples = build_pair_samples(registry, index, kSeed, 4);
  std::size_t pos = 0, neg = 0;
  for (const auto& s : samples) (s.positive ? pos : neg)++;
  const auto& trained = r.run.reranker;
  const bool pass = pos > 0 && neg == 4 * pos && trained.negatives == 4 * trained.positives &&
                    trained.heldout_accuracy >= 0.9;
  return {pass, fmt::format("{} positives, {} negatives; training pairs {}:{}; held-out accuracy {:.4f} on {} pairs",
                            pos, neg, trained.positives, trained.negatives, trained.heldout_accuracy,
                            trained.heldout)};
}

Outcome sampling_law() {
  const std::vector<SegmentCount> members{{"often", 3}, {"rarely", 1}};
  const auto registry = build_registry({0, 0}, members, {}, 1);
  Rng rng(kSeed);
  const int n = 10000;
  int often = 0;
  for (int i = 0; i < n; ++i) often += sample_segment(registry, ActionId::clustered(0), rng) == "often";
  const double p = static_cast<double>(often) / n;
  const double e1 = 0.75 * n, e2 = 0.25 * n;
  const double chi2 = (often - e1) * (often - e1) / e1 + ((n - often) - e2) * ((n - often) - e2) / e2;
  const double pvalue = std::erfc(std::sqrt(chi2 / 2.0));  // one degree of freedom
  return {std::abs(p - 0.75) <= 0.02 && pvalue > 0.01,
          fmt::format("P = {:.4f} over {} draws, chi-square {:.3f}, p = {:.3f}", p, n, chi2, pvalue)};
}

Outcome efficiency() {
  auto& r = synthetic_run();
  PipelineConfig config = r.run.bundle.config;
  config.output = OutputMode::tokens;
  // latency depends on the dimensions and the reply length, not on how far
  // training went, so the token model gets a shorter schedule
  config.train.learning_rate = 1e-3;
  config.train.epochs = 12;
  const auto token_run = run_pipeline(r.corpus.dialogues, config);
  const auto& split = r.run.split;
  std::vector<Dialogue> dialogues = split.train;
  dialogues.insert(dialogues.end(), split.dev.begin(), split.dev.end());
  dialogues.insert(dialogues.end(), split.test.begin(), split.test.end());
  std::vector<StandardizedTurn> actions = r.run.train_std.turns;
  actions.insert(actions.end(), r.run.dev_std.begin(), r.run.dev_std.end());
  actions.insert(actions.end(), r.run.test_std.begin(), r.run.test_std.end());
  const auto reports = measure_latency({&r.run.bundle, &token_run.bundle}, dialogues, actions, 50, kSeed);
  const auto cmp = compare_latency(reports[0].buckets, reports[1].buckets);
  bool pass = cmp.spearman && *cmp.spearman > 0.8;
  std::size_t long_buckets = 0;
  std::string rows;
  for (const auto& row : cmp.rows) {
    rows += fmt::format(" [{},{}] {:.2f}/{:.2f}ms x{:.1f};", row.lo, row.hi, row.fast_mean, row.slow_mean, row.ratio);
    if (row.lo >= 20) {
      ++long_buckets;
      pass = pass && row.ratio >= 2.0;
    }
  }
  pass = pass && long_buckets > 0;
  return {pass, fmt::format("spearman {:.3f};{}", cmp.spearman.value_or(0.0), rows)};
}

Outcome service_loop() {
  auto& r = synthetic_run();
  const ModelBundle& bundle = r.run.bundle;
  ModelPolicy policy(bundle);
  const std::vector<std::string> script = {"hello",
                                           "I forgot to lock my bike after the ride",
                                           "yes please lock it",
                                           "can you reduce the fee",
                                           "thanks",
                                           "no, that is all"};
  auto play = [&](const std::string& id) {
    ChatService service(bundle.registry, policy, ServiceOptions{kSeed});
    for (const auto& m : script) service.handle_chat(id, m);
    return *service.transcript(id);
  };
  const auto first = play("acceptance");
  const auto replay = play("acceptance");

  std::vector<std::string> calls;
  bool traces = first.replies.size() == script.size();
  for (const auto& reply : first.replies) {
    traces = traces && !reply.error && !reply.actions.empty() && !(reply.segments.empty() && reply.api_calls.empty());
    for (const auto& c : reply.api_calls) calls.push_back(c.name);
  }
  bool ordered = false;
  {
    const std::vector<std::string> want = {"check_order_status", "lock_bike", "reduce_fee"};
    std::size_t k = 0;
    for (const auto& c : calls)
      if (k < want.size() && c == want[k]) ++k;
    ordered = k == want.size();
  }
  bool consistent = first.order.locked && first.order.fee_reduced;
  try {
    validate_dialogue(first.dialogue);
  } catch (const Error&) {
    consistent = false;
  }
  std::size_t api_records = 0;
  for (const auto& t : first.dialogue.turns)
    if (t.is_api()) api_records += t.api_result.has_value();
  consistent = consistent && api_records == calls.size();
  bool same = replay.dialogue == first.dialogue && replay.order == first.order;
  for (std::size_t i = 0; same && i < first.replies.size(); ++i)
    same = replay.replies[i].actions == first.replies[i].actions && replay.replies[i].text == first.replies[i].text;
  std::string seq;
  for (const auto& c : calls) seq += (seq.empty() ? "" : " -> ") + c;
  return {traces && ordered && consistent && same,
          fmt::format("api calls {}; traces {}, state {}, replay {}", seq, traces ? "ok" : "missing",
                      consistent ? "consistent" : "inconsistent", same ? "identical" : "diverged")};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient-check", gradient_check},
      {"overfit", overfit},
      {"metric-oracles", metric_oracles},
      {"sampling-law", sampling_law},
      {"end-to-end", end_to_end},
      {"reranker-protocol", reranker_protocol},
      {"reliability", reliability},
      {"efficiency", efficiency},
      {"service-loop", service_loop},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS  " : "FAIL  ") << name << "  " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
