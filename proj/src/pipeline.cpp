#include "dta/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dta/api.hpp"
#include "dta/checkpoint.hpp"
#include "dta/error.hpp"

namespace dta {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double millis(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config: " + key + " expects true|false, got '" + v + "'");
}

template <typename N>
N parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  N n{};
  in >> n;
  if (!in || !in.eof()) throw Error("config: " + key + " expects a number, got '" + v + "'");
  return n;
}

}  // namespace

void set_pipeline_option(PipelineConfig& c, const std::string& key, const std::string& value) {
  auto size = [&] { return parse_number<std::size_t>(key, value); };
  auto real = [&] { return parse_number<double>(key, value); };
  if (key == "mode") c.mode = parse_text_mode(value);
  else if (key == "split_commas") c.split_commas = parse_bool(key, value);
  else if (key == "vectorizer.min_n") c.vectorizer.min_n = parse_number<int>(key, value);
  else if (key == "vectorizer.max_n") c.vectorizer.max_n = parse_number<int>(key, value);
  else if (key == "vectorizer.dim") c.vectorizer.dim = size();
  else if (key == "clusters") c.clusters = size();
  else if (key == "kmeans.iterations") c.kmeans.max_iterations = parse_number<int>(key, value);
  else if (key == "kmeans.restarts") c.kmeans.restarts = parse_number<int>(key, value);
  else if (key == "recall_k") c.recall_k = size();
  else if (key == "reranker.l2") c.reranker.l2 = real();
  else if (key == "reranker.negative_ratio") c.reranker.negative_ratio = size();
  else if (key == "window") c.window = size();
  else if (key == "ablation") c.history = parse_history_mode(value);
  else if (key == "output") c.output = parse_output_mode(value);
  else if (key == "min_freq") c.min_freq = size();
  else if (key == "embedding_dim") c.embedding_dim = parse_number<int>(key, value);
  else if (key == "hidden") c.hidden = parse_number<int>(key, value);
  else if (key == "dropout") c.dropout = real();
  else if (key == "tie_embeddings") c.tie_embeddings = parse_bool(key, value);
  else if (key == "lr") c.train.learning_rate = real();
  else if (key == "batch_size") c.train.batch_size = size();
  else if (key == "epochs") c.train.epochs = size();
  else if (key == "clip") c.train.clip_norm = real();
  else if (key == "sampling") c.train.sampling = real();
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else throw Error("config: unknown key '" + key + "'");
}

PipelineConfig parse_pipeline_config(std::istream& in) {
  PipelineConfig c;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(number, "expected key = value");
    try {
      set_pipeline_option(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(number, e.what());
    }
  }
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return parse_pipeline_config(in);
}

void write_pipeline_config(std::ostream& out, const PipelineConfig& c) {
  out << "mode = " << to_string(c.mode) << '\n'
      << "split_commas = " << (c.split_commas ? "true" : "false") << '\n'
      << "vectorizer.min_n = " << c.vectorizer.min_n << '\n'
      << "vectorizer.max_n = " << c.vectorizer.max_n << '\n'
      << "vectorizer.dim = " << c.vectorizer.dim << '\n'
      << "clusters = " << c.clusters << '\n'
      << "kmeans.iterations = " << c.kmeans.max_iterations << '\n'
      << "kmeans.restarts = " << c.kmeans.restarts << '\n'
      << "recall_k = " << c.recall_k << '\n'
      << "reranker.l2 = " << c.reranker.l2 << '\n'
      << "reranker.negative_ratio = " << c.reranker.negative_ratio << '\n'
      << "window = " << c.window << '\n'
      << "ablation = " << to_string(c.history) << '\n'
      << "output = " << to_string(c.output) << '\n'
      << "min_freq = " << c.min_freq << '\n'
      << "embedding_dim = " << c.embedding_dim << '\n'
      << "hidden = " << c.hidden << '\n'
      << "dropout = " << c.dropout << '\n'
      << "tie_embeddings = " << (c.tie_embeddings ? "true" : "false") << '\n'
      << "lr = " << c.train.learning_rate << '\n'
      << "batch_size = " << c.train.batch_size << '\n'
      << "epochs = " << c.train.epochs << '\n'
      << "clip = " << c.train.clip_norm << '\n'
      << "sampling = " << c.train.sampling << '\n'
      << "seed = " << c.seed << '\n';
}

ActionDiscovery discover_actions(const std::vector<Dialogue>& dialogues, const PipelineConfig& config) {
  ActionDiscovery d;
  std::vector<std::string> occurrences;
  for (auto& s : segment_corpus(dialogues, config.segmenter())) occurrences.push_back(std::move(s.text));
  d.segments = count_segments(occurrences);
  if (d.segments.size() < config.clusters)
    throw Error("only " + std::to_string(d.segments.size()) + " distinct segments for " +
                std::to_string(config.clusters) + " clusters");
  std::vector<std::string> texts;
  for (const auto& s : d.segments) texts.push_back(s.text);
  d.vectorizer = Vectorizer(config.vectorizer);
  d.vectorizer.fit(texts);
  for (const auto& t : texts) d.vectors.push_back(d.vectorizer.embed(t));
  d.clustering = kmeans(d.vectors, config.clusters, config.seed, config.kmeans);
  std::vector<std::string> apis(kApiInventory.begin(), kApiInventory.end());
  d.registry = build_registry(d.clustering.assignment, d.segments, apis, config.clusters, &d.vectors);
  return d;
}

std::vector<std::vector<Exchange>> corpus_exchanges(const std::vector<Dialogue>& dialogues,
                                                    const std::vector<StandardizedTurn>& actions, TextMode mode) {
  std::map<std::string, std::vector<StandardizedTurn>> by_dialogue;
  for (const auto& st : actions) by_dialogue[st.dialogue_id].push_back(st);
  std::vector<std::vector<Exchange>> out;
  static const std::vector<StandardizedTurn> none;
  for (const auto& d : dialogues) {
    auto it = by_dialogue.find(d.id);
    out.push_back(build_exchanges(d, it == by_dialogue.end() ? none : it->second, mode));
  }
  return out;
}

Seq2Seq<float> make_model(const PipelineConfig& config, const Vocabularies& vocab) {
  ModelConfig mc;
  mc.encoder_vocab = vocab.encoder.size();
  mc.decoder_vocab = vocab.decoder.size();
  mc.embedding_dim = config.embedding_dim;
  mc.hidden = config.hidden;
  mc.dropout = config.dropout;
  if (config.tie_embeddings) mc.tied = tie_map(vocab.encoder, vocab.decoder);
  return Seq2Seq<float>(mc, config.seed);
}

void ModelBundle::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  save_model(model, dir / "model.bin");
  vocab.encoder.save(dir / "encoder.vocab");
  vocab.decoder.save(dir / "decoder.vocab");
  registry.save(dir / "registry.tsv");
  vectorizer.save(dir / "vectorizer.txt");
  {
    std::ofstream out(dir / "reranker.txt");
    reranker.save(out);
  }
  std::ofstream cfg(dir / "pipeline.cfg");
  write_pipeline_config(cfg, config);
  if (!cfg) throw Error("cannot write " + (dir / "pipeline.cfg").string());
}

ModelBundle ModelBundle::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("model directory " + dir.string() + " does not exist");
  ModelBundle b;
  b.config = load_pipeline_config(dir / "pipeline.cfg");
  b.vectorizer = Vectorizer::load(dir / "vectorizer.txt");
  b.registry = ActionRegistry::load(dir / "registry.tsv");
  {
    std::ifstream in(dir / "reranker.txt");
    if (!in) throw Error("cannot read " + (dir / "reranker.txt").string());
    b.reranker = Reranker::load(in);
  }
  b.vocab.encoder = Vocab::load(dir / "encoder.vocab");
  b.vocab.decoder = Vocab::load(dir / "decoder.vocab");
  b.model = load_model<float>(dir / "model.bin");
  if (b.model.config().encoder_vocab != b.vocab.encoder.size() ||
      b.model.config().decoder_vocab != b.vocab.decoder.size())
    throw Error("model dimensions do not match the vocabulary files in " + dir.string());
  return b;
}

PipelineRun run_pipeline(const std::vector<Dialogue>& corpus, const PipelineConfig& config) {
  PipelineRun run;
  auto stage = Clock::now();
  run.split = split_corpus(corpus, {0.8, 0.1, 0.1}, config.seed);
  run.discovery = discover_actions(run.split.train, config);
  run.seconds["actions"] = seconds_since(stage);
  spdlog::info("actions: {} distinct segments in {} clusters", run.discovery.segments.size(), config.clusters);

  stage = Clock::now();
  Standardizer standardizer(run.discovery.registry, run.discovery.vectorizer, config.mode, config.recall_k);
  run.reranker = train_reranker(run.discovery.registry, standardizer.featurizer(), config.seed, config.reranker);
  standardizer.set_reranker(run.reranker.model);
  run.train_std = standardize_corpus(run.split.train, standardizer, config.segmenter());
  run.dev_std = standardize_corpus(run.split.dev, standardizer, config.segmenter()).turns;
  run.test_std = standardize_corpus(run.split.test, standardizer, config.segmenter()).turns;
  run.seconds["standardize"] = seconds_since(stage);
  spdlog::info("reranker: {} positives, {} negatives, held-out accuracy {:.3f}", run.reranker.positives,
               run.reranker.negatives, run.reranker.heldout_accuracy);

  stage = Clock::now();
  ModelBundle& b = run.bundle;
  b.config = config;
  b.vectorizer = run.discovery.vectorizer;
  b.registry = run.train_std.table;
  b.reranker = run.reranker.model;
  const auto train_ex = corpus_exchanges(run.split.train, run.train_std.turns, config.mode);
  const auto dev_ex = corpus_exchanges(run.split.dev, run.dev_std, config.mode);
  b.vocab = build_vocab(train_ex, b.registry, config.output, config.min_freq);
  b.model = make_model(config, b.vocab);
  const auto train_pairs = make_examples(train_ex, b.vocab, config.output, config.window, config.history);
  const auto dev_pairs = make_examples(dev_ex, b.vocab, config.output, config.window, config.history);
  spdlog::info("training on {} pairs ({} dev), encoder vocab {}, decoder vocab {}", train_pairs.size(),
               dev_pairs.size(), b.vocab.encoder.size(), b.vocab.decoder.size());
  TrainOptions opt = config.train;
  opt.seed = config.seed;
  if (!opt.on_epoch)
    opt.on_epoch = [](const EpochReport& r) {
      spdlog::info("epoch {:3d}  train {:.4f}  dev {:.4f}  {:.1f}s", r.epoch, r.train_loss, r.dev_loss.value_or(0.0),
                   r.seconds);
    };
  run.training = fit(b.model, train_pairs, dev_pairs, opt);
  run.seconds["train"] = seconds_since(stage);
  return run;
}

std::size_t verbal_length(const std::string& text, TextMode mode) { return word_tokens(text, mode).size(); }

namespace {

std::string render_tokens(const std::vector<std::string>& tokens, TextMode mode) {
  std::vector<std::string> words;
  for (const auto& t : tokens)
    if (t.rfind("API:", 0) != 0) words.push_back(t);
  return detokenize(words, mode);
}

std::vector<ActionId> to_actions(const std::vector<std::string>& tags) {
  std::vector<ActionId> out;
  for (const auto& t : tags) out.emplace_back(t);
  return out;
}

}  // namespace

EvalReport evaluate(const ModelBundle& bundle, const std::vector<Dialogue>& dialogues,
                    const std::vector<StandardizedTurn>& actions, std::uint64_t seed, JaccardAggregation aggregation) {
  const auto& cfg = bundle.config;
  const bool action_mode = cfg.output == OutputMode::actions;
  const std::size_t max_len = action_mode ? kMaxActions : kMaxTokens;
  Generator<float> generator(bundle.model);
  EvalReport report;
  std::vector<std::vector<std::string>> pred_tags, gold_tags, pred_apis, gold_apis, texts, argmax_texts, refs;
  std::vector<Tokens> hyps, references;
  std::size_t exact = 0;
  Rng rng(seed);
  Rng argmax_rng(seed);
  const auto exchanges = corpus_exchanges(dialogues, actions, cfg.mode);
  for (std::size_t d = 0; d < dialogues.size(); ++d) {
    std::vector<std::string> dialogue_texts, dialogue_argmax, dialogue_refs;
    MockApiExecutor executor(OrderRecord{"EVAL", false, 1000, false, false});
    MockApiExecutor argmax_executor(OrderRecord{"EVAL", false, 1000, false, false});
    ComposeOptions compose{cfg.mode, SegmentChoice::sample, executor.default_args()};
    ComposeOptions compose_argmax{cfg.mode, SegmentChoice::most_frequent, executor.default_args()};
    const auto& ex = exchanges[d];
    for (std::size_t i = 0; i < ex.size(); ++i) {
      if (!ex[i].answered) continue;
      ReplyPrediction p;
      p.dialogue_id = dialogues[d].id;
      p.exchange = i;
      const auto enc = encode_history(ex, i, cfg.window, cfg.history, &bundle.vocab.encoder);
      p.decode = generator.decode(enc.ids, max_len);
      for (int id : p.decode.ids) p.predicted.push_back(bundle.vocab.decoder.token(id));
      p.gold = action_mode ? ex[i].actions : ex[i].reply_tokens;
      p.gold_apis = ex[i].api_calls;
      for (const auto& t : p.predicted)
        if (t.rfind("API:", 0) == 0) p.predicted_apis.push_back(t.substr(4));
      if (action_mode) {
        const auto acts = to_actions(p.predicted);
        p.text = compose_response(bundle.registry, acts, rng, &executor, compose).text;
        p.argmax_text = compose_response(bundle.registry, acts, argmax_rng, &argmax_executor, compose_argmax).text;
      } else {
        p.text = render_tokens(p.predicted, cfg.mode);
        p.argmax_text = p.text;
      }
      p.reference = ex[i].reply_text;
      if (p.predicted == p.gold) ++exact;
      pred_tags.push_back(p.predicted);
      gold_tags.push_back(p.gold);
      pred_apis.push_back(p.predicted_apis);
      gold_apis.push_back(p.gold_apis);
      hyps.push_back(word_tokens(p.text, cfg.mode));
      references.push_back(word_tokens(p.reference, cfg.mode));
      dialogue_texts.push_back(p.text);
      dialogue_argmax.push_back(p.argmax_text);
      dialogue_refs.push_back(p.reference);
      report.replies.push_back(std::move(p));
    }
    texts.push_back(std::move(dialogue_texts));
    argmax_texts.push_back(std::move(dialogue_argmax));
    refs.push_back(std::move(dialogue_refs));
  }
  if (report.replies.empty()) throw Error("evaluate: no answered exchanges");
  report.actions = micro_prf(pred_tags, gold_tags);
  report.exact_match = static_cast<double>(exact) / static_cast<double>(report.replies.size());
  report.api = api_prf(pred_apis, gold_apis);
  report.bleu = bleu4(hyps, references);
  auto repetition = [&](const std::vector<std::vector<std::string>>& t) {
    try {
      return jaccard_repetition(t, cfg.mode, aggregation);
    } catch (const Error&) {
      return 0.0;
    }
  };
  report.jaccard = repetition(texts);
  report.jaccard_argmax = repetition(argmax_texts);
  report.jaccard_reference = repetition(refs);
  return report;
}

std::vector<LatencyReport> measure_latency(const std::vector<const ModelBundle*>& models,
                                           const std::vector<Dialogue>& dialogues,
                                           const std::vector<StandardizedTurn>& actions, std::size_t warmup,
                                           std::uint64_t seed, BucketScheme scheme) {
  if (models.empty()) throw Error("measure_latency: no models");
  struct Slot {
    const ModelBundle* bundle;
    Generator<float> generator;
    std::size_t max_len;
    std::vector<std::vector<int>> contexts;
    Rng rng;
  };
  std::vector<Slot> slots;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& b = *models[m];
    slots.push_back({&b, Generator<float>(b.model), b.config.output == OutputMode::actions ? kMaxActions : kMaxTokens,
                     {}, Rng(seed + m)});
    for (const auto& ex : corpus_exchanges(dialogues, actions, b.config.mode))
      for (std::size_t i = 0; i < ex.size(); ++i)
        if (ex[i].answered)
          slots.back().contexts.push_back(
              encode_history(ex, i, b.config.window, b.config.history, &b.vocab.encoder).ids);
  }
  const std::size_t n = slots.front().contexts.size();
  for (auto& s : slots)
    for (std::size_t i = 0; i < std::min(warmup, n); ++i) s.generator.decode(s.contexts[i], s.max_len);

  std::vector<LatencyReport> reports(slots.size());
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t k = 0; k < slots.size(); ++k) {
      const std::size_t m = c % 2 ? slots.size() - 1 - k : k;
      Slot& s = slots[m];
      const auto& cfg = s.bundle->config;
      LatencySample sample;
      const auto t0 = Clock::now();
      const DecodeResult r = s.generator.decode(s.contexts[c], s.max_len);
      sample.decode_ms = millis(t0, Clock::now());
      sample.steps = r.steps;
      std::vector<std::string> out;
      for (int id : r.ids) out.push_back(s.bundle->vocab.decoder.token(id));
      std::string text;
      if (cfg.output == OutputMode::actions) {
        MockApiExecutor executor(OrderRecord{"BENCH", false, 1000, false, false});
        const auto t1 = Clock::now();
        text = compose_response(s.bundle->registry, to_actions(out), s.rng, &executor,
                                {cfg.mode, SegmentChoice::sample, executor.default_args()})
                   .text;
        sample.compose_ms = millis(t1, Clock::now());
      } else {
        text = render_tokens(out, cfg.mode);
      }
      sample.length = verbal_length(text, cfg.mode);
      reports[m].samples.push_back(sample);
    }
  }
  for (auto& r : reports) r.buckets = bucket_latency(r.samples, scheme);
  return reports;
}

}  // namespace dta
