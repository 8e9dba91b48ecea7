#include "dta/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dta/checkpoint.hpp"
#include "dta/error.hpp"
#include "dta/generator.hpp"
#include "dta/pipeline.hpp"
#include "dta/service.hpp"

namespace dta {

namespace {

std::atomic<bool> g_shutdown{false};

namespace fs = std::filesystem;

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::vector<Segment> load_segments(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Segment> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    out.push_back(segment_from_json_line(line, number));
  }
  return out;
}

// Unique segment texts with counts, as the clustering step sees them.
std::vector<SegmentCount> segment_counts(const std::vector<Segment>& segments) {
  std::vector<std::string> texts;
  for (const auto& s : segments) texts.push_back(s.text);
  return count_segments(texts);
}

std::vector<std::size_t> parse_sizes(const std::string& list) {
  std::vector<std::size_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    const unsigned long long v = std::stoull(item, &used);
    if (used != item.size() || v == 0) throw Error("bad list entry '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw Error("empty list '" + list + "'");
  return out;
}

std::set<std::string> parse_metrics(const std::string& list) {
  static const std::set<std::string> known{"bleu", "api", "jaccard", "latency", "actions"};
  std::set<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    if (!known.count(item)) throw Error("unknown metric '" + item + "' (expected bleu,api,jaccard,latency,actions)");
    out.insert(item);
  }
  return out;
}

// label per segment text: "<text>\t<label>" lines
std::unordered_map<std::string, std::string> load_labels(const fs::path& path) {
  auto in = open_in(path);
  std::unordered_map<std::string, std::string> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(number, "expected text<TAB>label");
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& args);

 private:
  void add_config_options(CLI::App* cmd) {
    cmd->add_option("--config", config_path_, "pipeline config file (key = value)")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides_, "override one config key, key=value")->take_all();
  }

  PipelineConfig pipeline_config() const {
    PipelineConfig c = config_path_.empty() ? PipelineConfig{} : load_pipeline_config(config_path_);
    for (const auto& kv : overrides_) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
      set_pipeline_option(c, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    if (seed_) c.seed = *seed_;
    return c;
  }

  fs::path model_dir() const {
    if (!model_.empty()) return model_;
    if (const char* env = std::getenv("DTA_MODEL_DIR"); env && *env) return env;
    throw Error("no model directory: pass --model or set DTA_MODEL_DIR");
  }

  std::vector<StandardizedTurn> gold_actions(const ModelBundle& bundle, const std::vector<Dialogue>& dialogues) const {
    if (!standardized_.empty()) return load_standardized(standardized_);
    Standardizer s(bundle.registry, bundle.vectorizer, bundle.config.mode, bundle.config.recall_k);
    s.set_reranker(bundle.reranker);
    return standardize_corpus(dialogues, s, bundle.config.segmenter()).turns;
  }

  void corpus_generate();
  void corpus_split();
  void corpus_stats();
  void segment();
  void vectorize_fit();
  void vectorize_apply();
  void actions_cluster();
  void actions_sweep();
  void actions_build();
  void standardize_index();
  void standardize_train_reranker();
  void standardize_run();
  void train();
  void decode();
  void compose();
  void eval();
  void serve();
  void bench();

  std::ostream& out_;
  std::ostream& err_;

  // shared options; each subcommand binds the ones it uses
  fs::path in_, out_path_, out_dir_, config_path_, model_, vectorizer_, registry_, reranker_, standardized_,
      labels_, gold_, corpus_, action_model_, token_model_;
  std::vector<std::string> overrides_;
  std::optional<std::uint64_t> seed_;
  std::string log_level_ = "info";
  std::string text_mode_ = "ascii";
  bool split_commas_ = false;
  std::size_t count_ = 1000, templates_ = 30, variants_ = 5;
  std::string ratios_ = "8:1:1";
  int min_n_ = 1, max_n_ = 3;
  std::size_t dim_ = 4096, k_ = 30, recall_k_ = 20, negative_ratio_ = 4, warmup_ = 20;
  int restarts_ = 10, iterations_ = 100;
  std::string k_list_ = "10,20,30,40,50";
  std::string mode_, ablation_;
  std::optional<std::size_t> epochs_;
  std::string message_;
  std::string actions_;
  bool argmax_ = false;
  std::string metrics_ = "bleu,api,jaccard";
  std::string aggregation_ = "max";
  std::string buckets_ = "width10";
  std::string format_ = "both";
  std::string host_ = "127.0.0.1";
  int port_ = 8080;
};

int Cli::run(const std::vector<std::string>& args) {
  CLI::App app{"Dialog-to-actions dialogue pipeline", "dta"};
  app.require_subcommand(1);
  app.add_option("--log-level", log_level_, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  std::function<void()> action;
  auto leaf = [&](CLI::App* cmd, void (Cli::*fn)()) { cmd->callback([&action, this, fn] { action = [this, fn] { (this->*fn)(); }; }); };
  auto seed_option = [&](CLI::App* cmd) { cmd->add_option("--seed", seed_, "random seed"); };
  auto text_mode = [&](CLI::App* cmd) {
    cmd->add_option("--text-mode", text_mode_, "ascii|cjk")->check(CLI::IsMember({"ascii", "cjk"}));
  };

  auto* corpus = app.add_subcommand("corpus", "generate, split, or describe a corpus");
  corpus->require_subcommand(1);
  {
    auto* c = corpus->add_subcommand("generate", "write a synthetic bike-rental corpus");
    c->add_option("--out", out_path_, "corpus file (JSON lines)")->required();
    c->add_option("--config", config_path_, "generator config (key = value)")->check(CLI::ExistingFile);
    c->add_option("--count", count_, "number of dialogues");
    c->add_option("--templates", templates_, "distinct staff segment templates");
    c->add_option("--variants", variants_, "paraphrases per template");
    c->add_option("--gold", gold_, "write gold turn annotations here");
    c->add_option("--labels", labels_, "write segment<TAB>template labels here");
    seed_option(c);
    leaf(c, &Cli::corpus_generate);
  }
  {
    auto* c = corpus->add_subcommand("split", "partition into train/dev/test by dialogue");
    c->add_option("--in", in_, "corpus file")->required()->check(CLI::ExistingFile);
    c->add_option("--out-dir", out_dir_, "directory for train/dev/test.jsonl")->required();
    c->add_option("--ratios", ratios_, "train:dev:test");
    seed_option(c);
    leaf(c, &Cli::corpus_split);
  }
  {
    auto* c = corpus->add_subcommand("stats", "dialogue and turn counts");
    c->add_option("--in", in_, "corpus file")->required()->check(CLI::ExistingFile);
    c->add_option("--standardized", standardized_, "standardized corpus, to count distinct actions")
        ->check(CLI::ExistingFile);
    leaf(c, &Cli::corpus_stats);
  }

  {
    auto* c = app.add_subcommand("segment", "split staff turns into segments");
    c->add_option("--in", in_, "corpus file")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out_path_, "segment file (JSON lines)")->required();
    c->add_flag("--split-commas", split_commas_, "also split at commas");
    text_mode(c);
    leaf(c, &Cli::segment);
  }

  auto* vectorize = app.add_subcommand("vectorize", "fit or apply the segment vectorizer");
  vectorize->require_subcommand(1);
  {
    auto* c = vectorize->add_subcommand("fit", "fit document frequencies on segments");
    c->add_option("--in", in_, "segment file")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out_path_, "vectorizer file")->required();
    c->add_option("--min-n", min_n_, "smallest character n-gram");
    c->add_option("--max-n", max_n_, "largest character n-gram");
    c->add_option("--dim", dim_, "hashed dimension (power of two)");
    leaf(c, &Cli::vectorize_fit);
  }
  {
    auto* c = vectorize->add_subcommand("apply", "embed segments");
    c->add_option("--vectorizer", vectorizer_, "vectorizer file")->required()->check(CLI::ExistingFile);
    c->add_option("--in", in_, "segment file")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out_path_, "sparse vectors, one line per segment")->required();
    leaf(c, &Cli::vectorize_apply);
  }

  auto* actions = app.add_subcommand("actions", "cluster segments into dialogue actions");
  actions->require_subcommand(1);
  auto kmeans_options = [&](CLI::App* c) {
    c->add_option("--restarts", restarts_, "k-means restarts");
    c->add_option("--iterations", iterations_, "k-means iteration cap");
    seed_option(c);
  };
  {
    auto* c = actions->add_subcommand("cluster", "k-means over segment vectors");
    c->add_option("--in", in_, "segment file")->required()->check(CLI::ExistingFile);
    c->add_option("--vectorizer", vectorizer_, "vectorizer file")->required()->check(CLI::ExistingFile);
    c->add_option("--k", k_, "number of actions");
    c->add_option("--out", out_path_, "registry file")->required();
    kmeans_options(c);
    leaf(c, &Cli::actions_cluster);
  }
  {
    auto* c = actions->add_subcommand("sweep", "inertia (and purity) over candidate K");
    c->add_option("--in", in_, "segment file")->required()->check(CLI::ExistingFile);
    c->add_option("--vectorizer", vectorizer_, "vectorizer file")->required()->check(CLI::ExistingFile);
    c->add_option("--k", k_list_, "comma-separated candidates");
    c->add_option("--labels", labels_, "segment<TAB>label file for purity")->check(CLI::ExistingFile);
    kmeans_options(c);
    leaf(c, &Cli::actions_sweep);
  }
  {
    auto* c = actions->add_subcommand("build", "segment, vectorize and cluster a corpus");
    c->add_option("--corpus", corpus_, "corpus file")->required()->check(CLI::ExistingFile);
    c->add_option("--out-dir", out_dir_, "directory for registry.tsv and vectorizer.txt")->required();
    add_config_options(c);
    seed_option(c);
    leaf(c, &Cli::actions_build);
  }

  auto* standardize = app.add_subcommand("standardize", "map staff segments onto actions");
  standardize->require_subcommand(1);
  {
    auto* c = standardize->add_subcommand("index", "BM25 index over registry segments");
    c->add_option("--registry", registry_, "registry file")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out_path_, "index file")->required();
    text_mode(c);
    leaf(c, &Cli::standardize_index);
  }
  {
    auto* c = standardize->add_subcommand("train-reranker", "fit the pair reranker");
    c->add_option("--registry", registry_, "registry file")->required()->check(CLI::ExistingFile);
    c->add_option("--vectorizer", vectorizer_, "vectorizer file")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out_path_, "reranker file")->required();
    c->add_option("--negative-ratio", negative_ratio_, "negatives per positive");
    text_mode(c);
    seed_option(c);
    leaf(c, &Cli::standardize_train_reranker);
  }
  {
    auto* c = standardize->add_subcommand("run", "standardize every staff turn of a corpus");
    c->add_option("--in", in_, "corpus file")->required()->check(CLI::ExistingFile);
    c->add_option("--registry", registry_, "registry file")->required()->check(CLI::ExistingFile);
    c->add_option("--vectorizer", vectorizer_, "vectorizer file")->required()->check(CLI::ExistingFile);
    c->add_option("--reranker", reranker_, "reranker file")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out_path_, "standardized corpus")->required();
    c->add_option("--table", labels_, "write the corpus frequency table here");
    c->add_option("--recall-k", recall_k_, "BM25 candidates per segment");
    c->add_flag("--split-commas", split_commas_, "also split at commas");
    text_mode(c);
    leaf(c, &Cli::standardize_run);
  }

  {
    auto* c = app.add_subcommand("train", "run the whole offline pipeline and train a generator");
    c->add_option("--corpus", corpus_, "corpus file")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out_dir_, "model directory")->required();
    c->add_option("--mode", mode_, "action|token")->check(CLI::IsMember({"action", "token"}));
    c->add_option("--ablation", ablation_, "full|no-actions|no-words")
        ->check(CLI::IsMember({"full", "no-actions", "no-words"}));
    c->add_option("--epochs", epochs_, "training epochs");
    add_config_options(c);
    seed_option(c);
    leaf(c, &Cli::train);
  }
  {
    auto* c = app.add_subcommand("decode", "predict the next reply's actions or tokens");
    c->add_option("--model", model_, "model directory (default $DTA_MODEL_DIR)");
    auto* corpus_opt = c->add_option("--corpus", corpus_, "decode every exchange of a corpus")
                           ->check(CLI::ExistingFile);
    auto* msg = c->add_option("--message", message_, "decode a one-message conversation");
    corpus_opt->excludes(msg);
    c->add_option("--standardized", standardized_, "gold actions for --corpus")->check(CLI::ExistingFile);
    leaf(c, &Cli::decode);
  }
  {
    auto* c = app.add_subcommand("compose", "turn an action sequence into a reply");
    c->add_option("--actions", actions_, "space-separated tags, e.g. \"A1 A2\"")->required();
    c->add_option("--model", model_, "model directory (default $DTA_MODEL_DIR)");
    c->add_option("--registry", registry_, "registry file instead of a model")->check(CLI::ExistingFile);
    c->add_flag("--argmax", argmax_, "pick the most frequent segment instead of sampling");
    text_mode(c);
    seed_option(c);
    leaf(c, &Cli::compose);
  }
  {
    auto* c = app.add_subcommand("eval", "offline metrics on a corpus");
    c->add_option("--model", model_, "model directory (default $DTA_MODEL_DIR)");
    c->add_option("--corpus", corpus_, "evaluation corpus")->required()->check(CLI::ExistingFile);
    c->add_option("--standardized", standardized_, "gold actions (default: standardize with the model)")
        ->check(CLI::ExistingFile);
    c->add_option("--metrics", metrics_, "comma list of bleu,api,jaccard,latency,actions");
    c->add_option("--aggregation", aggregation_, "Jaccard aggregation max|mean")
        ->check(CLI::IsMember({"max", "mean"}));
    c->add_option("--buckets", buckets_, "width10|deciles")->check(CLI::IsMember({"width10", "deciles"}));
    c->add_option("--warmup", warmup_, "untimed decodes before latency timing");
    c->add_option("--format", format_, "table|lines|both")->check(CLI::IsMember({"table", "lines", "both"}));
    seed_option(c);
    leaf(c, &Cli::eval);
  }
  {
    auto* c = app.add_subcommand("serve", "HTTP chat service");
    c->add_option("--model", model_, "model directory (default $DTA_MODEL_DIR)");
    c->add_option("--host", host_, "listen address");
    c->add_option("--port", port_, "listen port; 0 picks a free one")->check(CLI::Range(0, 65535));
    seed_option(c);
    leaf(c, &Cli::serve);
  }
  {
    auto* c = app.add_subcommand("bench", "decode latency of an action model against a token model");
    c->add_option("--action-model", action_model_, "action-mode model directory")->required();
    c->add_option("--token-model", token_model_, "token-mode model directory")->required();
    c->add_option("--corpus", corpus_, "contexts to decode")->required()->check(CLI::ExistingFile);
    c->add_option("--standardized", standardized_, "gold actions for the history")->check(CLI::ExistingFile);
    c->add_option("--warmup", warmup_, "untimed decodes per model");
    c->add_option("--buckets", buckets_, "width10|deciles")->check(CLI::IsMember({"width10", "deciles"}));
    seed_option(c);
    leaf(c, &Cli::bench);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out_, err_);
    return code == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_level(spdlog::level::from_str(log_level_));
  try {
    if (action) action();
  } catch (const std::exception& e) {
    err_ << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

void Cli::corpus_generate() {
  GeneratorConfig config = config_path_.empty() ? GeneratorConfig{} : load_generator_config(config_path_);
  if (config_path_.empty()) {
    config.dialog_count = count_;
    config.template_count = templates_;
    config.variants = variants_;
  }
  const auto corpus = generate_synthetic(config, seed_.value_or(1));
  save_corpus(out_path_, corpus.dialogues);
  if (!gold_.empty()) {
    auto out = open_out(gold_);
    write_gold(out, corpus.gold);
  }
  if (!labels_.empty()) {
    auto out = open_out(labels_);
    for (std::size_t i = 0; i < corpus.catalogue.size(); ++i)
      out << corpus.catalogue[i] << '\t' << gold_label(corpus.catalogue_label[i]) << '\n';
  }
  const auto stats = dta::corpus_stats(corpus.dialogues);
  out_ << fmt::format("wrote {} dialogues ({} turns) to {}\n", stats.dialog_count, stats.total_turns,
                      out_path_.string());
}

void Cli::corpus_split() {
  std::array<double, 3> ratios{};
  std::stringstream ss(ratios_);
  std::string part;
  std::size_t i = 0;
  double total = 0.0;
  while (std::getline(ss, part, ':')) {
    if (i == 3) throw Error("--ratios needs three parts");
    try {
      ratios[i] = std::stod(part);
    } catch (const std::exception&) {
      throw Error("bad ratio '" + part + "'");
    }
    if (ratios[i] < 0) throw Error("negative ratio '" + part + "'");
    total += ratios[i++];
  }
  if (i != 3 || total <= 0) throw Error("--ratios needs three non-negative parts, e.g. 8:1:1");
  for (auto& r : ratios) r /= total;
  const auto split = split_corpus(load_corpus(in_), ratios, seed_.value_or(1));
  fs::create_directories(out_dir_);
  save_corpus(out_dir_ / "train.jsonl", split.train);
  save_corpus(out_dir_ / "dev.jsonl", split.dev);
  save_corpus(out_dir_ / "test.jsonl", split.test);
  out_ << fmt::format("train {}  dev {}  test {}\n", split.train.size(), split.dev.size(), split.test.size());
}

void Cli::corpus_stats() {
  std::optional<std::size_t> action_count;
  if (!standardized_.empty()) {
    std::set<std::string> tags;
    for (const auto& t : load_standardized(standardized_))
      for (const auto& a : t.actions) tags.insert(a.tag());
    action_count = tags.size();
  }
  const auto s = dta::corpus_stats(load_corpus(in_), action_count);
  out_ << fmt::format("dialogs\t{}\nturns\t{}\navg_turns\t{:.3f}\n", s.dialog_count, s.total_turns,
                      s.avg_turns_per_dialog);
  if (s.action_count) out_ << fmt::format("actions\t{}\n", *s.action_count);
}

void Cli::segment() {
  const auto segments = segment_corpus(load_corpus(in_), {split_commas_, parse_text_mode(text_mode_)});
  auto out = open_out(out_path_);
  for (const auto& s : segments) out << segment_to_json_line(s) << '\n';
  out_ << fmt::format("wrote {} segments ({} distinct)\n", segments.size(), segment_counts(segments).size());
}

void Cli::vectorize_fit() {
  std::vector<std::string> texts;
  for (const auto& s : segment_counts(load_segments(in_))) texts.push_back(s.text);
  Vectorizer v({min_n_, max_n_, dim_});
  v.fit(texts);
  v.save(out_path_);
  out_ << fmt::format("fitted on {} distinct segments\n", v.document_count());
}

void Cli::vectorize_apply() {
  const auto v = Vectorizer::load(vectorizer_);
  auto out = open_out(out_path_);
  std::size_t n = 0;
  for (const auto& s : load_segments(in_)) {
    const auto vec = v.embed(s.text);
    out << n++;
    for (Eigen::Index i = 0; i < vec.dim(); ++i)
      if (vec.values[i] != 0.0) out << fmt::format("\t{}:{:.9g}", i, vec.values[i]);
    out << '\n';
  }
  out_ << fmt::format("embedded {} segments\n", n);
}

void Cli::actions_cluster() {
  const auto counts = segment_counts(load_segments(in_));
  const auto v = Vectorizer::load(vectorizer_);
  std::vector<SegmentVector> vectors;
  for (const auto& s : counts) vectors.push_back(v.embed(s.text));
  const auto result = kmeans(vectors, k_, seed_.value_or(1), {iterations_, 1e-6, restarts_});
  std::vector<std::string> apis(kApiInventory.begin(), kApiInventory.end());
  const auto registry = build_registry(result.assignment, counts, apis, k_, &vectors);
  registry.save(out_path_);
  out_ << fmt::format("{} segments in {} actions, inertia {:.4f} after {} iterations\n", counts.size(), k_,
                      result.inertia, result.iterations);
}

void Cli::actions_sweep() {
  const auto counts = segment_counts(load_segments(in_));
  const auto v = Vectorizer::load(vectorizer_);
  std::vector<SegmentVector> vectors;
  for (const auto& s : counts) vectors.push_back(v.embed(s.text));
  std::optional<std::vector<std::size_t>> gold;
  if (!labels_.empty()) {
    const auto labels = load_labels(labels_);
    std::map<std::string, std::size_t> ids;
    gold.emplace();
    for (const auto& s : counts) {
      auto it = labels.find(s.text);
      if (it == labels.end()) throw Error("segment has no label: " + s.text);
      gold->push_back(ids.emplace(it->second, ids.size()).first->second);
    }
  }
  const auto rows = sweep_k(vectors, parse_sizes(k_list_), gold, seed_.value_or(1), {iterations_, 1e-6, restarts_});
  out_ << (gold ? "k\tinertia\tpurity\n" : "k\tinertia\n");
  for (const auto& r : rows) {
    out_ << fmt::format("{}\t{:.4f}", r.k, r.inertia);
    if (r.purity) out_ << fmt::format("\t{:.4f}", *r.purity);
    out_ << '\n';
  }
}

void Cli::actions_build() {
  const auto config = pipeline_config();
  const auto d = discover_actions(load_corpus(corpus_), config);
  fs::create_directories(out_dir_);
  d.registry.save(out_dir_ / "registry.tsv");
  d.vectorizer.save(out_dir_ / "vectorizer.txt");
  out_ << fmt::format("{} distinct segments in {} actions, inertia {:.4f}\n", d.segments.size(), config.clusters,
                      d.clustering.inertia);
}

void Cli::standardize_index() {
  const auto registry = ActionRegistry::load(registry_);
  const auto index = registry_index(registry, parse_text_mode(text_mode_));
  auto out = open_out(out_path_);
  index.save(out);
  out_ << fmt::format("indexed {} segments\n", index.size());
}

void Cli::standardize_train_reranker() {
  const auto registry = ActionRegistry::load(registry_);
  const auto v = Vectorizer::load(vectorizer_);
  Standardizer s(registry, v, parse_text_mode(text_mode_));
  RerankerTrainOptions opt;
  opt.negative_ratio = negative_ratio_;
  const auto r = train_reranker(registry, s.featurizer(), seed_.value_or(1), opt);
  auto out = open_out(out_path_);
  r.model.save(out);
  out_ << fmt::format("positives {}  negatives {}  held-out {}  accuracy {:.4f}\n", r.positives, r.negatives,
                      r.heldout, r.heldout_accuracy);
}

void Cli::standardize_run() {
  const auto registry = ActionRegistry::load(registry_);
  const auto v = Vectorizer::load(vectorizer_);
  const TextMode mode = parse_text_mode(text_mode_);
  Standardizer s(registry, v, mode, recall_k_);
  auto in = open_in(reranker_);
  s.set_reranker(Reranker::load(in));
  const auto result = standardize_corpus(load_corpus(in_), s, {split_commas_, mode});
  save_standardized(out_path_, result.turns);
  if (!labels_.empty()) result.table.save(labels_);
  std::size_t unk = 0, segments = 0;
  for (const auto& t : result.turns)
    for (const auto& a : t.actions) {
      if (a.is_api()) continue;
      ++segments;
      if (a == ActionId::unk()) ++unk;
    }
  out_ << fmt::format("standardized {} staff turns, {} segments, {} unmatched\n", result.turns.size(), segments,
                      unk);
}

void Cli::train() {
  PipelineConfig config = pipeline_config();
  if (!mode_.empty()) config.output = parse_output_mode(mode_);
  if (!ablation_.empty()) config.history = parse_history_mode(ablation_);
  if (epochs_) config.train.epochs = *epochs_;
  const auto run = run_pipeline(load_corpus(corpus_), config);
  run.bundle.save(out_dir_);
  save_corpus(out_dir_ / "dev.jsonl", run.split.dev);
  save_corpus(out_dir_ / "test.jsonl", run.split.test);
  save_standardized(out_dir_ / "test.std", run.test_std);
  out_ << fmt::format("trained {} epochs (best {} dev loss {:.4f}) in {:.1f}s; model in {}\n", run.training.epochs.size(),
                      run.training.best_epoch, run.training.best_dev_loss.value_or(0.0), run.seconds.at("train"),
                      out_dir_.string());
  out_ << fmt::format("model checksum {}\n", file_checksum(out_dir_ / "model.bin"));
}

void Cli::decode() {
  const auto bundle = ModelBundle::load(model_dir());
  const auto& cfg = bundle.config;
  const std::size_t max_len = cfg.output == OutputMode::actions ? kMaxActions : kMaxTokens;
  Generator<float> generator(bundle.model);
  auto render = [&](const DecodeResult& r) {
    std::vector<std::string> tags;
    for (int id : r.ids) tags.push_back(bundle.vocab.decoder.token(id));
    return join(tags, " ");
  };
  if (corpus_.empty()) {
    if (message_.empty()) throw Error("decode needs --message or --corpus");
    Dialogue d{"cli", {Turn{Speaker::user, collapse_whitespace(message_), std::nullopt, std::nullopt}}};
    const auto ex = build_exchanges(d, {}, cfg.mode);
    const auto enc = encode_history(ex, 0, cfg.window, cfg.history, &bundle.vocab.encoder);
    out_ << render(generator.decode(enc.ids, max_len)) << '\n';
    return;
  }
  const auto dialogues = load_corpus(corpus_);
  const auto actions = gold_actions(bundle, dialogues);
  const auto exchanges = corpus_exchanges(dialogues, actions, cfg.mode);
  out_ << "dialogue\texchange\tpredicted\tgold\n";
  for (std::size_t d = 0; d < dialogues.size(); ++d) {
    const auto& ex = exchanges[d];
    for (std::size_t i = 0; i < ex.size(); ++i) {
      if (!ex[i].answered) continue;
      const auto enc = encode_history(ex, i, cfg.window, cfg.history, &bundle.vocab.encoder);
      const auto& gold = cfg.output == OutputMode::actions ? ex[i].actions : ex[i].reply_tokens;
      out_ << dialogues[d].id << '\t' << i << '\t' << render(generator.decode(enc.ids, max_len)) << '\t'
           << join(gold, " ") << '\n';
    }
  }
}

void Cli::compose() {
  ActionRegistry registry;
  TextMode mode = parse_text_mode(text_mode_);
  if (!registry_.empty()) {
    registry = ActionRegistry::load(registry_);
  } else {
    auto bundle = ModelBundle::load(model_dir());
    registry = std::move(bundle.registry);
    mode = bundle.config.mode;
  }
  std::vector<ActionId> acts;
  for (const auto& t : split_whitespace(actions_)) acts.emplace_back(t);
  Rng rng(seed_.value_or(1));
  MockApiExecutor executor(default_order("cli"));
  const auto reply = compose_response(registry, acts, rng, &executor,
                                      {mode, argmax_ ? SegmentChoice::most_frequent : SegmentChoice::sample,
                                       executor.default_args()});
  out_ << reply.text << '\n';
  for (const auto& s : reply.segments) out_ << "segment\t" << s.action.tag() << '\t' << s.text << '\n';
  for (const auto& c : reply.api_calls)
    out_ << "api\t" << c.name << '\t' << (c.ok ? "ok" : "error") << '\t' << c.result << '\n';
  for (const auto& a : reply.skipped) out_ << "skipped\t" << a.tag() << '\n';
}

void Cli::eval() {
  const auto metrics = parse_metrics(metrics_);
  const auto bundle = ModelBundle::load(model_dir());
  const auto dialogues = load_corpus(corpus_);
  const auto actions = gold_actions(bundle, dialogues);
  const auto aggregation = aggregation_ == "mean" ? JaccardAggregation::mean : JaccardAggregation::max;
  const bool table = format_ != "lines", lines = format_ != "table";
  std::vector<std::pair<std::string, double>> rows;
  const auto report = evaluate(bundle, dialogues, actions, seed_.value_or(1), aggregation);
  rows.emplace_back("replies", static_cast<double>(report.replies.size()));
  if (metrics.count("actions")) {
    rows.emplace_back("micro_p", report.actions.precision);
    rows.emplace_back("micro_r", report.actions.recall);
    rows.emplace_back("micro_f1", report.actions.f1);
    rows.emplace_back("exact_match", report.exact_match);
  }
  if (metrics.count("bleu")) rows.emplace_back("bleu4", report.bleu);
  if (metrics.count("api")) {
    for (const auto& [name, p] : report.api.per_api) {
      rows.emplace_back("api_p." + name, p.precision);
      rows.emplace_back("api_r." + name, p.recall);
      rows.emplace_back("api_f1." + name, p.f1);
    }
    rows.emplace_back("api_macro_p", report.api.macro.precision);
    rows.emplace_back("api_macro_r", report.api.macro.recall);
    rows.emplace_back("api_macro_f1", report.api.macro.f1);
  }
  if (metrics.count("jaccard")) {
    rows.emplace_back("jaccard", report.jaccard);
    rows.emplace_back("jaccard_argmax", report.jaccard_argmax);
    rows.emplace_back("jaccard_reference", report.jaccard_reference);
  }
  if (table) {
    out_ << fmt::format("{:<30} {:>10}\n", "metric", "value");
    for (const auto& [k, v] : rows) out_ << fmt::format("{:<30} {:>10.4f}\n", k, v);
  }
  if (lines)
    for (const auto& [k, v] : rows) out_ << fmt::format("metric\t{}\t{:.6f}\n", k, v);
  if (!metrics.count("latency")) return;
  const auto lat = measure_latency({&bundle}, dialogues, actions, warmup_, seed_.value_or(1),
                                   parse_bucket_scheme(buckets_))
                       .front();
  if (table) {
    out_ << fmt::format("\n{:>9} {:>6} {:>10} {:>10} {:>10} {:>8}\n", "length", "n", "mean_ms", "median_ms",
                        "p95_ms", "steps");
    for (const auto& b : lat.buckets)
      out_ << fmt::format("{:>4}-{:<4} {:>6} {:>10.3f} {:>10.3f} {:>10.3f} {:>8.2f}\n", b.lo, b.hi, b.count, b.mean,
                          b.median, b.p95, b.mean_steps);
  }
  if (lines)
    for (const auto& b : lat.buckets)
      out_ << fmt::format("latency\t{}\t{}\t{}\t{:.6f}\t{:.6f}\t{:.6f}\n", b.lo, b.hi, b.count, b.mean, b.median,
                          b.p95);
}

void Cli::serve() {
  const fs::path dir = model_dir();
  const auto bundle = ModelBundle::load(dir);
  ModelPolicy policy(bundle);
  ServiceOptions options;
  options.seed = seed_.value_or(1);
  options.mode = bundle.config.mode;
  options.window = bundle.config.window;
  ChatService service(bundle.registry, policy, options);
  HttpServer server(service, file_checksum(dir / "model.bin"));
  g_shutdown = false;
  const int port = server.bind(host_, port_);
  server.start();
  out_ << "listening on " << host_ << ':' << port << std::endl;
  spdlog::info("serving {} on {}:{}", dir.string(), host_, port);
  while (!g_shutdown) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
}

void Cli::bench() {
  const auto action = ModelBundle::load(action_model_);
  const auto token = ModelBundle::load(token_model_);
  if (action.config.output != OutputMode::actions) throw Error(action_model_.string() + " is not an action model");
  if (token.config.output != OutputMode::tokens) throw Error(token_model_.string() + " is not a token model");
  const auto dialogues = load_corpus(corpus_);
  const auto actions = gold_actions(action, dialogues);
  const auto reports =
      measure_latency({&action, &token}, dialogues, actions, warmup_, seed_.value_or(1), parse_bucket_scheme(buckets_));
  const auto cmp = compare_latency(reports[0].buckets, reports[1].buckets);
  out_ << fmt::format("{:>9} {:>7} {:>11} {:>7} {:>11} {:>7}\n", "length", "n_act", "action_ms", "n_tok", "token_ms",
                      "ratio");
  for (const auto& r : cmp.rows)
    out_ << fmt::format("{:>4}-{:<4} {:>7} {:>11.3f} {:>7} {:>11.3f} {:>7.2f}\n", r.lo, r.hi, r.fast_count,
                        r.fast_mean, r.slow_count, r.slow_mean, r.ratio);
  if (cmp.rows.empty()) out_ << "no length bucket has replies from both models\n";
  if (cmp.spearman) out_ << fmt::format("spearman(ratio, bucket) {:.4f}\n", *cmp.spearman);
}

}  // namespace

void request_shutdown() { g_shutdown = true; }

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Cli cli(out, err);
  return cli.run(args);
}

int run_cli(int argc, const char* const* argv) {
  if (!spdlog::get("dta")) spdlog::set_default_logger(spdlog::stderr_color_mt("dta"));
  std::signal(SIGINT, [](int) { request_shutdown(); });
  std::signal(SIGTERM, [](int) { request_shutdown(); });
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace dta
