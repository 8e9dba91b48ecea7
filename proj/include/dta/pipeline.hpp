#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dta/actions.hpp"
#include "dta/composer.hpp"
#include "dta/corpus.hpp"
#include "dta/history.hpp"
#include "dta/latency.hpp"
#include "dta/metrics.hpp"
#include "dta/reranker.hpp"
#include "dta/segmenter.hpp"
#include "dta/seq2seq.hpp"
#include "dta/standardizer.hpp"
#include "dta/trainer.hpp"
#include "dta/vectorizer.hpp"

namespace dta {

struct PipelineConfig {
  TextMode mode = TextMode::ascii;
  bool split_commas = false;
  Vectorizer::Options vectorizer;
  std::size_t clusters = 30;
  KMeansOptions kmeans{100, 1e-6, 10};
  std::size_t recall_k = 20;
  RerankerTrainOptions reranker;
  std::size_t window = 3;
  HistoryMode history = HistoryMode::full;
  OutputMode output = OutputMode::actions;
  std::size_t min_freq = 1;
  int embedding_dim = 50;
  int hidden = 128;
  double dropout = 0.2;
  bool tie_embeddings = false;
  TrainOptions train;
  std::uint64_t seed = 1;

  SegmenterOptions segmenter() const { return {split_commas, mode}; }
};

// "key = value" lines; unknown keys are errors.
PipelineConfig parse_pipeline_config(std::istream& in);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void write_pipeline_config(std::ostream& out, const PipelineConfig& config);
// Applies one "key=value" override.
void set_pipeline_option(PipelineConfig& config, const std::string& key, const std::string& value);

// Steps 1 and 2: segments, vectors, clusters, and the action registry.
struct ActionDiscovery {
  std::vector<SegmentCount> segments;  // unique staff segments with counts
  std::vector<SegmentVector> vectors;  // aligned with segments
  Vectorizer vectorizer;
  KMeansResult clustering;
  ActionRegistry registry;
};

ActionDiscovery discover_actions(const std::vector<Dialogue>& dialogues, const PipelineConfig& config);

std::vector<std::vector<Exchange>> corpus_exchanges(const std::vector<Dialogue>& dialogues,
                                                    const std::vector<StandardizedTurn>& actions, TextMode mode);

// Everything needed to answer online: a directory holding model.bin,
// encoder.vocab, decoder.vocab, registry.tsv, vectorizer.txt, reranker.txt
// and pipeline.cfg.
struct ModelBundle {
  PipelineConfig config;
  Vectorizer vectorizer;
  ActionRegistry registry;  // action -> (segment, frequency) table used for composition
  Reranker reranker;
  Vocabularies vocab;
  Seq2Seq<float> model;

  void save(const std::filesystem::path& dir) const;
  static ModelBundle load(const std::filesystem::path& dir);
};

Seq2Seq<float> make_model(const PipelineConfig& config, const Vocabularies& vocab);

struct PipelineRun {
  CorpusSplit split;
  ActionDiscovery discovery;
  RerankerTrainResult reranker;
  StandardizedCorpus train_std;
  std::vector<StandardizedTurn> dev_std, test_std;
  ModelBundle bundle;
  TrainResult training;
  std::map<std::string, double> seconds;  // per stage
};

// Splits 8:1:1, discovers actions on train, standardizes every split,
// trains the generator.
PipelineRun run_pipeline(const std::vector<Dialogue>& corpus, const PipelineConfig& config);

struct ReplyPrediction {
  std::string dialogue_id;
  std::size_t exchange = 0;
  std::vector<std::string> predicted;  // decoded tags or tokens
  std::vector<std::string> gold;       // standardized tags or reply tokens
  std::vector<std::string> predicted_apis, gold_apis;
  std::string text;          // composed (action mode) or detokenized reply
  std::string argmax_text;   // composed with the most frequent segments
  std::string reference;
  DecodeResult decode;
};

struct EvalReport {
  std::vector<ReplyPrediction> replies;
  Prf actions;  // micro over tags (action mode) or tokens
  double exact_match = 0.0;
  ApiReport api;
  double bleu = 0.0;
  double jaccard = 0.0;         // composed replies
  double jaccard_argmax = 0.0;  // most-frequent composer
  double jaccard_reference = 0.0;
};

// Decodes every answered exchange of `dialogues` under gold history.
EvalReport evaluate(const ModelBundle& bundle, const std::vector<Dialogue>& dialogues,
                    const std::vector<StandardizedTurn>& actions, std::uint64_t seed,
                    JaccardAggregation aggregation = JaccardAggregation::max);

// Decoder output rendered as text: composed segments in action mode, joined
// words in token mode.
std::size_t verbal_length(const std::string& text, TextMode mode);

struct LatencyReport {
  std::vector<LatencySample> samples;
  std::vector<LatencyBucket> buckets;
};

// Times each model's decode call (encoder and decoder) on every answered
// exchange under gold history, after `warmup` untimed decodes. Models take
// turns per context, with the order alternating. Action-mode replies are
// composed and timed separately.
std::vector<LatencyReport> measure_latency(const std::vector<const ModelBundle*>& models,
                                           const std::vector<Dialogue>& dialogues,
                                           const std::vector<StandardizedTurn>& actions, std::size_t warmup,
                                           std::uint64_t seed, BucketScheme scheme = BucketScheme::width10);

}  // namespace dta
