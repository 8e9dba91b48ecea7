#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "dta/error.hpp"
#include "dta/generator.hpp"
#include "dta/pipeline.hpp"

using namespace dta;

namespace {

PipelineConfig small_config() {
  PipelineConfig c;
  c.clusters = 20;
  c.kmeans.restarts = 2;
  c.embedding_dim = 8;
  c.hidden = 8;
  c.train.epochs = 2;
  c.train.learning_rate = 1e-3;
  return c;
}

}  // namespace

TEST_CASE("config round trip") {
  PipelineConfig c = small_config();
  c.mode = TextMode::cjk;
  c.history = HistoryMode::without_words;
  c.output = OutputMode::tokens;
  c.train.sampling = 0.25;
  c.tie_embeddings = true;
  std::stringstream buf;
  write_pipeline_config(buf, c);
  const auto back = parse_pipeline_config(buf);
  CHECK(back.mode == TextMode::cjk);
  CHECK(back.history == HistoryMode::without_words);
  CHECK(back.output == OutputMode::tokens);
  CHECK(back.clusters == 20);
  CHECK(back.hidden == 8);
  CHECK(back.train.sampling == 0.25);
  CHECK(back.tie_embeddings);

  std::stringstream defaults("# defaults\n\n");
  const auto d = parse_pipeline_config(defaults);
  CHECK(d.embedding_dim == 50);
  CHECK(d.hidden == 128);
  CHECK(d.train.learning_rate == 1e-4);
  CHECK(d.train.batch_size == 16);
  CHECK(d.train.epochs == 50);
  CHECK(d.dropout == 0.2);
  CHECK(d.window == 3);
  CHECK(d.recall_k == 20);

  PipelineConfig e;
  CHECK_THROWS_AS(set_pipeline_option(e, "hidden", "many"), Error);
  CHECK_THROWS_AS(set_pipeline_option(e, "colour", "red"), Error);
  CHECK_THROWS_AS(set_pipeline_option(e, "tie_embeddings", "maybe"), Error);
  set_pipeline_option(e, "window", "1");
  CHECK(e.window == 1);
  std::stringstream bad("window 3\n");
  CHECK_THROWS_AS(parse_pipeline_config(bad), Error);
}

TEST_CASE("verbal length") {
  CHECK(verbal_length("Your bike is locked.", TextMode::ascii) == 5);
  CHECK(verbal_length("", TextMode::ascii) == 0);
  CHECK(verbal_length("\xE5\xA5\xBD\xE7\x9A\x84", TextMode::cjk) == 2);
}

TEST_CASE("small pipeline run") {
  GeneratorConfig g;
  g.dialog_count = 80;
  const auto corpus = generate_synthetic(g, 11).dialogues;
  const auto run = run_pipeline(corpus, small_config());
  CHECK(run.split.train.size() == 64);
  CHECK(run.discovery.registry.cluster_count() == 20);
  CHECK(run.discovery.registry.api_actions().size() == kApiInventory.size());
  CHECK(run.training.epochs.size() == 2);
  for (const auto& st : run.test_std) CHECK(st.actions.size() == st.confidence.size());

  const auto report = evaluate(run.bundle, run.split.test, run.test_std, 1);
  CHECK(!report.replies.empty());
  CHECK(report.bleu >= 0.0);
  CHECK(report.exact_match <= 1.0);
  for (const auto& r : report.replies) CHECK(r.predicted.size() <= kMaxActions);

  const auto dir = std::filesystem::temp_directory_path() / "dta_test_bundle";
  run.bundle.save(dir);
  const auto back = ModelBundle::load(dir);
  const auto again = evaluate(back, run.split.test, run.test_std, 1);
  REQUIRE(again.replies.size() == report.replies.size());
  for (std::size_t i = 0; i < again.replies.size(); ++i) {
    CHECK(again.replies[i].predicted == report.replies[i].predicted);
    CHECK(again.replies[i].text == report.replies[i].text);
  }
  std::filesystem::remove_all(dir);

  const auto latency = measure_latency({&run.bundle, &back}, run.split.test, run.test_std, 2, 1);
  REQUIRE(latency.size() == 2);
  CHECK(latency[0].samples.size() == latency[1].samples.size());
  std::size_t total = 0;
  for (const auto& b : latency[0].buckets) total += b.count;
  CHECK(total == latency[0].samples.size());
}
