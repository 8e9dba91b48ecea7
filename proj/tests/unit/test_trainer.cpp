#include <doctest.h>

#include <algorithm>
#include <bit>
#include <filesystem>
#include <set>
#include <sstream>

#include "dta/checkpoint.hpp"
#include "dta/error.hpp"
#include "dta/trainer.hpp"

using namespace dta;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.encoder_vocab = 16;
  c.decoder_vocab = 7;
  c.embedding_dim = 6;
  c.hidden = 5;
  return c;
}

std::vector<Example> toy_data() {
  return {{{4, 5, 6}, {4, 5}}, {{7, 8}, {6}}, {{9, 10, 11, 12}, {5, 5, 4}}, {{13}, {6, 4}}, {{14, 15}, {4}}};
}

bool same_params(const Parameters<float>& a, const Parameters<float>& b) {
  bool same = true;
  std::vector<const Parameters<float>::Mat*> bs;
  b.for_each([&](const char*, const Parameters<float>::Mat& m) { bs.push_back(&m); });
  std::size_t k = 0;
  a.for_each([&](const char*, const Parameters<float>::Mat& m) {
    const auto& o = *bs[k++];
    same = same && m.rows() == o.rows() && m.cols() == o.cols() &&
           std::equal(m.data(), m.data() + m.size(), o.data(), [](float x, float y) {
             return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y);
           });
  });
  return same;
}

}  // namespace

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  Seq2Seq<float> model(small_config(), 3);
  const auto before = model.params();
  TrainOptions o;
  o.learning_rate = 0.0;
  o.epochs = 3;
  o.batch_size = 2;
  const auto r = fit(model, toy_data(), toy_data(), o);
  CHECK(r.epochs.size() == 3);
  CHECK(r.updates == 9);
  CHECK(same_params(before, model.params()));
}

TEST_CASE("training is deterministic for a fixed seed") {
  TrainOptions o;
  o.learning_rate = 1e-2;
  o.epochs = 4;
  o.batch_size = 2;
  o.seed = 17;
  Seq2Seq<float> a(small_config(), 5), b(small_config(), 5);
  const auto ra = fit(a, toy_data(), {}, o);
  const auto rb = fit(b, toy_data(), {}, o);
  REQUIRE(ra.epochs.size() == rb.epochs.size());
  for (std::size_t i = 0; i < ra.epochs.size(); ++i) CHECK(ra.epochs[i].train_loss == rb.epochs[i].train_loss);
  CHECK(same_params(a.params(), b.params()));
}

TEST_CASE("training reduces the loss and keeps the best dev epoch") {
  TrainOptions o;
  o.learning_rate = 1e-2;
  o.epochs = 30;
  o.batch_size = 2;
  o.dropout = false;
  std::vector<std::size_t> seen;
  o.on_epoch = [&](const EpochReport& e) { seen.push_back(e.epoch); };
  Seq2Seq<float> model(small_config(), 7);
  const auto data = toy_data();
  const double start = evaluate_loss(model, data);
  const auto r = fit(model, data, data, o);
  CHECK(seen.size() == 30);
  CHECK(seen.front() == 1);
  CHECK(r.best_dev_loss);
  double best = 1e300;
  for (const auto& e : r.epochs) best = std::min(best, *e.dev_loss);
  CHECK(*r.best_dev_loss == best);
  CHECK(evaluate_loss(model, data) == doctest::Approx(best).epsilon(1e-5));
  CHECK(best < start);
}

TEST_CASE("early stop below a loss target") {
  TrainOptions o;
  o.learning_rate = 3e-2;
  o.epochs = 400;
  o.batch_size = 5;
  o.dropout = false;
  o.clean_loss = true;
  o.stop_below = 0.05;
  Seq2Seq<float> model(small_config(), 8);
  const auto r = fit(model, toy_data(), {}, o);
  CHECK(r.epochs.size() < 400);
  CHECK(*r.epochs.back().clean_loss < 0.05);
}

TEST_CASE("batches cover every example once") {
  std::vector<Example> data;
  for (int i = 0; i < 37; ++i) data.push_back({std::vector<int>(1 + i % 7, 4), {4}});
  Rng rng(2);
  const auto batches = make_batches(data, 8, 16, rng);
  std::multiset<std::size_t> all;
  for (const auto& b : batches) {
    CHECK(b.size() <= 8);
    all.insert(b.begin(), b.end());
  }
  CHECK(all.size() == 37);
  CHECK(std::set<std::size_t>(all.begin(), all.end()).size() == 37);
}

TEST_CASE("checkpoint round trip") {
  auto c = small_config();
  c.tied.assign(16, -1);
  c.tied[15] = 6;
  Seq2Seq<float> model(c, 9);
  std::stringstream buf;
  save_model(model, buf);
  const auto back = load_model<float>(buf);
  CHECK(back.config() == model.config());
  CHECK(same_params(back.params(), model.params()));

  std::stringstream again;
  save_model(model, again);
  const auto wide = load_model<double>(again);
  CHECK(wide.params().proj.cast<float>() == model.params().proj);

  std::stringstream junk("not a model");
  CHECK_THROWS_AS(load_model<float>(junk), Error);

  const auto dir = std::filesystem::temp_directory_path() / "dta_test_trainer";
  std::filesystem::create_directories(dir);
  save_model(model, dir / "a.bin");
  save_model(model, dir / "b.bin");
  CHECK(file_checksum(dir / "a.bin") == file_checksum(dir / "b.bin"));
  CHECK(file_checksum(dir / "a.bin").size() == 16);
  std::filesystem::remove_all(dir);
}
