#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include <unistd.h>

#include "dta/checkpoint.hpp"
#include "dta/cli.hpp"
#include "dta/corpus.hpp"
#include "dta/pipeline.hpp"

#include <httplib.h>

using namespace dta;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  if (!args.empty()) args.insert(args.begin(), {"--log-level", "off"});
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// An ostream whose contents can be read while another thread writes.
class SharedBuf : public std::stringbuf {
 public:
  std::string snapshot() {
    std::lock_guard lock(mutex_);
    return str();
  }

 protected:
  int sync() override { return 0; }
  std::streamsize xsputn(const char* s, std::streamsize n) override {
    std::lock_guard lock(mutex_);
    return std::stringbuf::xsputn(s, n);
  }
  int_type overflow(int_type c) override {
    std::lock_guard lock(mutex_);
    return std::stringbuf::overflow(c);
  }

 private:
  std::recursive_mutex mutex_;
};

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("dta_cli_" + std::to_string(::getpid()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("exit codes") {
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"corpus", "--help"}).code == kExitOk);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"corpus", "generate"}).code == kExitUsage);
  CHECK(cli({"corpus", "stats", "--in", "/nonexistent/corpus.jsonl"}).code == kExitUsage);
  CHECK(cli({"serve", "--port", "70000"}).code == kExitUsage);

  TempDir dir;
  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << "{\"id\": \"a\"}\n";
  }
  const auto r = cli({"corpus", "stats", "--in", dir / "bad.jsonl"});
  CHECK(r.code == kExitRuntime);
  CHECK(r.err.find("error: line 1") != std::string::npos);
}

TEST_CASE("offline workflow") {
  TempDir dir;
  const auto gen = cli({"corpus", "generate", "--out", dir / "c.jsonl", "--count", "60", "--seed", "3", "--gold",
                        dir / "gold.tsv", "--labels", dir / "labels.tsv"});
  REQUIRE(gen.code == kExitOk);
  CHECK(load_corpus(dir / "c.jsonl").size() == 60);

  const auto stats = cli({"corpus", "stats", "--in", dir / "c.jsonl"});
  CHECK(stats.code == kExitOk);
  CHECK(stats.out.find("60") != std::string::npos);

  REQUIRE(cli({"corpus", "split", "--in", dir / "c.jsonl", "--out-dir", dir / "split", "--seed", "1"}).code == kExitOk);
  CHECK(load_corpus(dir / "split/train.jsonl").size() == 48);
  CHECK(load_corpus(dir / "split/test.jsonl").size() == 6);

  REQUIRE(cli({"segment", "--in", dir / "c.jsonl", "--out", dir / "seg.jsonl"}).code == kExitOk);
  REQUIRE(cli({"vectorize", "fit", "--in", dir / "seg.jsonl", "--out", dir / "vec.txt"}).code == kExitOk);
  REQUIRE(cli({"vectorize", "apply", "--vectorizer", dir / "vec.txt", "--in", dir / "seg.jsonl", "--out",
               dir / "vec.sparse"}).code == kExitOk);
  const auto sweep = cli({"actions", "sweep", "--in", dir / "seg.jsonl", "--vectorizer", dir / "vec.txt", "--k",
                          "5,10", "--labels", dir / "labels.tsv", "--restarts", "1"});
  CHECK(sweep.code == kExitOk);
  REQUIRE(cli({"actions", "cluster", "--in", dir / "seg.jsonl", "--vectorizer", dir / "vec.txt", "--k", "10",
               "--out", dir / "reg.tsv", "--restarts", "1"}).code == kExitOk);
  REQUIRE(cli({"standardize", "train-reranker", "--registry", dir / "reg.tsv", "--vectorizer", dir / "vec.txt",
               "--out", dir / "rr.txt"}).code == kExitOk);
  REQUIRE(cli({"standardize", "index", "--registry", dir / "reg.tsv", "--out", dir / "bm25.txt"}).code == kExitOk);
  REQUIRE(cli({"standardize", "run", "--in", dir / "c.jsonl", "--registry", dir / "reg.tsv", "--vectorizer",
               dir / "vec.txt", "--reranker", dir / "rr.txt", "--out", dir / "c.std"}).code == kExitOk);

  const auto train = cli({"train", "--corpus", dir / "c.jsonl", "--out", dir / "model", "--epochs", "2", "--set",
                          "hidden=8", "--set", "embedding_dim=8", "--set", "clusters=10", "--set",
                          "kmeans.restarts=1", "--seed", "5"});
  INFO(train.err);
  REQUIRE(train.code == kExitOk);
  for (const char* f : {"model.bin", "encoder.vocab", "decoder.vocab", "registry.tsv", "vectorizer.txt",
                        "reranker.txt", "pipeline.cfg", "test.jsonl", "test.std"})
    CHECK(fs::exists(fs::path(dir / "model") / f));
  CHECK(cli({"train", "--corpus", dir / "c.jsonl", "--out", dir / "m2", "--set", "nonsense=1"}).code == kExitRuntime);

  const auto decode = cli({"decode", "--model", dir / "model", "--message", "I forgot to lock my bike"});
  CHECK(decode.code == kExitOk);
  CHECK(!decode.out.empty());

  const auto compose = cli({"compose", "--registry", dir / "reg.tsv", "--actions", "A0 A1", "--argmax"});
  CHECK(compose.code == kExitOk);
  CHECK(!compose.out.empty());

  const auto eval = cli({"eval", "--model", dir / "model", "--corpus", dir / "model/test.jsonl", "--standardized",
                         dir / "model/test.std", "--metrics", "bleu,api,jaccard,actions,latency", "--warmup", "2",
                         "--format", "lines"});
  INFO(eval.err);
  CHECK(eval.code == kExitOk);
  CHECK(std::regex_search(eval.out, std::regex("(^|\\n)metric\\tbleu4\\t")));
  CHECK(eval.out.find("\nlatency\t") != std::string::npos);
}

TEST_CASE("serve answers until shutdown") {
  TempDir dir;
  REQUIRE(cli({"corpus", "generate", "--out", dir / "c.jsonl", "--count", "40", "--seed", "4"}).code == kExitOk);
  REQUIRE(cli({"train", "--corpus", dir / "c.jsonl", "--out", dir / "model", "--epochs", "1", "--set", "hidden=4",
               "--set", "embedding_dim=4", "--set", "clusters=8", "--set", "kmeans.restarts=1"})
              .code == kExitOk);

  SharedBuf buf;
  std::ostream out(&buf);
  std::ostringstream err;
  int code = -1;
  std::thread server([&] { code = run_cli({"--log-level", "off", "serve", "--model", dir / "model", "--port", "0"}, out, err); });

  std::smatch m;
  std::string text;
  const std::regex listening("listening on 127\\.0\\.0\\.1:(\\d+)");
  for (int i = 0; i < 400 && !std::regex_search(text = buf.snapshot(), m, listening); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
  REQUIRE(std::regex_search(text, m, listening));

  httplib::Client client("127.0.0.1", std::stoi(m[1]));
  const auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(nlohmann::json::parse(health->body)["model_checksum"] ==
        file_checksum(fs::path(dir / "model") / "model.bin"));
  const auto chat = client.Post("/chat", R"({"message": "hello"})", "application/json");
  REQUIRE(chat);
  CHECK((chat->status == 200 || chat->status == 500));
  CHECK(nlohmann::json::parse(chat->body).contains("session_id"));

  request_shutdown();
  server.join();
  CHECK(code == kExitOk);
}
