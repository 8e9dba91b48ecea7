#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dta/api.hpp"
#include "dta/composer.hpp"
#include "dta/history.hpp"
#include "dta/pipeline.hpp"

namespace httplib {
class Server;
}

namespace dta {

// Chooses the next reply's actions from the exchanges so far (the last one
// unanswered).
class ActionPolicy {
 public:
  virtual ~ActionPolicy() = default;
  virtual std::vector<ActionId> next_actions(const std::vector<Exchange>& exchanges) const = 0;
};

class ModelPolicy final : public ActionPolicy {
 public:
  explicit ModelPolicy(const ModelBundle& bundle);
  std::vector<ActionId> next_actions(const std::vector<Exchange>& exchanges) const override;

 private:
  const ModelBundle& bundle_;
  Generator<float> generator_;
};

struct ChatReply {
  std::string session_id;
  std::string text;
  std::vector<std::string> actions;
  std::vector<ChosenSegment> segments;
  std::vector<ExecutedCall> api_calls;
  double decode_ms = 0.0;
  double compose_ms = 0.0;
  std::optional<std::string> error;
};

struct SessionTranscript {
  std::string session_id;
  Dialogue dialogue;
  std::vector<std::string> messages;  // user messages, one per reply
  std::vector<ChatReply> replies;
  OrderRecord order;
};

struct ServiceOptions {
  std::uint64_t seed = 1;
  std::chrono::seconds idle_timeout{30 * 60};
  TextMode mode = TextMode::ascii;
  std::size_t window = 3;
};

// Order the mock back end starts from for a session.
OrderRecord default_order(const std::string& session_id);

class ChatService {
 public:
  using Clock = std::chrono::steady_clock;

  ChatService(const ActionRegistry& table, const ActionPolicy& policy, ServiceOptions options = {});

  // Unknown or missing ids start a new session. Throws dta::Error for an
  // empty message; model failures come back in ChatReply::error with the
  // session unchanged.
  ChatReply handle_chat(const std::optional<std::string>& session_id, const std::string& message);

  std::optional<SessionTranscript> transcript(const std::string& session_id) const;

  std::size_t session_count() const;
  // Drops sessions idle for longer than the timeout; returns how many.
  std::size_t evict_idle(Clock::time_point now = Clock::now());

 private:
  struct Session {
    std::mutex mutex;
    std::string id;
    Dialogue dialogue;
    std::vector<StandardizedTurn> actions;
    std::vector<std::string> messages;
    std::vector<ChatReply> replies;
    MockApiExecutor executor;
    Rng rng;
    Clock::time_point last_active;

    Session(std::string session_id, std::uint64_t seed);
  };

  std::shared_ptr<Session> find_or_create(const std::optional<std::string>& session_id);

  const ActionRegistry& table_;
  const ActionPolicy& policy_;
  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 1;
};

std::string to_json(const ChatReply& reply);
std::string to_json(const SessionTranscript& transcript);

// POST /chat, GET /healthz, GET /session/{id}.
class HttpServer {
 public:
  HttpServer(ChatService& service, std::string model_checksum);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 asks the OS for one; returns the bound port.
  int bind(const std::string& host, int port);
  void run();    // blocks until stop()
  void start();  // runs on a background thread
  void stop();

 private:
  ChatService& service_;
  std::string checksum_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace dta
