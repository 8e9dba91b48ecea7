#include "dta/service.hpp"

#include <cstdio>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "dta/error.hpp"
#include "dta/text.hpp"

namespace dta {

using nlohmann::json;

ModelPolicy::ModelPolicy(const ModelBundle& bundle) : bundle_(bundle), generator_(bundle.model) {
  if (bundle.config.output != OutputMode::actions) throw Error("the service needs an action-mode model");
}

std::vector<ActionId> ModelPolicy::next_actions(const std::vector<Exchange>& exchanges) const {
  const auto& cfg = bundle_.config;
  const auto enc = encode_history(exchanges, exchanges.size() - 1, cfg.window, cfg.history, &bundle_.vocab.encoder);
  std::vector<ActionId> out;
  for (int id : generator_.decode(enc.ids, kMaxActions).ids) out.emplace_back(bundle_.vocab.decoder.token(id));
  return out;
}

OrderRecord default_order(const std::string& session_id) {
  const std::uint64_t h = fnv1a64(session_id);
  char id[16];
  std::snprintf(id, sizeof id, "BK%06llu", static_cast<unsigned long long>(h % 1000000));
  return OrderRecord{id, false, 500 + static_cast<int>((h >> 20) % 2500), false, false};
}

ChatService::Session::Session(std::string session_id, std::uint64_t seed)
    : id(std::move(session_id)), executor(default_order(id)), rng(seed ^ fnv1a64(id)) {
  dialogue.id = id;
}

ChatService::ChatService(const ActionRegistry& table, const ActionPolicy& policy, ServiceOptions options)
    : table_(table), policy_(policy), options_(options) {}

std::shared_ptr<ChatService::Session> ChatService::find_or_create(const std::optional<std::string>& session_id) {
  std::lock_guard lock(mutex_);
  if (session_id && !session_id->empty()) {
    if (auto it = sessions_.find(*session_id); it != sessions_.end()) return it->second;
  }
  std::string id;
  if (session_id && !session_id->empty()) {
    id = *session_id;
  } else {
    do {
      char buf[32];
      std::snprintf(buf, sizeof buf, "s%012llx",
                    static_cast<unsigned long long>(fnv1a64(std::to_string(options_.seed) + ":" +
                                                            std::to_string(next_session_++)) &
                                                    0xFFFFFFFFFFFFull));
      id = buf;
    } while (sessions_.count(id));
  }
  auto session = std::make_shared<Session>(id, options_.seed);
  session->last_active = Clock::now();
  sessions_.emplace(id, session);
  return session;
}

ChatReply ChatService::handle_chat(const std::optional<std::string>& session_id, const std::string& message) {
  const std::string text = collapse_whitespace(message);
  if (text.empty()) throw Error("message is empty");
  evict_idle();
  auto session = find_or_create(session_id);
  std::lock_guard lock(session->mutex);
  session->last_active = Clock::now();

  ChatReply reply;
  reply.session_id = session->id;
  Dialogue& d = session->dialogue;
  const std::size_t user_turn = d.turns.size();
  d.turns.push_back(Turn{Speaker::user, text, std::nullopt, std::nullopt});
  auto rollback = [&](const std::string& why) {
    d.turns.resize(user_turn);
    reply.error = why;
    spdlog::warn("session {}: {}", session->id, why);
    return reply;
  };

  std::vector<ActionId> actions;
  const auto t0 = Clock::now();
  try {
    actions = policy_.next_actions(build_exchanges(d, session->actions, options_.mode));
  } catch (const std::exception& e) {
    return rollback(std::string("decode failed: ") + e.what());
  }
  const auto t1 = Clock::now();
  const ComposedReply composed = compose_response(
      table_, actions, session->rng, &session->executor,
      ComposeOptions{options_.mode, SegmentChoice::sample, session->executor.default_args()});
  const auto t2 = Clock::now();
  reply.decode_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  reply.compose_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
  for (const auto& a : actions) reply.actions.push_back(a.tag());
  reply.text = composed.text;
  reply.segments = composed.segments;
  reply.api_calls = composed.api_calls;

  if (composed.api_calls.empty() && composed.text.empty()) return rollback("the model produced no usable action");

  for (const auto& call : composed.api_calls) {
    session->actions.push_back({d.id, d.turns.size(), {ActionId::api(call.name)}, {1.0}});
    d.turns.push_back(Turn{Speaker::staff, "", ApiCall{call.name, call.args}, call.result});
  }
  if (!composed.text.empty()) {
    StandardizedTurn st{d.id, d.turns.size(), {}, {}};
    for (const auto& s : composed.segments) {
      st.actions.push_back(s.action);
      st.confidence.push_back(1.0);
    }
    session->actions.push_back(std::move(st));
    d.turns.push_back(Turn{Speaker::staff, composed.text, std::nullopt, std::nullopt});
  }
  validate_dialogue(d);
  session->messages.push_back(text);
  session->replies.push_back(reply);
  return reply;
}

std::optional<SessionTranscript> ChatService::transcript(const std::string& session_id) const {
  std::shared_ptr<Session> session;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return std::nullopt;
    session = it->second;
  }
  std::lock_guard lock(session->mutex);
  return SessionTranscript{session->id, session->dialogue, session->messages, session->replies,
                           session->executor.order()};
}

std::size_t ChatService::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::size_t ChatService::evict_idle(Clock::time_point now) {
  std::lock_guard lock(mutex_);
  std::size_t dropped = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::unique_lock busy(it->second->mutex, std::try_to_lock);
    if (busy && now - it->second->last_active > options_.idle_timeout) {
      busy.unlock();
      it = sessions_.erase(it);
      ++dropped;
    } else {
      ++it;
    }
  }
  return dropped;
}

namespace {

json reply_json(const ChatReply& r) {
  json j;
  j["session_id"] = r.session_id;
  j["text"] = r.text;
  j["actions"] = r.actions;
  j["segments"] = json::array();
  for (const auto& s : r.segments) j["segments"].push_back({{"action", s.action.tag()}, {"text", s.text}});
  j["api_calls"] = json::array();
  for (const auto& c : r.api_calls) {
    json call{{"name", c.name}, {"args", c.args}, {"result", c.result}};
    if (!c.ok) call["ok"] = false;
    j["api_calls"].push_back(std::move(call));
  }
  j["decode_ms"] = r.decode_ms;
  j["compose_ms"] = r.compose_ms;
  if (r.error) j["error"] = *r.error;
  return j;
}

}  // namespace

std::string to_json(const ChatReply& reply) { return reply_json(reply).dump(); }

std::string to_json(const SessionTranscript& t) {
  json j;
  j["session_id"] = t.session_id;
  j["turns"] = json::array();
  for (std::size_t i = 0; i < t.replies.size(); ++i)
    j["turns"].push_back({{"user", t.messages[i]}, {"reply", reply_json(t.replies[i])}});
  j["dialogue"] = json::parse(to_json_line(t.dialogue));
  j["order"] = {{"order_id", t.order.order_id},
                {"locked", t.order.locked},
                {"fee_cents", t.order.fee_cents},
                {"fee_reduced", t.order.fee_reduced},
                {"refund_issued", t.order.refund_issued}};
  return j.dump();
}

HttpServer::HttpServer(ChatService& service, std::string model_checksum)
    : service_(service), checksum_(std::move(model_checksum)), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Headers", "Content-Type"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  auto error = [](httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), "application/json");
  };
  s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  s.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"status", "ok"}, {"model_checksum", checksum_}}.dump(), "application/json");
  });
  s.Post("/chat", [this, error](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return error(res, 400, "request body is not a JSON object");
    if (!body.contains("message") || !body["message"].is_string())
      return error(res, 400, "field 'message' (string) is required");
    std::optional<std::string> id;
    if (body.contains("session_id") && !body["session_id"].is_null()) {
      if (!body["session_id"].is_string()) return error(res, 400, "field 'session_id' must be a string");
      id = body["session_id"].get<std::string>();
    }
    try {
      const ChatReply reply = service_.handle_chat(id, body["message"].get<std::string>());
      res.status = reply.error ? 500 : 200;
      res.set_content(to_json(reply), "application/json");
    } catch (const Error& e) {
      error(res, 400, e.what());
    }
  });
  s.Get(R"(/session/([^/]+))", [this, error](const httplib::Request& req, httplib::Response& res) {
    const auto t = service_.transcript(req.matches[1]);
    if (!t) return error(res, 404, "unknown session");
    res.set_content(to_json(*t), "application/json");
  });
  s.set_exception_handler([error](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      error(res, 500, e.what());
    }
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = server_->bind_to_any_port(host);
    if (p < 0) throw Error("cannot bind to " + host);
    return p;
  }
  if (!server_->bind_to_port(host, port)) throw Error("cannot bind to " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::run() {
  if (!server_->listen_after_bind()) throw Error("server stopped unexpectedly");
}

void HttpServer::start() {
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace dta
