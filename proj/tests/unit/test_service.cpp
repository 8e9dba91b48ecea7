#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <thread>

#include <json.hpp>

#include "dta/error.hpp"
#include "dta/service.hpp"

#include <httplib.h>

using namespace dta;
using nlohmann::json;

namespace {

// Keyword rules over the latest user message.
class ScriptPolicy final : public ActionPolicy {
 public:
  std::vector<ActionId> next_actions(const std::vector<Exchange>& exchanges) const override {
    ++calls;
    const auto& words = exchanges.back().user_tokens;
    auto has = [&](const char* w) { return std::find(words.begin(), words.end(), w) != words.end(); };
    if (has("explode")) throw std::runtime_error("boom");
    if (has("silence")) return {ActionId::unk()};
    if (has("lock")) return {ActionId::api("lock_bike"), ActionId("A0")};
    if (has("fee")) return {ActionId::api("reduce_fee")};
    return {ActionId("A1")};
  }
  mutable std::atomic<int> calls{0};
};

ActionRegistry table() {
  return build_registry({0, 1, 1}, {{"Your bike is locked.", 2}, {"Anything else?", 3}, {"Can I help?", 1}},
                        {"lock_bike", "reduce_fee"}, 2);
}

}  // namespace

TEST_CASE("sessions keep separate history and back-end state") {
  const auto reg = table();
  ScriptPolicy policy;
  ChatService service(reg, policy);

  const auto a1 = service.handle_chat(std::nullopt, "please lock my bike");
  CHECK(!a1.error);
  CHECK(a1.text == "Your bike is locked.");
  REQUIRE(a1.api_calls.size() == 1);
  CHECK(a1.api_calls[0].result == "locked");
  CHECK(a1.actions == std::vector<std::string>{"API:lock_bike", "A0"});

  const auto b1 = service.handle_chat(std::nullopt, "lock it");
  CHECK(b1.session_id != a1.session_id);
  CHECK(b1.api_calls[0].result == "locked");
  const auto a2 = service.handle_chat(a1.session_id, "lock again");
  CHECK(a2.session_id == a1.session_id);
  CHECK(a2.api_calls[0].result == "already_locked");
  CHECK(service.session_count() == 2);

  const auto t = service.transcript(a1.session_id);
  REQUIRE(t);
  CHECK(t->messages == std::vector<std::string>{"please lock my bike", "lock again"});
  CHECK(t->order.locked);
  CHECK_NOTHROW(validate_dialogue(t->dialogue));
  CHECK(t->dialogue.turns.size() == 6);
  CHECK(t->dialogue.turns[1].api_call->args.at("order_id") == t->order.order_id);
  CHECK(!service.transcript("nobody"));

  const auto named = service.handle_chat(std::string("mine"), "hello");
  CHECK(named.session_id == "mine");
  CHECK((named.text == "Anything else?" || named.text == "Can I help?"));
}

TEST_CASE("failed replies leave the session unchanged") {
  const auto reg = table();
  ScriptPolicy policy;
  ChatService service(reg, policy);
  const auto ok = service.handle_chat(std::string("s"), "hello");
  const auto before = service.transcript("s")->dialogue;

  const auto boom = service.handle_chat(std::string("s"), "explode now");
  REQUIRE(boom.error);
  CHECK(boom.error->find("boom") != std::string::npos);
  CHECK(service.transcript("s")->dialogue == before);

  const auto silent = service.handle_chat(std::string("s"), "silence");
  CHECK(silent.error);
  CHECK(service.transcript("s")->dialogue == before);
  CHECK(service.transcript("s")->replies.size() == 1);

  const auto fee = service.handle_chat(std::string("s"), "the fee");
  CHECK(!fee.error);
  CHECK(fee.text.empty());
  CHECK(fee.api_calls[0].result == "reduced");
  CHECK_THROWS_AS(service.handle_chat(std::string("s"), "   "), Error);
}

TEST_CASE("replies replay under the same seed") {
  const auto reg = table();
  ScriptPolicy policy;
  ChatService a(reg, policy, ServiceOptions{7}), b(reg, policy, ServiceOptions{7});
  for (const char* m : {"hi", "hello", "hey", "lock", "yo"}) {
    CHECK(a.handle_chat(std::string("x"), m).text == b.handle_chat(std::string("x"), m).text);
  }
  CHECK(a.transcript("x")->dialogue == b.transcript("x")->dialogue);
  CHECK(a.transcript("x")->order == b.transcript("x")->order);
  CHECK(default_order("x") == default_order("x"));
}

TEST_CASE("idle sessions are evicted") {
  const auto reg = table();
  ScriptPolicy policy;
  ServiceOptions o;
  o.idle_timeout = std::chrono::seconds(60);
  ChatService service(reg, policy, o);
  service.handle_chat(std::nullopt, "hi");
  service.handle_chat(std::nullopt, "hi");
  CHECK(service.evict_idle(ChatService::Clock::now()) == 0);
  CHECK(service.evict_idle(ChatService::Clock::now() + std::chrono::minutes(2)) == 2);
  CHECK(service.session_count() == 0);
}

TEST_CASE("concurrent sessions") {
  const auto reg = table();
  ScriptPolicy policy;
  ChatService service(reg, policy);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 25; ++i) service.handle_chat("t" + std::to_string(t), i % 5 ? "hi" : "lock");
    });
  for (auto& th : threads) th.join();
  CHECK(service.session_count() == 4);
  for (int t = 0; t < 4; ++t) {
    const auto tr = service.transcript("t" + std::to_string(t));
    CHECK(tr->replies.size() == 25);
    CHECK_NOTHROW(validate_dialogue(tr->dialogue));
  }
  CHECK(policy.calls == 100);
}

TEST_CASE("HTTP endpoints") {
  const auto reg = table();
  ScriptPolicy policy;
  ChatService service(reg, policy);
  HttpServer server(service, "abc123");
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  server.start();
  httplib::Client client("127.0.0.1", port);

  auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body) == json{{"status", "ok"}, {"model_checksum", "abc123"}});
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  auto chat = client.Post("/chat", R"({"message": "lock my bike"})", "application/json");
  REQUIRE(chat);
  CHECK(chat->status == 200);
  const auto reply = json::parse(chat->body);
  const std::string sid = reply["session_id"];
  CHECK(reply["text"] == "Your bike is locked.");
  CHECK(reply["actions"] == json{"API:lock_bike", "A0"});
  CHECK(reply["api_calls"][0]["name"] == "lock_bike");
  CHECK(reply["segments"][0]["action"] == "A0");
  CHECK(reply.contains("decode_ms"));

  auto second = client.Post("/chat", json{{"session_id", sid}, {"message", "hello"}}.dump(), "application/json");
  CHECK(json::parse(second->body)["session_id"] == sid);

  auto session = client.Get("/session/" + sid);
  REQUIRE(session);
  CHECK(session->status == 200);
  const auto tr = json::parse(session->body);
  CHECK(tr["turns"].size() == 2);
  CHECK(tr["order"]["locked"] == true);
  CHECK(tr["dialogue"]["turns"].size() == 5);

  CHECK(client.Get("/session/unknown")->status == 404);
  CHECK(client.Post("/chat", "not json", "application/json")->status == 400);
  CHECK(client.Post("/chat", R"({"msg": "x"})", "application/json")->status == 400);
  CHECK(client.Post("/chat", R"({"message": 5})", "application/json")->status == 400);
  CHECK(client.Post("/chat", R"({"message": "hi", "session_id": 3})", "application/json")->status == 400);
  CHECK(client.Post("/chat", R"({"message": "  "})", "application/json")->status == 400);
  CHECK(client.Post("/chat", R"({"message": "explode"})", "application/json")->status == 500);

  auto preflight = client.Options("/chat");
  REQUIRE(preflight);
  CHECK(preflight->status == 204);
  CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
  server.stop();
}
