#include "catch_amalgamated.hpp"
#include "test_support.hpp"

#include <httplib.h>
#include <spdlog/sinks/ostream_sink.h>

using namespace qareply;
using testing::ScriptedProvider;

namespace {

class ApiServer {
 public:
  explicit ApiServer(std::shared_ptr<CompletionProvider> llm = std::make_shared<MockProvider>(), ServiceConfig cfg = {})
      : log(std::make_shared<spdlog::logger>("api-test", std::make_shared<spdlog::sinks::ostream_sink_mt>(log_text))) {
    log->set_level(spdlog::level::trace);
    store = std::make_shared<SessionStore>();
    service = std::make_shared<SessionService>(store, std::move(llm), cfg, log);
    api = std::make_unique<HttpApi>(service, HttpApiConfig{"http://ui.local"}, log);
    api->mount(svr);
    port = svr.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }
  ~ApiServer() {
    svr.stop();
    thread.join();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(std::chrono::seconds(10));
    return c;
  }

  std::ostringstream log_text;
  std::shared_ptr<spdlog::logger> log;
  std::shared_ptr<SessionStore> store;
  std::shared_ptr<SessionService> service;
  std::unique_ptr<HttpApi> api;
  httplib::Server svr;
  std::thread thread;
  int port = 0;
};

std::string create_body(const std::string& fixture = "event_invite.json") {
  return Json{{"email", Json::parse(testing::fixture(fixture))},
              {"user", {{"name", "Taro"}, {"address", "taro@example.com"}}}}
      .dump();
}

Json body_of(const httplib::Result& r) { return Json::parse(r->body); }

}  // namespace

TEST_CASE("http: healthz and CORS", "[http]") {
  ApiServer s;
  auto c = s.client();
  auto r = c.Get("/healthz");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(body_of(r)["status"] == "ok");
  CHECK(r->get_header_value("Access-Control-Allow-Origin") == "http://ui.local");
  auto o = c.Options("/sessions");
  REQUIRE(o);
  CHECK(o->status == 204);
}

TEST_CASE("http: full lifecycle under the mock", "[http]") {
  ApiServer s;
  auto c = s.client();
  auto created = c.Post("/sessions", create_body("three_requests.json"), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const Json cj = body_of(created);
  const std::string id = cj["id"];
  CHECK(cj["questions"]["questions"].size() == 3);
  CHECK(cj["state"] == "questioned");
  for (const auto& q : cj["questions"]["questions"]) CHECK(q["anchor"].is_object());

  const std::string base = "/sessions/" + id;
  auto get = c.Get(base);
  REQUIRE(get);
  CHECK(get->status == 200);
  CHECK(body_of(get)["state"] == "questioned");

  auto ans = c.Post(base + "/answers",
                    R"({"answers":[{"question_id":"1","selected":[0]},{"question_id":"2","selected":[1]},
                        {"question_id":"3","skipped":true}]})",
                    "application/json");
  REQUIRE(ans);
  CHECK(ans->status == 200);
  CHECK(body_of(ans)["state"] == "answered");

  auto prefs = c.Post(base + "/preferences", R"({"tone":"friendly","free_instruction":"Keep it short."})",
                      "application/json");
  REQUIRE(prefs);
  CHECK(prefs->status == 200);

  auto d1 = c.Post(base + "/draft", "", "application/json");
  REQUIRE(d1);
  CHECK(d1->status == 201);
  CHECK(body_of(d1)["generation_index"] == 1);
  auto d2 = c.Post(base + "/draft/regenerate", "", "application/json");
  REQUIRE(d2);
  CHECK(body_of(d2)["generation_index"] == 2);
  auto edit = c.Post(base + "/draft/edit", R"({"text":"Edited reply."})", "application/json");
  REQUIRE(edit);
  CHECK(body_of(edit)["edited"] == true);

  auto fin = c.Post(base + "/finalize", R"({"final_text":"Edited reply."})", "application/json");
  REQUIRE(fin);
  CHECK(fin->status == 200);
  CHECK(body_of(fin)["final_char_count"] == 13);
  CHECK(body_of(fin)["condition"] == "qa_based");
  auto again = c.Post(base + "/finalize", R"({"final_text":"x"})", "application/json");
  REQUIRE(again);
  CHECK(again->status == 409);
  CHECK(body_of(again)["error"] == "AlreadyFinalized");
  const Json session = body_of(c.Get(base));
  CHECK(session["drafts"].size() == 2);
  CHECK(session["state"] == "finalized");
}

TEST_CASE("http: error statuses", "[http]") {
  ApiServer s;
  auto c = s.client();
  Json bad = Json::parse(create_body());
  bad["email"].erase("body");
  auto missing = c.Post("/sessions", bad.dump(), "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 400);
  CHECK(body_of(missing)["error"] == "MissingField");
  CHECK(s.store->size() == 0);

  auto garbage = c.Post("/sessions", "{nope", "application/json");
  REQUIRE(garbage);
  CHECK(garbage->status == 400);

  const std::string id = body_of(c.Post("/sessions", create_body(), "application/json"))["id"];
  const std::string base = "/sessions/" + id;
  auto range = c.Post(base + "/answers", R"([{"question_id":"1","selected":[5]}])", "application/json");
  CHECK(range->status == 400);
  CHECK(body_of(range)["error"] == "IndexOutOfRange");
  auto unknown_q = c.Post(base + "/answers", R"([{"question_id":"77","selected":[]}])", "application/json");
  CHECK(body_of(unknown_q)["error"] == "UnknownQuestionId");
  auto enum_bad = c.Post(base + "/preferences", R"({"tone":"SECRETVALUE"})", "application/json");
  CHECK(enum_bad->status == 400);
  CHECK(enum_bad->body.find("SECRETVALUE") == std::string::npos);
  auto nothing = c.Post(base + "/draft", "", "application/json");
  CHECK(nothing->status == 422);
  CHECK(body_of(nothing)["error"] == "NothingToSay");
  auto no_draft = c.Post(base + "/draft/edit", R"({"text":"x"})", "application/json");
  CHECK(no_draft->status == 422);
  auto early = c.Post(base + "/finalize", R"({"final_text":"x"})", "application/json");
  CHECK(early->status == 409);
  auto empty = c.Post(base + "/finalize", R"({"final_text":""})", "application/json");
  CHECK(empty->status == 400);
  CHECK(body_of(empty)["error"] == "EmptyFinalText");
}

TEST_CASE("http: oversized body is 413", "[http]") {
  ServiceConfig cfg;
  cfg.ingest.max_body_chars = 50;
  ApiServer s(std::make_shared<MockProvider>(), cfg);
  auto r = s.client().Post("/sessions", create_body(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 413);
  CHECK(body_of(r)["error"] == "BodyTooLarge");
}

TEST_CASE("http: provider outage returns 502 with a retry path", "[http]") {
  auto p = std::make_shared<ScriptedProvider>(
      std::vector<ScriptedProvider::Step>{ScriptedProvider::fail(ErrorCode::Timeout),
                                          ScriptedProvider::fail(ErrorCode::Timeout),
                                          ScriptedProvider::fail(ErrorCode::Timeout)},
      testing::fixture("event_invite_response.txt"));
  ApiServer s(p);
  auto c = s.client();
  auto r = c.Post("/sessions", create_body(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 502);
  const Json j = body_of(r);
  CHECK(j["error"] == "ProviderError");
  CHECK(j["questions"]["questions"].empty());
  const std::string id = j["id"];
  CHECK(j["retry"] == "/sessions/" + id + "/questions");
  auto retry = c.Post(j["retry"].get<std::string>(), "", "application/json");
  REQUIRE(retry);
  CHECK(retry->status == 200);
  CHECK(body_of(retry)["questions"]["questions"].size() == 2);
}

TEST_CASE("http: fuzzed ids are 404 and never reach another session", "[http][isolation]") {
  ApiServer s;
  auto c = s.client();
  const std::string id = body_of(c.Post("/sessions", create_body(), "application/json"))["id"];
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    std::string probe = random_token();
    if (i % 3 == 0) {
      probe = id;
      probe[rng() % probe.size()] = probe[0] == 'a' ? 'b' : 'a';
      if (probe == id) continue;
    }
    auto r = c.Get("/sessions/" + probe);
    REQUIRE(r);
    REQUIRE(r->status == 404);
    REQUIRE(body_of(r)["error"] == "UnknownSession");
  }
  CHECK(c.Get("/sessions/not-an-id")->status == 404);
  CHECK(c.Get("/sessions/" + id)->status == 200);
}

TEST_CASE("http: access log carries method, path, status only", "[http][privacy]") {
  ApiServer s;
  auto c = s.client();
  Json p = Json::parse(create_body());
  p["email"]["body"] = "Could you confirm QQCANARYQQ?";
  const std::string id = body_of(c.Post("/sessions", p.dump(), "application/json"))["id"];
  c.Post("/sessions/" + id + "/answers", R"([{"question_id":"1","custom_options":["QQCANARYQQ answer"]}])",
         "application/json");
  c.Post("/sessions/" + id + "/draft", "", "application/json");
  s.log->flush();
  const std::string logs = s.log_text.str();
  CHECK(logs.find("POST /sessions -> 201") != std::string::npos);
  CHECK(logs.find("QQCANARYQQ") == std::string::npos);
}
