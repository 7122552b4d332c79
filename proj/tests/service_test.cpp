#include "catch_amalgamated.hpp"
#include "test_support.hpp"

#include <spdlog/sinks/ostream_sink.h>

using namespace qareply;
using testing::ScriptedProvider;

namespace {

struct Fixture {
  testing::FakeClock clock;
  std::shared_ptr<SessionStore> store = std::make_shared<SessionStore>(StoreConfig{}, clock.fn());
  std::ostringstream log_text;
  std::shared_ptr<spdlog::logger> log = std::make_shared<spdlog::logger>(
      "svc-test", std::make_shared<spdlog::sinks::ostream_sink_mt>(log_text));
  std::shared_ptr<CompletionProvider> llm;
  std::unique_ptr<SessionService> svc;

  explicit Fixture(std::shared_ptr<CompletionProvider> p = std::make_shared<MockProvider>()) : llm(std::move(p)) {
    log->set_level(spdlog::level::trace);
    svc = std::make_unique<SessionService>(store, llm, ServiceConfig{}, log);
  }

  static Json payload(const std::string& fixture = "event_invite.json") {
    return Json{{"email", Json::parse(testing::fixture(fixture))},
                {"user", {{"name", "Taro Yamada"}, {"address", "taro@example.com"}, {"locale", "en"}}}};
  }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("service: create generates anchored questions under the mock", "[service]") {
  Fixture f;
  const CreatedSession c = f.svc->create(Fixture::payload("three_requests.json"));
  CHECK_FALSE(c.generation_error);
  CHECK(c.questions.questions.size() == 3);
  const Session s = f.svc->get(c.id);
  CHECK(s.state == SessionState::Questioned);
  CHECK(s.opened_at == f.clock.now());
  for (const auto& q : s.question_set->questions) CHECK(q.anchor);
}

TEST_CASE("service: malformed payload creates no session", "[service]") {
  Fixture f;
  Json p = Fixture::payload();
  p["email"].erase("body");
  CHECK(code_of([&] { f.svc->create(p); }) == ErrorCode::MissingField);
  CHECK(code_of([&] { f.svc->create(Json{{"user", {}}}); }) == ErrorCode::MissingField);
  CHECK(f.store->size() == 0);
}

TEST_CASE("service: provider outage keeps the session and allows a retry", "[service]") {
  auto p = std::make_shared<ScriptedProvider>(
      std::vector<ScriptedProvider::Step>{ScriptedProvider::fail(ErrorCode::TransportError),
                                          ScriptedProvider::fail(ErrorCode::TransportError),
                                          ScriptedProvider::fail(ErrorCode::TransportError)},
      testing::fixture("event_invite_response.txt"));
  Fixture f(p);
  const CreatedSession c = f.svc->create(Fixture::payload());
  REQUIRE(c.generation_error);
  CHECK(c.generation_error->code() == ErrorCode::ProviderError);
  CHECK(c.questions.questions.empty());
  CHECK(f.svc->get(c.id).state == SessionState::Created);
  CHECK(code_of([&] { f.svc->submit_answers(c.id, {}); }) == ErrorCode::InvalidState);

  const QuestionSet qs = f.svc->retry_questions(c.id);
  CHECK(qs.questions.size() == 2);
  CHECK(f.svc->get(c.id).state == SessionState::Questioned);
  CHECK(code_of([&] { f.svc->retry_questions(c.id); }) == ErrorCode::InvalidState);
}

TEST_CASE("service: submit_answers accepts, rejects atomically, and overwrites", "[service]") {
  Fixture f(std::make_shared<ScriptedProvider>(std::vector<ScriptedProvider::Step>{},
                                               testing::fixture("event_invite_response.txt")));
  const std::string id = f.svc->create(Fixture::payload()).id;
  const Json summary = f.svc->submit_answers(id, {Answer{"1", {1}, {}, false}});
  CHECK(summary["state"] == "answered");
  CHECK(f.svc->get(id).answers.at(0).selected == std::set<std::size_t>{1});

  CHECK(code_of([&] { f.svc->submit_answers(id, {Answer{"2", {0}, {}, false}, Answer{"1", {5}, {}, false}}); }) ==
        ErrorCode::IndexOutOfRange);
  CHECK(f.svc->get(id).answers.size() == 1);
  CHECK(code_of([&] { f.svc->submit_answers(id, {Answer{"9", {}, {}, false}}); }) == ErrorCode::UnknownQuestionId);
  CHECK(code_of([&] { f.svc->submit_answers(id, {Answer{"1", {0}, {}, false}, Answer{"1", {1}, {}, false}}); }) ==
        ErrorCode::InvalidAnswer);
  CHECK(code_of([&] { f.svc->submit_answers(id, {Answer{"1", {}, {"  "}, false}}); }) == ErrorCode::InvalidAnswer);

  f.svc->submit_answers(id, {Answer{"1", {0}, {}, false}, Answer{"2", {0, 2}, {"July 20th"}, false}});
  const Session s = f.svc->get(id);
  CHECK(s.answers.size() == 2);
  CHECK(s.answers[0].selected == std::set<std::size_t>{0});
  CHECK(code_of([&] { f.svc->submit_answers("ffffffffffffffffffffffffffffffff", {}); }) == ErrorCode::UnknownSession);
}

TEST_CASE("service: preferences accept, overwrite, and reject unknown enum values", "[service]") {
  Fixture f;
  const std::string id = f.svc->create(Fixture::payload()).id;
  f.svc->set_preferences(id, Json::parse(R"({"tone":"friendly","relationship":"colleague"})").get<ReplyPreferences>());
  CHECK(f.svc->get(id).preferences.tone == Tone::Friendly);
  f.svc->set_preferences(id, Json::parse(R"({"tone":"apologetic"})").get<ReplyPreferences>());
  CHECK(f.svc->get(id).preferences.tone == Tone::Apologetic);
  CHECK(f.svc->get(id).preferences.relationship.empty());
  CHECK(code_of([] { Json::parse(R"({"tone":"sarcastic"})").get<ReplyPreferences>(); }) == ErrorCode::WrongType);
}

TEST_CASE("service: draft, regenerate, edit, finalize lifecycle", "[service]") {
  Fixture f;
  const std::string id = f.svc->create(Fixture::payload()).id;
  CHECK(code_of([&] { f.svc->generate_draft(id, true); }) == ErrorCode::NoDraft);
  CHECK(code_of([&] { f.svc->generate_draft(id); }) == ErrorCode::NothingToSay);
  CHECK(code_of([&] { f.svc->finalize(id, "text"); }) == ErrorCode::InvalidState);

  f.svc->submit_answers(id, {Answer{"1", {0}, {}, false}});
  const DraftReply d1 = f.svc->generate_draft(id);
  CHECK(d1.generation_index == 1);
  const DraftReply d2 = f.svc->generate_draft(id, true);
  CHECK(d2.generation_index == 2);
  CHECK(f.svc->edit_draft(id, "edited").edited);
  CHECK(f.svc->get(id).drafts.at(0) == d1);

  f.clock.advance(std::chrono::seconds(150));
  const std::string final_text(300, 'r');
  CHECK(code_of([&] { f.svc->finalize(id, " \n"); }) == ErrorCode::EmptyFinalText);
  const MetricsRecord r = f.svc->finalize(id, final_text);
  CHECK(r.final_char_count == 300);
  CHECK(r.elapsed_seconds == 150.0);
  CHECK(r.condition == Condition::QaBased);
  const Session s = f.svc->get(id);
  CHECK(s.state == SessionState::Finalized);
  CHECK(*s.finalized_at >= s.opened_at);

  CHECK(code_of([&] { f.svc->finalize(id, final_text); }) == ErrorCode::AlreadyFinalized);
  CHECK(code_of([&] { f.svc->submit_answers(id, {}); }) == ErrorCode::AlreadyFinalized);
  CHECK(code_of([&] { f.svc->generate_draft(id); }) == ErrorCode::AlreadyFinalized);
}

TEST_CASE("service: purge after TTL makes the session unknown", "[service]") {
  Fixture f;
  const std::string id = f.svc->create(Fixture::payload()).id;
  f.clock.advance(std::chrono::seconds(86400));
  f.store->purge_expired();
  CHECK(code_of([&] { f.svc->get(id); }) == ErrorCode::UnknownSession);
}

TEST_CASE("service: logs never carry email, answer, or draft content", "[service][privacy]") {
  Fixture f;
  const std::string canary = "ZZCANARYZZ";
  Json p = Fixture::payload();
  p["email"]["body"] = p["email"]["body"].get<std::string>() + " Could you reply " + canary + "?";
  p["email"]["subject"] = canary;
  const std::string id = f.svc->create(p).id;
  f.svc->submit_answers(id, {Answer{"1", {0}, {canary + "-answer"}, false}});
  ReplyPreferences prefs;
  prefs.free_instruction = canary + "-instruction";
  f.svc->set_preferences(id, prefs);
  f.svc->generate_draft(id);
  f.svc->edit_draft(id, canary + "-edit");
  CHECK(code_of([&] { f.svc->submit_answers(id, {Answer{canary, {}, {}, false}}); }) == ErrorCode::UnknownQuestionId);
  f.svc->finalize(id, canary + "-final");
  f.log->flush();
  CHECK_FALSE(f.log_text.str().empty());
  CHECK(f.log_text.str().find(canary) == std::string::npos);
}

TEST_CASE("session monotonicity: random operation logs never move state backward", "[service][property]") {
  Fixture f;
  std::mt19937 rng(5);
  for (int round = 0; round < 30; ++round) {
    const std::string id = f.svc->create(Fixture::payload()).id;
    SessionState last = f.svc->get(id).state;
    for (int step = 0; step < 15; ++step) {
      try {
        switch (rng() % 6) {
          case 0: f.svc->submit_answers(id, {Answer{"1", {rng() % 3}, {}, false}}); break;
          case 1: f.svc->set_preferences(id, ReplyPreferences{}); break;
          case 2: f.svc->generate_draft(id); break;
          case 3: f.svc->generate_draft(id, true); break;
          case 4: f.svc->edit_draft(id, "e"); break;
          case 5: f.svc->finalize(id, "done"); break;
        }
      } catch (const Error&) {
      }
      const SessionState now = f.svc->get(id).state;
      REQUIRE(now >= last);
      last = now;
    }
  }
}
