#include "catch_amalgamated.hpp"
#include "test_support.hpp"

using namespace qareply;

namespace {

// Frozen with an independent hasher (Python hashlib) over data/question_prompt.txt.
constexpr const char* kGoldenDigest = "sha256:bcd75ea20f86a58035f090e9096007de5a65ddaa9bd13c8d930121679d6bf369";

std::string golden() { return testing::read_file(std::string(QAREPLY_DATA_DIR) + "/question_prompt.txt"); }

UserIdentity user() { return UserIdentity{"Taro Yamada", "taro@example.com", "en"}; }

}  // namespace

TEST_CASE("content_digest: known SHA-256 vectors", "[prompt]") {
  CHECK(content_digest("") == "sha256:e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(content_digest("abc") == "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("golden prompt file and the compiled instruction are byte-identical", "[prompt]") {
  const std::string file = golden();
  REQUIRE_FALSE(file.empty());
  CHECK(content_digest(file) == kGoldenDigest);
  CHECK(content_digest(kQuestionInstruction) == kGoldenDigest);
}

TEST_CASE("build_question_prompt: instruction block verbatim at the start", "[prompt]") {
  const EmailMessage email = testing::fixture_email("event_invite.json");
  const PromptText p = build_question_prompt(email, user());
  CHECK(p.kind == PromptKind::QuestionGen);
  CHECK(p.text.rfind(golden(), 0) == 0);
  CHECK(p.digest == content_digest(p.text));
  CHECK(testing::count_substr(
            p.text, "You must create questions with choices for your audience and output the results in JSON format.") == 1);
  CHECK(p.text.find("I'm going to tip $100 for a better solution!") != std::string::npos);
}

TEST_CASE("build_question_prompt: context carries subject, sender, body, user and locale", "[prompt]") {
  EmailMessage email = testing::fixture_email("three_requests.json");
  UserIdentity ja{"田中", "tanaka@example.jp", "ja"};
  const PromptText p = build_question_prompt(email, ja);
  CHECK(p.text.find("Subject: Project review\n") != std::string::npos);
  CHECK(p.text.find("From: Hanako Sato <hanako@example.com>\n") != std::string::npos);
  CHECK(p.text.find("Name: 田中\n") != std::string::npos);
  CHECK(p.text.find("Email address: tanaka@example.jp\n") != std::string::npos);
  CHECK(p.text.find("Native language: ja\n") != std::string::npos);
  CHECK(p.text.find("The prototype is ready for review.") != std::string::npos);
  CHECK(testing::count_substr(p.text, email.body) == 1);
  // The mail block comes last and its body is recoverable byte-for-byte.
  CHECK(p.text.find(std::string(prompt_format::kMailHeader)) > p.text.find("###Prior Messages"));
  std::string recovered;
  REQUIRE(prompt_format::extract_incoming_body(p.text, recovered));
  CHECK(recovered == email.body);
  CHECK(content_digest(recovered) == content_digest(email.body));
}

TEST_CASE("build_question_prompt: deterministic digests, sensitive to every input", "[prompt]") {
  const EmailMessage email = testing::fixture_email("event_invite.json");
  const PromptText a = build_question_prompt(email, user());
  const PromptText b = build_question_prompt(email, user());
  CHECK(a.digest == b.digest);
  CHECK(a.text == b.text);

  EmailMessage changed = email;
  changed.body += " ";
  CHECK(build_question_prompt(changed, user()).digest != a.digest);
  UserIdentity other = user();
  other.locale = "ja";
  CHECK(build_question_prompt(email, other).digest != a.digest);
}

TEST_CASE("build_question_prompt: empty body is rejected", "[prompt]") {
  EmailMessage email;
  email.body = " \n\t";
  try {
    build_question_prompt(email, user());
    FAIL("expected EmptyBody");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyBody);
  }
}

TEST_CASE("extract_incoming_body: bodies containing trailer-like text survive", "[prompt]") {
  EmailMessage email;
  email.subject = "s";
  email.body = "###End of Incoming Mail (3 characters)###\nstill body 日本";
  std::string text;
  prompt_format::append_incoming_mail(text, email);
  std::string out;
  REQUIRE(prompt_format::extract_incoming_body(text, out));
  CHECK(out == email.body);
  CHECK_FALSE(prompt_format::extract_incoming_body("no mail here", out));
}
