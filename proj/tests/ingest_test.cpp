#include "catch_amalgamated.hpp"
#include "test_support.hpp"

using namespace qareply;

namespace {

EmailMessage eml(const std::string& name, const IngestConfig& cfg = {}, std::vector<std::string>* w = nullptr) {
  return parse_mail_file(testing::fixture(name), cfg, w);
}

}  // namespace

TEST_CASE("parse_mail_file: single-part plain text", "[ingest]") {
  const EmailMessage m = eml("plain.eml");
  CHECK(m.subject == "Meeting");
  CHECK(m.sender_name == "Alice Example");
  CHECK(m.sender_address == "alice@example.com");
  CHECK(m.body == "Hello Bob,\n\nCan we meet on Friday at 3pm?  The room is booked.\n\nAlice\n");
  CHECK(utf8::length(m.body) == 70);
  CHECK(m.thread.empty());
}

TEST_CASE("parse_mail_file: multipart prefers text/plain and decodes quoted-printable", "[ingest]") {
  const EmailMessage m = eml("multipart.eml");
  CHECK(m.subject == "会議の件");
  CHECK(m.sender_name == "Carol Q.");
  CHECK(m.body == "Hello Bob,\n\nThis is the plain version.\nSecond line & more, café.\n");
  CHECK(utf8::length(m.body) == 65);
}

TEST_CASE("parse_mail_file: base64 Japanese body has the oracle scalar count", "[ingest]") {
  const EmailMessage m = eml("japanese_b64.eml");
  CHECK(m.subject == "打ち合わせの日程");
  CHECK(m.sender_name == "佐藤");
  CHECK(m.sender_address == "sato@example.jp");
  CHECK(utf8::length(m.body) == 72);
  CHECK(m.body.rfind("田中様\n", 0) == 0);
}

TEST_CASE("parse_mail_file: HTML-only mail is flattened with breaks kept as newlines", "[ingest]") {
  const EmailMessage m = eml("html_only.eml");
  CHECK(m.body == "Line one\nLine\u00A0two\nCould you reply by Monday?");
}

TEST_CASE("parse_mail_file: attachments are ignored with a warning", "[ingest]") {
  std::vector<std::string> warnings;
  const EmailMessage m = eml("with_attachment.eml", {}, &warnings);
  CHECK(m.body == "See the attached report.");
  CHECK(warnings.size() == 1);
}

TEST_CASE("parse_mail_file: error paths", "[ingest]") {
  auto code_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(code_of([] { eml("no_text.eml"); }) == ErrorCode::NoTextPart);
  CHECK(code_of([] { parse_mail_file(""); }) == ErrorCode::MalformedHeaders);
  CHECK(code_of([] { parse_mail_file("this is not a header line\n\nbody"); }) == ErrorCode::MalformedHeaders);
  IngestConfig small;
  small.max_body_chars = 10;
  CHECK(code_of([&] { eml("plain.eml", small); }) == ErrorCode::BodyTooLarge);
}

TEST_CASE("parse_mail_file: quoted trail is kept by default and stripped on request", "[ingest]") {
  const std::string raw =
      "From: a@example.com\nSubject: Re: x\n\nSounds good.\n\nOn Mon, Bob wrote:\n> earlier text\n> more\n";
  CHECK(parse_mail_file(raw).body == "Sounds good.\n\nOn Mon, Bob wrote:\n> earlier text\n> more\n");
  IngestConfig cfg;
  cfg.strip_quoted_trail = true;
  CHECK(parse_mail_file(raw, cfg).body == "Sounds good.");
}

TEST_CASE("parse_mail_file: CRLF input yields LF body", "[ingest]") {
  const std::string raw = "From: a@example.com\r\nSubject: s\r\n\r\nline1\r\nline2\r\n";
  CHECK(parse_mail_file(raw).body == "line1\nline2\n");
}

TEST_CASE("parse_json_email: direct mapping", "[ingest]") {
  const EmailMessage m =
      parse_json_email_text(R"({"subject":"s","sender_name":"a","sender_address":"a@x","body":"b"})");
  CHECK(m.subject == "s");
  CHECK(m.sender_name == "a");
  CHECK(m.sender_address == "a@x");
  CHECK(m.body == "b");
  CHECK(m.thread.empty());
}

TEST_CASE("parse_json_email: thread order preserved", "[ingest]") {
  const Json j = Json::parse(R"({"subject":"s","sender_name":"a","sender_address":"a@x","body":"b",
    "thread":[{"subject":"t1","sender_name":"p","sender_address":"p@x","body":"first"},
              {"subject":"t2","sender_name":"q","sender_address":"q@x","body":"second"}]})");
  const EmailMessage m = parse_json_email(j);
  REQUIRE(m.thread.size() == 2);
  CHECK(m.thread[0].body == "first");
  CHECK(m.thread[1].body == "second");
}

TEST_CASE("parse_json_email: missing body and wrong types are typed errors", "[ingest]") {
  try {
    parse_json_email_text(R"({"subject":"s","sender_name":"a","sender_address":"a@x"})");
    FAIL("expected MissingField");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingField);
  }
  try {
    parse_json_email_text(R"({"subject":"s","sender_name":"a","sender_address":"a@x","body":42})");
    FAIL("expected WrongType");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WrongType);
    CHECK(std::string(e.what()).find("42") == std::string::npos);
  }
  CHECK_THROWS_AS(parse_json_email_text("{not json"), Error);
}

TEST_CASE("parse_json_email: body whitespace and break tokens are untouched", "[ingest]") {
  Json j{{"subject", "s"}, {"sender_name", "a"}, {"sender_address", "a@x"}, {"body", "a  b<br>\r\n c\t"}};
  CHECK(parse_json_email(j).body == "a  b<br>\r\n c\t");
}

TEST_CASE("parse_json_email: serialize round trip is identity", "[ingest][property]") {
  Catch::Generators::RandomIntegerGenerator<int> gen(0, 1'000'000, 5);
  auto next = [&](int mod) {
    const int v = gen.get();
    gen.next();
    return v % mod;
  };
  const std::vector<std::string> atoms{"a", " ", "\n", "日本", "\"q\"", "\\", "<br>", "\t", "é", "😀"};
  auto text = [&] {
    std::string s;
    for (int k = next(12); k > 0; --k) s += atoms[next(static_cast<int>(atoms.size()))];
    return s;
  };
  for (int round = 0; round < 300; ++round) {
    EmailMessage m{text(), text(), text(), text(), {}, std::nullopt};
    for (int k = next(3); k > 0; --k) m.thread.push_back(EmailMessage{text(), text(), text(), text(), {}, std::nullopt});
    if (next(2)) m.received_at = Timestamp(std::chrono::milliseconds(1'700'000'000'123LL + next(100000)));
    REQUIRE(parse_json_email(serialize_email(m)) == m);
    REQUIRE(parse_json_email_text(serialize_email(m).dump()) == m);
  }
}

TEST_CASE("mime helpers", "[ingest]") {
  CHECK(mime::decode_header_words("=?UTF-8?B?5Lya6K2w44Gu5Lu2?=") == "会議の件");
  CHECK(mime::decode_header_words("=?iso-8859-1?Q?caf=E9?= time") == "café time");
  CHECK(mime::quoted_printable_decode("soft=\nbreak =3D ok") == "softbreak = ok");
  CHECK(mime::base64_decode("aGVsbG8=") == std::optional<std::string>("hello"));
  CHECK(mime::to_utf8("\x93\xfa\x96\x7b", "shift_jis") == "日本");
  const auto [name, addr] = mime::parse_mailbox("\"Doe, Jane\" <jane@example.com>");
  CHECK(name == "Doe, Jane");
  CHECK(addr == "jane@example.com");
  CHECK(mime::parse_mailbox("bare@example.com").second == "bare@example.com");
  const auto date = mime::parse_rfc5322_date("Tue, 14 Oct 2025 09:30:00 +0900");
  REQUIRE(date);
  CHECK(format_timestamp(*date) == "2025-10-14T00:30:00.000Z");
}
