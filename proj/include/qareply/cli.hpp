#pragma once

// Command-line driver: questions, draft, metrics, serve.
//
// Exit codes: 0 ok, 2 input/ingest/parse failure (and port in use),
// 3 provider failure, 4 validation or referential failure.

#include <CLI11.hpp>
#include <pthread.h>
#include <signal.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>

#include "qareply/draft_engine.hpp"
#include "qareply/http_api.hpp"
#include "qareply/ingest.hpp"
#include "qareply/llm.hpp"
#include "qareply/metrics.hpp"
#include "qareply/question_engine.hpp"
#include "qareply/service.hpp"

namespace qareply::cli {

enum Exit : int { kOk = 0, kInput = 2, kProvider = 3, kValidation = 4 };

enum class ProviderKind { Live, Mock };
enum class OutputFormat { Json, Pretty };

struct CliConfig {
  ProviderKind provider = ProviderKind::Live;
  std::string config_file;
  OutputFormat format = OutputFormat::Json;

  ProviderConfig provider_config;
  ServiceConfig service;
  UserIdentity user;
};

/// Loads the optional JSON config file over the defaults, then the environment.
inline void load_config(CliConfig& c) {
  if (!c.config_file.empty()) {
    std::ifstream in(c.config_file);
    if (!in) throw Error(ErrorCode::Io, "cannot read config file " + c.config_file);
    const Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::WrongType, "config file is not a JSON object");
    if (j.contains("provider")) c.provider_config = j.at("provider").get<ProviderConfig>();
    if (j.contains("user")) c.user = j.at("user").get<UserIdentity>();
    auto& v = c.service.questions.validation;
    if (j.contains("question_cap")) v.max_questions = j.at("question_cap").get<std::size_t>();
    if (j.contains("fuzzy_threshold")) v.anchor.fuzzy_threshold = j.at("fuzzy_threshold").get<double>();
    if (j.contains("other_patterns")) v.other_patterns = j.at("other_patterns").get<std::vector<std::string>>();
    if (j.contains("max_attempts")) c.service.questions.max_attempts = j.at("max_attempts").get<int>();
    if (j.contains("max_generations")) c.service.drafts.max_generations = j.at("max_generations").get<int>();
    auto& ing = c.service.ingest;
    if (j.contains("max_body_chars")) ing.max_body_chars = j.at("max_body_chars").get<std::size_t>();
    if (j.contains("strip_quoted_trail")) ing.strip_quoted_trail = j.at("strip_quoted_trail").get<bool>();
    if (j.contains("default_locale")) ing.default_locale = j.at("default_locale").get<std::string>();
    if (ing.max_body_chars == 0) throw Error(ErrorCode::WrongType, "max_body_chars must be > 0");
  }
  c.provider_config.apply_env();
}

inline std::unique_ptr<CompletionProvider> make_provider(const CliConfig& c) {
  if (c.provider == ProviderKind::Mock) return std::make_unique<MockProvider>();
  return std::make_unique<HttpProvider>(c.provider_config);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
  f << content;
}

inline Json read_json_file(const std::string& path) {
  Json j = Json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::WrongType, path + " is not valid JSON");
  return j;
}

inline EmailMessage load_email(const std::string& path, bool json, const IngestConfig& cfg, std::ostream& err) {
  const std::string bytes = read_file(path);
  const bool as_json = json || (path.size() > 5 && path.compare(path.size() - 5, 5, ".json") == 0);
  if (as_json) return parse_json_email_text(bytes, cfg);
  std::vector<std::string> warnings;
  EmailMessage m = parse_mail_file(bytes, cfg, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  return m;
}

inline int exit_code_for(ErrorCode c) {
  if (is_provider_error(c)) return kProvider;
  switch (c) {
    case ErrorCode::DuplicateId:
    case ErrorCode::EmptyId:
    case ErrorCode::EmptyQuestionText:
    case ErrorCode::TooManyQuestions:
    case ErrorCode::NoJsonFound:
    case ErrorCode::SchemaMismatch:
    case ErrorCode::UnknownQuestionId:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::InvalidAnswer:
    case ErrorCode::NothingToSay:
    case ErrorCode::RegenerationLimit:
      return kValidation;
    default:
      return kInput;
  }
}

// ---------------------------------------------------------------------------

struct QuestionsArgs {
  std::string email;
  bool json = false;
  std::string out;
};

inline int cmd_questions(const CliConfig& c, const QuestionsArgs& a, std::ostream& out, std::ostream& err) {
  EmailMessage email;
  try {
    email = load_email(a.email, a.json, c.service.ingest, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  }
  try {
    auto llm = make_provider(c);
    const QuestionGeneration g = generate_questions(email, c.user, *llm, c.service.questions);
    write_output(a.out, Json(g.questions).dump(2) + "\n", out);
    if (c.format == OutputFormat::Pretty) {
      for (const auto& q : g.questions.questions) {
        err << "[" << q.id << "] " << q.question;
        if (q.anchor) err << "  @" << q.anchor->start << "+" << q.anchor->length;
        else err << "  (unanchored)";
        err << "\n";
      }
    }
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::Io ? kInput : (e.code() == ErrorCode::EmptyBody ? kInput : exit_code_for(e.code()));
  }
}

struct DraftArgs {
  std::string email;
  bool json = false;
  std::string questions;
  std::string answers;
  std::string prefs;
  std::string out;
};

inline int cmd_draft(const CliConfig& c, const DraftArgs& a, std::ostream& out, std::ostream& err) {
  Session s;
  try {
    s.email = load_email(a.email, a.json, c.service.ingest, err);
    s.user = c.user;
    QuestionSet qs = read_json_file(a.questions).get<QuestionSet>();
    if (!a.answers.empty()) s.answers = answers_from_json(read_json_file(a.answers));
    if (!a.prefs.empty()) s.preferences = read_json_file(a.prefs).get<ReplyPreferences>();
    s.question_set = std::move(qs);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const Json::exception&) {
    err << "error: an input file has a field of the wrong JSON type\n";
    return kInput;
  }
  try {
    s.question_set = validate_question_set(std::move(*s.question_set), s.email, c.service.questions.validation);
    s.state = SessionState::Questioned;
    check_answers(*s.question_set, s.answers);
    if (!s.answers.empty()) s.advance_to(SessionState::Answered);
    auto llm = make_provider(c);
    const DraftReply& d = generate_draft(s, *llm, c.service.drafts);
    write_output(a.out, d.text + "\n", out);
    out << "prompt-digest: " << d.prompt_digest << "\n";
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::Io ? kInput : exit_code_for(e.code());
  }
}

inline int cmd_metrics(const CliConfig& c, const std::string& records, std::ostream& out, std::ostream& err) {
  std::vector<metrics::ConditionSummary> summary;
  try {
    std::istringstream in(read_file(records));
    summary = metrics::summarize(metrics::read_csv(in));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  }
  if (c.format == OutputFormat::Json) {
    Json arr = Json::array();
    for (const auto& s : summary)
      arr.push_back(Json{{"condition", s.condition},
                         {"rows", s.rows},
                         {"mean_chars_per_second", s.mean_chars_per_second},
                         {"mean_prompt_char_count", s.mean_prompt_char_count}});
    out << arr.dump(2) << "\n";
  } else {
    out << "condition      rows  chars/sec  prompt chars\n";
    for (const auto& s : summary) {
      char line[128];
      std::snprintf(line, sizeof line, "%-13s %5zu  %9.4f  %12.2f\n", std::string(to_string(s.condition)).c_str(),
                    s.rows, s.mean_chars_per_second, s.mean_prompt_char_count);
      out << line;
    }
  }
  return kOk;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
  std::string store = "ephemeral";
  std::string store_dir;
  long ttl_seconds = 86400;
};

/// Blocks until SIGINT/SIGTERM. The ephemeral store is cleared on the way out.
inline int cmd_serve(const CliConfig& c, const ServeArgs& a, std::ostream& out, std::ostream& err) {
  StoreConfig store_cfg;
  store_cfg.ttl = std::chrono::seconds(a.ttl_seconds);
  try {
    store_cfg.mode = parse_StoreMode(a.store);
    if (store_cfg.mode == StoreMode::EncryptedFile) {
      const char* key = std::getenv("QAREPLY_STORE_KEY");
      if (!key || a.store_dir.empty())
        throw Error(ErrorCode::MissingField, "encrypted-file store needs --store-dir and QAREPLY_STORE_KEY");
      store_cfg.key = parse_store_key(key);
      store_cfg.directory = a.store_dir;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  }

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto store = std::make_shared<SessionStore>(store_cfg);
  auto provider = std::shared_ptr<CompletionProvider>(make_provider(c));
  auto service = std::make_shared<SessionService>(store, provider, c.service);
  HttpApi api(service, HttpApiConfig{a.cors_origin});
  httplib::Server svr;
  configure_server(svr);
  api.mount(svr);

  int port = a.port;
  if (port == 0) {
    port = svr.bind_to_any_port(a.host);
    if (port < 0) port = 0;
  } else if (!svr.bind_to_port(a.host, port)) {
    port = 0;
  }
  if (port == 0) {
    err << "error: cannot bind " << a.host << ":" << a.port << "\n";
    return kInput;
  }
  out << "listening on " << a.host << ":" << port << std::endl;

  std::atomic<bool> done{false};
  std::thread watcher([&] {
    const timespec tick{0, 200'000'000};
    while (!done.load()) {
      if (sigtimedwait(&signals, nullptr, &tick) > 0) {
        svr.stop();
        return;
      }
      store->purge_expired();
    }
  });
  svr.listen_after_bind();
  done = true;
  watcher.join();
  store->clear();
  spdlog::info("server stopped");
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"QA-based email reply assistant"};
  app.require_subcommand(1);
  CliConfig cfg;
  std::string provider = "live";
  std::string format = "json";
  app.add_option("--provider", provider, "Completion provider")->check(CLI::IsMember({"live", "mock"}));
  app.add_option("--config", cfg.config_file, "JSON configuration file");
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "pretty"}));
  std::string user_name, user_address, locale;
  app.add_option("--user-name", user_name, "Your name, used to sign replies");
  app.add_option("--user-address", user_address, "Your email address");
  app.add_option("--locale", locale, "Your language tag, e.g. en or ja");

  QuestionsArgs qa;
  auto* questions = app.add_subcommand("questions", "Generate anchored questions for an email");
  questions->add_option("--email", qa.email, "Email file (.eml, or JSON with --json)")->required();
  questions->add_flag("--json", qa.json, "Email file is a JSON payload");
  questions->add_option("--out", qa.out, "Output file (default stdout)");

  DraftArgs da;
  auto* draft = app.add_subcommand("draft", "Generate a reply draft from answers");
  draft->add_option("--email", da.email, "Email file")->required();
  draft->add_flag("--json", da.json, "Email file is a JSON payload");
  draft->add_option("--questions", da.questions, "Question set JSON")->required();
  draft->add_option("--answers", da.answers, "Answers JSON array");
  draft->add_option("--prefs", da.prefs, "Reply preferences JSON");
  draft->add_option("--out", da.out, "Output file (default stdout)");

  std::string records;
  auto* metrics_cmd = app.add_subcommand("metrics", "Summarize a metrics CSV");
  metrics_cmd->add_option("--records", records, "CSV file")->required();

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run the session service");
  serve->add_option("--host", sa.host, "Listen address");
  serve->add_option("--port", sa.port, "Listen port (0 picks a free port)");
  serve->add_option("--cors-origin", sa.cors_origin, "Allowed browser origin");
  serve->add_option("--store", sa.store, "Session store")->check(CLI::IsMember({"ephemeral", "encrypted-file"}));
  serve->add_option("--store-dir", sa.store_dir, "Directory for the encrypted-file store");
  serve->add_option("--ttl", sa.ttl_seconds, "Session lifetime in seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kInput;
  }

  cfg.provider = provider == "mock" ? ProviderKind::Mock : ProviderKind::Live;
  cfg.format = format == "pretty" ? OutputFormat::Pretty : OutputFormat::Json;
  try {
    load_config(cfg);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  }
  if (!user_name.empty()) cfg.user.name = user_name;
  if (!user_address.empty()) cfg.user.address = user_address;
  if (!locale.empty()) cfg.user.locale = locale;
  else if (cfg.user.locale.empty()) cfg.user.locale = cfg.service.ingest.default_locale;

  if (*questions) return cmd_questions(cfg, qa, out, err);
  if (*draft) return cmd_draft(cfg, da, out, err);
  if (*metrics_cmd) return cmd_metrics(cfg, records, out, err);
  if (*serve) return cmd_serve(cfg, sa, out, err);
  return kInput;
}

}  // namespace qareply::cli
