#pragma once

// HTTP+JSON surface of SessionService.
//
//   POST /sessions                       {"email": {...}, "user": {...}}
//   GET  /sessions/{id}
//   POST /sessions/{id}/questions        retry question generation
//   POST /sessions/{id}/answers          [Answer, ...] or {"answers": [...]}
//   POST /sessions/{id}/preferences      ReplyPreferences
//   POST /sessions/{id}/draft
//   POST /sessions/{id}/draft/regenerate
//   POST /sessions/{id}/draft/edit       {"text": "..."}
//   POST /sessions/{id}/finalize         {"final_text": "..."}
//   GET  /healthz
//
// Error bodies are {"error": <code>, "message": <text>}. Neither bodies nor
// log lines ever echo request content.

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <memory>
#include <string>

#include "qareply/service.hpp"

namespace qareply {

struct HttpApiConfig {
  std::string cors_origin = "*";
  std::size_t worker_threads = 32;
};

/// Socket and threading setup shared by every listener. SO_REUSEADDR only:
/// the library default (SO_REUSEPORT) would let a second instance share the
/// port instead of failing to bind.
inline void configure_server(httplib::Server& svr, const HttpApiConfig& cfg = {}) {
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  const std::size_t n = std::max<std::size_t>(1, cfg.worker_threads);
  svr.new_task_queue = [n] { return new httplib::ThreadPool(n); };
  svr.set_keep_alive_max_count(100);
  svr.set_keep_alive_timeout(2);
}

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownSession:
      return 404;
    case ErrorCode::MissingField:
    case ErrorCode::WrongType:
    case ErrorCode::UnknownQuestionId:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::InvalidAnswer:
    case ErrorCode::EmptyFinalText:
    case ErrorCode::EmptyBody:
    case ErrorCode::MalformedHeaders:
    case ErrorCode::NoTextPart:
      return 400;
    case ErrorCode::BodyTooLarge:
      return 413;
    case ErrorCode::AlreadyFinalized:
    case ErrorCode::InvalidState:
      return 409;
    case ErrorCode::NothingToSay:
    case ErrorCode::NoDraft:
    case ErrorCode::RegenerationLimit:
      return 422;
    case ErrorCode::AuthError:
    case ErrorCode::RateLimited:
    case ErrorCode::Timeout:
    case ErrorCode::TransportError:
    case ErrorCode::ProviderError:
    case ErrorCode::NoJsonFound:
    case ErrorCode::SchemaMismatch:
    case ErrorCode::DuplicateId:
    case ErrorCode::EmptyId:
    case ErrorCode::EmptyQuestionText:
    case ErrorCode::TooManyQuestions:
      return 502;
    default:
      return 500;
  }
}

inline Json error_body(const Error& e) { return Json{{"error", to_string(e.code())}, {"message", e.what()}}; }

class HttpApi {
 public:
  HttpApi(std::shared_ptr<SessionService> service, HttpApiConfig cfg = {}, std::shared_ptr<spdlog::logger> log = nullptr)
      : service_(std::move(service)), cfg_(std::move(cfg)), log_(log ? std::move(log) : spdlog::default_logger()) {}

  void mount(httplib::Server& svr) {
    svr.set_default_headers({{"Access-Control-Allow-Origin", cfg_.cors_origin},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});
    svr.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    svr.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, Json{{"status", "ok"}});
    });

    svr.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Json body = parse_body(req);
        CreatedSession c = service_->create(body);
        Json out{{"id", c.id}, {"questions", c.questions}};
        if (c.generation_error) {
          out["state"] = to_string(SessionState::Created);
          out["error"] = to_string(c.generation_error->code());
          out["message"] = c.generation_error->what();
          out["retry"] = "/sessions/" + c.id + "/questions";
          reply(res, 502, out);
        } else {
          out["state"] = to_string(SessionState::Questioned);
          reply(res, 201, out);
        }
      });
    });

    const std::string id = "/sessions/([0-9a-f]{32})";

    svr.Get(id, [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, Json(service_->get(req.matches[1]))); });
    });

    svr.Post(id + "/questions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, Json{{"id", req.matches[1]}, {"questions", service_->retry_questions(req.matches[1])}}); });
    });

    svr.Post(id + "/answers", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, service_->submit_answers(req.matches[1], answers_from_json(parse_body(req)))); });
    });

    svr.Post(id + "/preferences", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto prefs = parse_body(req).get<ReplyPreferences>();
        service_->set_preferences(req.matches[1], prefs);
        reply(res, 200, Json{{"ok", true}, {"preferences", prefs}});
      });
    });

    svr.Post(id + "/draft", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 201, Json(service_->generate_draft(req.matches[1], false))); });
    });

    svr.Post(id + "/draft/regenerate", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 201, Json(service_->generate_draft(req.matches[1], true))); });
    });

    svr.Post(id + "/draft/edit", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Json body = parse_body(req);
        reply(res, 200, Json(service_->edit_draft(req.matches[1], json_field::string(body, "text"))));
      });
    });

    svr.Post(id + "/finalize", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Json body = parse_body(req);
        reply(res, 200, Json(service_->finalize(req.matches[1], json_field::string(body, "final_text"))));
      });
    });

    svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 404) reply(res, 404, Json{{"error", "UnknownSession"}, {"message", "not found"}});
    });

    svr.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
      log_->info("{} {} -> {}", req.method, req.path, res.status);
    });
  }

 private:
  static void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static Json parse_body(const httplib::Request& req) {
    Json j = Json::parse(req.body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::WrongType, "request body is not valid JSON");
    return j;
  }

  template <typename F>
  void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      reply(res, http_status(e.code()), error_body(e));
    } catch (const Json::exception&) {
      // nlohmann messages can quote the offending input; keep them out of responses.
      reply(res, 400, Json{{"error", "WrongType"}, {"message", "field has the wrong JSON type"}});
    } catch (const std::exception&) {
      reply(res, 500, Json{{"error", "Internal"}, {"message", "internal error"}});
    }
  }

  std::shared_ptr<SessionService> service_;
  HttpApiConfig cfg_;
  std::shared_ptr<spdlog::logger> log_;
};

}  // namespace qareply
