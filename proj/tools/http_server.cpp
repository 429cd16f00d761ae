#include "http_server.hpp"

#define CPPHTTPLIB_LISTEN_BACKLOG 128
#include <httplib.h>
#include <json.hpp>

namespace semspace_tools {
namespace {

using nlohmann::json;

void check(ss_status status) {
  if (status != SS_OK) throw StatusError(status, ss_last_error());
}

void send_json(httplib::Response& res, int code, const json& body) {
  res.status = code;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ss_status status,
                const std::string& message) {
  send_json(res, http_status(status),
            {{"error", {{"reason", ss_status_name(status)}, {"message", message}}}});
}

void send_owned_json(httplib::Response& res, char* text) {
  std::string body(text);
  ss_string_free(text);
  res.status = 200;
  res.set_content(body, "application/json");
}

std::size_t parse_size(const std::string& text, const char* what) {
  std::size_t pos = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size()) {
    throw StatusError(SS_ERR_USAGE, std::string("invalid ") + what);
  }
  return static_cast<std::size_t>(value);
}

template <typename Fn>
void handle(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const StatusError& e) {
    send_error(res, e.status(), e.what());
  } catch (const json::exception& e) {
    send_error(res, SS_ERR_PARSE, e.what());
  } catch (const std::exception& e) {
    send_error(res, SS_ERR_INTERNAL, e.what());
  }
}

}  // namespace

int http_status(ss_status status) {
  switch (status) {
    case SS_OK:
      return 200;
    case SS_ERR_USAGE:
    case SS_ERR_PARSE:
    case SS_ERR_VALIDATION:
      return 400;
    case SS_ERR_NOT_FOUND:
      return 404;
    case SS_ERR_DEGENERATE_QUERY:
    case SS_ERR_UNEMBEDDABLE:
      return 422;
    default:
      return 500;
  }
}

EngineHandle open_engine(const EngineSource& source) {
  auto c_str = [](const std::string& s) { return s.empty() ? nullptr : s.c_str(); };
  ss_engine_paths paths{c_str(source.corpus), c_str(source.text_model),
                        c_str(source.visual_model), c_str(source.index),
                        source.aggregation};
  ss_engine* engine = nullptr;
  check(ss_engine_open(&paths, &engine));
  return EngineHandle(engine, [](const ss_engine* e) {
    ss_engine_free(const_cast<ss_engine*>(e));
  });
}

QueryServer::QueryServer(EngineSource source, ServerOptions options)
    : source_(std::move(source)),
      options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()) {}

QueryServer::~QueryServer() { stop(); }

EngineHandle QueryServer::snapshot() const {
  std::lock_guard lock(engine_mutex_);
  return engine_;
}

void QueryServer::bind() {
  auto engine = open_engine(source_);
  {
    std::lock_guard lock(engine_mutex_);
    engine_ = std::move(engine);
  }
  routes();
  // The library default adds SO_REUSEPORT, which lets a second server share
  // a port that is already in use instead of failing.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (!options_.ui_dir.empty() &&
      !server_->set_mount_point("/", options_.ui_dir)) {
    throw StatusError(SS_ERR_IO, "ui directory '" + options_.ui_dir +
                                     "' does not exist");
  }
  if (options_.port == 0) {
    bound_port_ = server_->bind_to_any_port(options_.host);
  } else if (server_->bind_to_port(options_.host, options_.port)) {
    bound_port_ = options_.port;
  }
  if (bound_port_ < 0) {
    throw StatusError(SS_ERR_IO, "cannot bind " + options_.host + ":" +
                                     std::to_string(options_.port) +
                                     " (port in use?)");
  }
}

void QueryServer::listen() { server_->listen_after_bind(); }

void QueryServer::start() {
  thread_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
}

void QueryServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

void QueryServer::routes() {
  auto& s = *server_;

  s.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"version", ss_version()}});
  });

  s.Post("/api/query", [this](const httplib::Request& req,
                              httplib::Response& res) {
    handle(res, [&] {
      const auto body = json::parse(req.body);
      const auto engine = snapshot();
      std::size_t k = body.value("k", options_.default_k);
      if (k < 1 || k > options_.max_k) {
        throw StatusError(SS_ERR_USAGE, "k must be in [1, " +
                                            std::to_string(options_.max_k) + "]");
      }
      ss_ranking* ranking = nullptr;
      if (body.contains("query")) {
        const auto text = body.at("query").get<std::string>();
        check(ss_engine_query_string(engine.get(), text.c_str(), k, &ranking));
      } else {
        const auto& terms = body.at("terms");
        if (!terms.is_array()) throw StatusError(SS_ERR_USAGE, "terms must be an array");
        std::vector<std::string> values;
        std::vector<ss_query_term> c_terms;
        values.reserve(terms.size());
        for (const auto& t : terms) {
          ss_query_term term{SS_TERM_TEXT, nullptr, t.value("weight", 1.0)};
          if (t.contains("image_id")) {
            term.kind = SS_TERM_IMAGE;
            values.push_back(t.at("image_id").get<std::string>());
          } else {
            values.push_back(t.at("text").get<std::string>());
          }
          c_terms.push_back(term);
        }
        for (std::size_t i = 0; i < c_terms.size(); ++i) {
          c_terms[i].value = values[i].c_str();
        }
        check(ss_engine_query(engine.get(), c_terms.data(), c_terms.size(), k,
                              &ranking));
      }
      json results = json::array();
      for (std::size_t i = 0; i < ss_ranking_size(ranking); ++i) {
        results.push_back({{"id", ss_ranking_id(ranking, i)},
                           {"score", ss_ranking_score(ranking, i)}});
      }
      json dropped = json::array();
      for (std::size_t i = 0; i < ss_ranking_dropped_count(ranking); ++i) {
        dropped.push_back(ss_ranking_dropped(ranking, i));
      }
      ss_ranking_free(ranking);
      send_json(res, 200, {{"results", results}, {"dropped", dropped}});
    });
  });

  s.Get(R"(/api/items/(.+))", [this](const httplib::Request& req,
                                     httplib::Response& res) {
    handle(res, [&] {
      const auto engine = snapshot();
      char* text = nullptr;
      check(ss_engine_item_json(engine.get(), req.matches[1].str().c_str(), &text));
      send_owned_json(res, text);
    });
  });

  s.Get("/api/vocab", [this](const httplib::Request& req,
                             httplib::Response& res) {
    handle(res, [&] {
      const auto engine = snapshot();
      const std::string prefix = req.get_param_value("prefix");
      std::size_t limit = 20;
      if (req.has_param("limit")) limit = parse_size(req.get_param_value("limit"), "limit");
      char* text = nullptr;
      check(ss_engine_vocab_json(engine.get(), prefix.c_str(), limit, &text));
      send_owned_json(res, text);
    });
  });

  s.Post("/api/reload", [this](const httplib::Request&, httplib::Response& res) {
    handle(res, [&] {
      // A failed reload keeps serving the previous engine.
      auto fresh = open_engine(source_);
      {
        std::lock_guard lock(engine_mutex_);
        engine_ = std::move(fresh);
      }
      send_json(res, 200, {{"status", "reloaded"}});
    });
  });
}

}  // namespace semspace_tools
