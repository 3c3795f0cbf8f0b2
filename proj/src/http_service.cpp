#include "cfcohort/http_service.hpp"

#include <charconv>
#include <thread>

#include <httplib.h>

#include "cfcohort/error.hpp"

namespace cfcohort {

int http_status_for(ErrorKind kind) {
  if (kind == ErrorKind::UnknownSession || kind == ErrorKind::UnknownRow) return 404;
  if (is_validation_error(kind) || kind == ErrorKind::UnbinnableFeature) return 400;
  return 500;
}

namespace {

using Handler = std::function<nlohmann::json(const httplib::Request&, httplib::Response&)>;

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
  send_json(res, status, {{"error", {{"kind", kind}, {"message", message}}}});
}

httplib::Server::Handler wrap(Handler h) {
  return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    try {
      res.status = 200;
      auto body = h(req, res);
      send_json(res, res.status, body);
    } catch (const Error& e) {
      send_error(res, http_status_for(e.kind()), to_string(e.kind()), e.message());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, "InvalidArgument", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  };
}

nlohmann::json parse_body(const httplib::Request& req) {
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
}

std::size_t parse_index(const std::string& s, std::string_view what) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw Error(ErrorKind::InvalidArgument, std::string(what) + " must be a non-negative integer, got '" + s + "'");
  return v;
}

std::string required_param(const httplib::Request& req, const std::string& key) {
  if (!req.has_param(key)) throw Error(ErrorKind::InvalidArgument, "missing query parameter '" + key + "'");
  return req.get_param_value(key);
}

}  // namespace

struct HttpService::Impl {
  httplib::Server server;
  std::thread thread;
};

HttpService::HttpService(std::shared_ptr<SessionStore> store, std::filesystem::path base_dir)
    : store_(std::move(store)), impl_(std::make_unique<Impl>()) {
  auto& srv = impl_->server;
  SessionStore* st = store_.get();
  const std::string sid = "/sessions/([A-Za-z0-9_-]+)";

  srv.Get("/health", wrap([](const auto&, auto&) { return nlohmann::json{{"status", "ok"}}; }));

  srv.Get("/sessions", wrap([st](const auto&, auto&) { return nlohmann::json{{"sessions", st->ids()}}; }));

  srv.Post("/sessions", wrap([st, base_dir](const httplib::Request& req, httplib::Response& res) {
    const auto request = CreateRequest::from_json(parse_body(req), base_dir);
    auto session = st->create(request);
    res.status = 201;
    auto body = session->schema_view();
    return body;
  }));

  srv.Get(sid + "/schema", wrap([st](const httplib::Request& req, auto&) {
    return st->get(req.matches[1])->schema_view();
  }));

  srv.Get(sid + "/confusion", wrap([st](const httplib::Request& req, auto&) {
    return st->get(req.matches[1])->confusion_view();
  }));

  srv.Get(sid + "/filters/([A-Za-z])", wrap([st](const httplib::Request& req, auto&) {
    auto session = st->get(req.matches[1]);
    return session->cohort_view(parse_cohort_slot(req.matches[2].str()));
  }));

  srv.Put(sid + "/filters/([A-Za-z])", wrap([st](const httplib::Request& req, auto&) {
    auto session = st->get(req.matches[1]);
    const auto slot = parse_cohort_slot(req.matches[2].str());
    session->set_filter(slot, FilterSet::from_json(parse_body(req), session->dataset()));
    st->persist(*session);
    return session->cohort_view(slot);
  }));

  srv.Get(sid + "/compare", wrap([st](const httplib::Request& req, auto&) {
    auto session = st->get(req.matches[1]);
    const auto key = req.has_param("sort") ? parse_sort_key(req.get_param_value("sort")) : SortKey::MedianDifference;
    return session->compare_view(key);
  }));

  srv.Get(sid + "/aggregate/([A-Za-z])", wrap([st](const httplib::Request& req, auto&) {
    return st->get(req.matches[1])->aggregate_view(parse_cohort_slot(req.matches[2].str()));
  }));

  srv.Get(sid + "/explanations/([^/]+)", wrap([st](const httplib::Request& req, auto&) {
    auto session = st->get(req.matches[1]);
    return session->explanation_view(parse_index(req.matches[2], "row id"));
  }));

  srv.Get(sid + "/slice", wrap([st](const httplib::Request& req, auto&) {
    auto session = st->get(req.matches[1]);
    const auto slot = parse_cohort_slot(required_param(req, "cohort"));
    const auto name = required_param(req, "feature");
    std::size_t feature;
    if (auto f = session->dataset().feature_index(name)) {
      feature = *f;
    } else {
      feature = parse_index(name, "feature");
      if (feature >= session->dataset().num_features())
        throw Error(ErrorKind::InvalidArgument, "unknown feature '" + name + "'");
    }
    return session->slice_view(slot, feature, parse_index(required_param(req, "bin"), "bin"));
  }));

  srv.Put(sid + "/config", wrap([st](const httplib::Request& req, auto&) {
    auto session = st->get(req.matches[1]);
    const auto report = session->update_config(ConfigUpdate::from_json(parse_body(req), session->dataset()));
    st->persist(*session);
    return report.to_json();
  }));
}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpService::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port))
    throw Error(ErrorKind::Io, "cannot listen on " + host + ":" + std::to_string(port));
}

void HttpService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace cfcohort
