#include <cmath>
#include <thread>

#include <httplib.h>

#include "cfcohort/error.hpp"
#include "cfcohort/predictor.hpp"

namespace cfcohort {

namespace {

struct ParsedEndpoint {
  std::string origin;  // scheme://host:port
  std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorKind::InvalidArgument, "endpoint must be an http URL: " + endpoint);
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

nlohmann::json encode_instances(std::span<const FeatureSchema> schema, std::span<const double> rows) {
  const std::size_t d = schema.size();
  auto instances = nlohmann::json::array();
  for (std::size_t r = 0; r * d < rows.size(); ++r) {
    auto row = nlohmann::json::array();
    for (std::size_t f = 0; f < d; ++f) {
      const double v = rows[r * d + f];
      if (schema[f].is_categorical())
        row.push_back(schema[f].categories.at(static_cast<std::size_t>(v)));
      else
        row.push_back(v);
    }
    instances.push_back(std::move(row));
  }
  return instances;
}

std::vector<double> decode_instances(std::span<const FeatureSchema> schema, const nlohmann::json& instances) {
  if (!instances.is_array()) throw Error(ErrorKind::MalformedResponse, "'instances' must be an array");
  std::vector<double> rows;
  rows.reserve(instances.size() * schema.size());
  for (const auto& row : instances) {
    if (!row.is_array() || row.size() != schema.size())
      throw Error(ErrorKind::ArityMismatch, "instance arity does not match schema");
    for (std::size_t f = 0; f < schema.size(); ++f) {
      const auto& cell = row[f];
      if (schema[f].is_categorical()) {
        if (!cell.is_string()) throw Error(ErrorKind::MalformedResponse, "categorical value must be a string");
        auto idx = schema[f].category_index(cell.get<std::string>());
        if (!idx) throw Error(ErrorKind::UnknownCategory, "unknown category '" + cell.get<std::string>() + "'");
        rows.push_back(static_cast<double>(*idx));
      } else {
        if (!cell.is_number()) throw Error(ErrorKind::MalformedResponse, "continuous value must be a number");
        rows.push_back(cell.get<double>());
      }
    }
  }
  return rows;
}

std::vector<double> remote_predict(const std::string& endpoint, std::span<const FeatureSchema> schema,
                                   std::span<const double> rows) {
  if (rows.empty()) return {};
  const auto target = parse_endpoint(endpoint);
  const nlohmann::json request{{"instances", encode_instances(schema, rows)}};
  const std::size_t n = rows.size() / schema.size();

  httplib::Client client(target.origin);
  client.set_connection_timeout(5);
  client.set_read_timeout(60);
  auto res = client.Post(target.path, request.dump(), "application/json");
  if (!res) throw Error(ErrorKind::TransportFailure, endpoint + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(ErrorKind::TransportFailure, endpoint + " answered HTTP " + std::to_string(res->status));

  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedResponse, std::string("response is not JSON: ") + e.what());
  }
  if (!body.is_object() || !body.contains("probabilities") || !body["probabilities"].is_array())
    throw Error(ErrorKind::MalformedResponse, "response lacks a 'probabilities' array");
  const auto& probs = body["probabilities"];
  if (probs.size() != n)
    throw Error(ErrorKind::MalformedResponse, "expected " + std::to_string(n) + " probabilities, got " +
                                                  std::to_string(probs.size()));
  std::vector<double> out;
  out.reserve(n);
  for (const auto& p : probs) {
    if (!p.is_number()) throw Error(ErrorKind::MalformedResponse, "probability is not a number");
    const double v = p.get<double>();
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(ErrorKind::OutOfRangeProbability, "probability " + p.dump() + " outside [0, 1]");
    out.push_back(v);
  }
  return out;
}

RemotePredictor::RemotePredictor(std::string endpoint, std::vector<FeatureSchema> schema)
    : endpoint_(std::move(endpoint)), schema_(std::move(schema)) {
  parse_endpoint(endpoint_);
}

void RemotePredictor::predict_batch(std::span<const double> rows, std::span<double> out) const {
  if (rows.size() != out.size() * schema_.size())
    throw Error(ErrorKind::ArityMismatch, "row buffer does not match output size");
  const auto probs = remote_predict(endpoint_, schema_, rows);
  std::copy(probs.begin(), probs.end(), out.begin());
}

nlohmann::json RemotePredictor::describe() const {
  return nlohmann::json{{"type", "remote"}, {"endpoint", endpoint_}};
}

// ---------------------------------------------------------------------------

struct PredictorServer::Impl {
  std::shared_ptr<const Predictor> predictor;
  std::vector<FeatureSchema> schema;
  httplib::Server server;
  std::thread thread;
  std::string host;
  int port = 0;
};

PredictorServer::PredictorServer(std::shared_ptr<const Predictor> predictor, std::vector<FeatureSchema> schema)
    : impl_(std::make_unique<Impl>()) {
  impl_->predictor = std::move(predictor);
  impl_->schema = std::move(schema);
  impl_->server.Post("/predict", [impl = impl_.get()](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto body = nlohmann::json::parse(req.body);
      const auto rows = decode_instances(impl->schema, body.at("instances"));
      const auto probs = impl->predictor->predict_batch(rows);
      res.set_content(nlohmann::json{{"probabilities", probs}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  });
}

PredictorServer::~PredictorServer() { stop(); }

int PredictorServer::start(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (impl_->port < 0) throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void PredictorServer::run(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = port;
  if (!impl_->server.listen(host, port)) throw Error(ErrorKind::Io, "cannot listen on " + host + ":" + std::to_string(port));
}

void PredictorServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string PredictorServer::endpoint() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port) + "/predict";
}

}  // namespace cfcohort
