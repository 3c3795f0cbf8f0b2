#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "cfcohort/error.hpp"
#include "cfcohort/session.hpp"

namespace cfcohort {

/// JSON API over a SessionStore.
///
///   POST /sessions                              create, returns {"session_id", ...schema}
///   GET  /sessions                              list ids
///   GET  /sessions/{id}/schema
///   GET  /sessions/{id}/confusion
///   GET  /sessions/{id}/filters/{A|B}           filter, members and summary
///   PUT  /sessions/{id}/filters/{A|B}
///   GET  /sessions/{id}/compare?sort=median_difference|counterfactual_count|schema_order
///   GET  /sessions/{id}/aggregate/{A|B}
///   GET  /sessions/{id}/explanations/{row_id}
///   GET  /sessions/{id}/slice?cohort=A&feature=name&bin=3
///   PUT  /sessions/{id}/config
///
/// Errors come back as {"error": {"kind": ..., "message": ...}} with 400 for
/// invalid input, 404 for unknown sessions and rows, 500 otherwise.
class HttpService {
 public:
  /// Relative dataset and schema paths in create requests resolve against `base_dir`.
  explicit HttpService(std::shared_ptr<SessionStore> store, std::filesystem::path base_dir = {});
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void run(const std::string& host, int port);
  void stop();

  SessionStore& store() { return *store_; }

 private:
  struct Impl;
  std::shared_ptr<SessionStore> store_;
  std::unique_ptr<Impl> impl_;
};

int http_status_for(ErrorKind kind);

}  // namespace cfcohort
