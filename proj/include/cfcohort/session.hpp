#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfcohort/aggregation.hpp"
#include "cfcohort/cohort.hpp"
#include "cfcohort/counterfactual.hpp"
#include "cfcohort/data_model.hpp"
#include "cfcohort/discretizer.hpp"
#include "cfcohort/predictor.hpp"

namespace cfcohort {

/// How a session obtains its predictor.
///   {"type": "linear", "path": "coef.json"} or {"type": "linear", "coefficients": {...}}
///   {"type": "logistic", "epochs": 500, "learning_rate": 0.5, "seed": 0}
///   {"type": "remote", "endpoint": "http://host:port/predict"}
struct ModelSpec {
  enum class Type { Linear, Logistic, Remote };

  Type type = Type::Logistic;
  std::optional<std::filesystem::path> path;
  std::optional<nlohmann::json> coefficients;
  TrainOptions train;
  std::string endpoint;

  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

struct SessionConfig {
  int bin_count = kDefaultBinCount;
  AlgorithmConfig algorithm;
  DecisionConfig decision;
  /// When set and smaller than the dataset, explanations are generated for a
  /// uniform sample of this many rows, drawn with `sample_seed`.
  std::optional<std::size_t> sample_cap;
  std::uint64_t sample_seed = 0;
  unsigned threads = 1;

  nlohmann::json to_json() const;
  /// Locked features may be given by name or index.
  static SessionConfig from_json(const nlohmann::json& j, const Dataset* dataset = nullptr);
};

struct CreateRequest {
  std::filesystem::path dataset_path;
  SchemaSpec schema;
  ModelSpec model;
  SessionConfig config;

  /// {"dataset": path, "schema": path | object, "model": {...}, "config": {...}}
  static CreateRequest from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

/// Changes accepted by update_config; absent fields keep their value.
struct ConfigUpdate {
  std::optional<int> bin_count;
  std::optional<int> max_features;
  std::optional<int> max_displacement;
  std::optional<std::vector<std::size_t>> locked_features;
  std::optional<std::optional<int>> max_steps;

  static ConfigUpdate from_json(const nlohmann::json& j, const Dataset& dataset);
};

struct RegenerationReport {
  bool regenerated = false;
  std::string old_fingerprint;
  std::string new_fingerprint;
  double old_success_rate = 0.0;
  double new_success_rate = 0.0;

  double success_rate_delta() const { return new_success_rate - old_success_rate; }
  nlohmann::json to_json() const;
};

enum class CohortSlot { A = 0, B = 1 };

CohortSlot parse_cohort_slot(std::string_view s);
std::string_view to_string(CohortSlot slot);

/// Derived, immutable analysis state. Replaced wholesale on config updates,
/// so a reader holding one snapshot never sees a mix of old and new.
struct SessionSnapshot {
  int bin_count = kDefaultBinCount;
  AlgorithmConfig algorithm;
  DiscretizationScheme scheme;
  std::string fingerprint;
  std::vector<std::size_t> explained_rows;  // ascending
  std::vector<CounterfactualExplanation> explanations;  // aligned with explained_rows
  std::vector<std::ptrdiff_t> explanation_of_row;       // row -> index, or -1

  const CounterfactualExplanation* find(std::size_t row) const;
  double success_rate() const;
  /// Explanations of the given rows that were explained, in row order.
  std::vector<CounterfactualExplanation> select(std::span<const std::size_t> rows) const;
};

class Session {
 public:
  /// Loads the dataset, builds the predictor and the prediction cache, fits
  /// the scheme, generates every explanation and installs the default
  /// cohorts (A = predicted positive, B = predicted negative).
  static std::shared_ptr<Session> create(const CreateRequest& request, std::string id);

  /// Rebuilds a saved session. The dataset file must still hash to the saved digest.
  static std::shared_ptr<Session> load(const nlohmann::json& persisted);
  static std::shared_ptr<Session> load_file(const std::filesystem::path& path);

  const std::string& id() const { return id_; }
  const Dataset& dataset() const { return *dataset_; }
  const Predictor& predictor() const { return *predictor_; }
  const PredictionCache& cache() const { return cache_; }
  const DecisionConfig& decision() const { return config_.decision; }
  const std::string& dataset_sha256() const { return dataset_sha256_; }

  std::shared_ptr<const SessionSnapshot> snapshot() const;
  FilterSet filter(CohortSlot slot) const;
  void set_filter(CohortSlot slot, FilterSet filter);

  /// Identical settings are a no-op. Updates are serialised; readers keep
  /// the previous snapshot until the new one is complete.
  RegenerationReport update_config(const ConfigUpdate& update);

  /// Deterministic: save -> load -> save yields identical bytes.
  nlohmann::json persist() const;
  void save(const std::filesystem::path& path) const;

  // Views served over HTTP. Each one embeds the fingerprint of the snapshot it used.
  nlohmann::json schema_view() const;
  nlohmann::json cohort_view(CohortSlot slot) const;
  nlohmann::json compare_view(SortKey key) const;
  nlohmann::json aggregate_view(CohortSlot slot) const;
  nlohmann::json explanation_view(std::size_t row) const;
  nlohmann::json slice_view(CohortSlot slot, std::size_t feature, std::size_t bin) const;
  nlohmann::json confusion_view() const;

 private:
  Session() = default;

  std::shared_ptr<const SessionSnapshot> build_snapshot(int bin_count, const AlgorithmConfig& algorithm) const;
  std::vector<std::size_t> rows_to_explain() const;

  std::string id_;
  std::filesystem::path dataset_path_;
  std::string dataset_sha256_;
  SchemaSpec schema_spec_;
  ModelSpec model_spec_;
  SessionConfig config_;  // bin_count/algorithm mirror the current snapshot
  std::shared_ptr<const Dataset> dataset_;
  std::shared_ptr<const Predictor> predictor_;
  PredictionCache cache_;

  mutable std::mutex mutex_;         // guards snapshot_, filters_, config_
  std::mutex writer_mutex_;          // one config update at a time
  std::shared_ptr<const SessionSnapshot> snapshot_;
  FilterSet filters_[2];
};

/// Thread-safe registry of sessions, optionally persisted to a directory
/// (one <id>.json per session).
class SessionStore {
 public:
  explicit SessionStore(std::optional<std::filesystem::path> session_dir = std::nullopt);

  std::shared_ptr<Session> create(const CreateRequest& request);
  std::shared_ptr<Session> get(const std::string& id) const;  // throws UnknownSession
  std::vector<std::string> ids() const;
  /// Writes the session file if a session directory is configured.
  void persist(const Session& session) const;
  /// Loads every *.json in the session directory; returns how many were loaded.
  std::size_t load_all();

 private:
  std::optional<std::filesystem::path> dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
};

/// Uniform sample of `count` of the row indices [0, n), ascending, from a
/// 64-bit Mersenne Twister seeded with `seed`.
std::vector<std::size_t> sample_rows(std::size_t n, std::size_t count, std::uint64_t seed);

}  // namespace cfcohort
