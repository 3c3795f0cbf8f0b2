#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfcohort/data_model.hpp"

namespace cfcohort {

/// Black-box binary classifier. Inputs use the raw row layout of Dataset
/// (continuous value, or category ordinal), in schema order. Implementations
/// must be deterministic and safe to call concurrently.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::string name() const = 0;
  virtual std::size_t num_features() const = 0;

  /// rows.size() == out.size() * num_features(); writes P(positive) per row.
  virtual void predict_batch(std::span<const double> rows, std::span<double> out) const = 0;

  std::vector<double> predict_batch(std::span<const double> rows) const;
  double predict_proba(std::span<const double> instance) const;

  /// Serializable description, enough to rebuild the same predictor.
  virtual nlohmann::json describe() const = 0;
};

double logistic(double z);

/// Full one-hot encoding in schema order: a continuous feature takes one
/// column, a categorical feature one column per category (none dropped).
class OneHotEncoder {
 public:
  explicit OneHotEncoder(std::vector<FeatureSchema> schema);

  std::size_t raw_width() const { return schema_.size(); }
  std::size_t encoded_width() const { return width_; }
  bool is_identity() const { return identity_; }
  std::vector<std::string> encoded_names() const;
  /// Encoded column range [first, first + count) of raw feature f.
  std::pair<std::size_t, std::size_t> columns_of(std::size_t f) const { return {offset_[f], span_[f]}; }

  void encode(std::span<const double> raw_row, std::span<double> out) const;
  std::vector<double> encode_rows(std::span<const double> raw_rows) const;

  const std::vector<FeatureSchema>& schema() const { return schema_; }

 private:
  std::vector<FeatureSchema> schema_;
  std::vector<std::size_t> offset_;
  std::vector<std::size_t> span_;
  std::size_t width_ = 0;
  bool identity_ = true;
};

/// P(positive) = logistic(intercept + w . encode(x)).
class LinearPredictor final : public Predictor {
 public:
  LinearPredictor(std::vector<FeatureSchema> schema, double intercept, std::vector<double> weights,
                  std::string name = "linear");

  std::string name() const override { return name_; }
  std::size_t num_features() const override { return encoder_.raw_width(); }
  void predict_batch(std::span<const double> rows, std::span<double> out) const override;
  using Predictor::predict_batch;
  nlohmann::json describe() const override;

  double intercept() const { return intercept_; }
  const std::vector<double>& weights() const { return weights_; }
  const OneHotEncoder& encoder() const { return encoder_; }

  /// {"intercept": b, "weights": [...]}; feature names are added for readability.
  nlohmann::json coefficients_json() const;
  void save(const std::filesystem::path& path) const;

 private:
  OneHotEncoder encoder_;
  double intercept_;
  std::vector<double> weights_;
  std::string name_;
};

/// Throws ArityMismatch if the weight count differs from the encoded width.
std::shared_ptr<LinearPredictor> load_linear(const nlohmann::json& coefficients, std::vector<FeatureSchema> schema);
std::shared_ptr<LinearPredictor> load_linear(const std::filesystem::path& path, std::vector<FeatureSchema> schema);

struct TrainOptions {
  int epochs = 500;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
  double l2 = 0.0;
};

/// Full-batch gradient descent on the mean log-loss. Encoded columns are
/// standardised for the optimisation and the weights folded back, so the
/// returned model works on raw values.
std::shared_ptr<LinearPredictor> train_logistic(const Dataset& dataset, const TrainOptions& options = {});

// ---------------------------------------------------------------------------
// Decisions

struct DecisionConfig {
  double threshold = 0.5;

  void validate() const;
  int decide(double p) const { return p >= threshold ? 1 : 0; }
};

enum class ConfusionCell : std::uint8_t { TP = 0, FP = 1, TN = 2, FN = 3 };

std::string_view to_string(ConfusionCell cell);
ConfusionCell parse_confusion_cell(std::string_view s);
ConfusionCell confusion_cell(int decision, int label);

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  nlohmann::json to_json() const;
};

/// Per-row probability, decision and confusion cell. Built once, read-only.
class PredictionCache {
 public:
  PredictionCache() = default;
  PredictionCache(std::vector<double> probabilities, std::span<const int> labels, DecisionConfig decision);

  static PredictionCache build(const Dataset& dataset, const Predictor& predictor, DecisionConfig decision);

  std::size_t size() const { return probabilities_.size(); }
  double probability(std::size_t row) const { return probabilities_[row]; }
  int decision(std::size_t row) const { return decisions_[row]; }
  ConfusionCell cell(std::size_t row) const { return cells_[row]; }
  const DecisionConfig& decision_config() const { return decision_; }
  std::span<const double> probabilities() const { return probabilities_; }

 private:
  std::vector<double> probabilities_;
  std::vector<int> decisions_;
  std::vector<ConfusionCell> cells_;
  DecisionConfig decision_;
};

ConfusionCounts confusion_matrix(const PredictionCache& cache);

// ---------------------------------------------------------------------------
// Remote predictors over HTTP
//
// Request:  POST <endpoint>  {"instances": [[v1, v2, ...], ...]}
//           continuous values as JSON numbers, categorical values as labels
// Response: {"probabilities": [p1, ...]}

nlohmann::json encode_instances(std::span<const FeatureSchema> schema, std::span<const double> rows);
std::vector<double> decode_instances(std::span<const FeatureSchema> schema, const nlohmann::json& instances);

/// One request per call; throws TransportFailure, MalformedResponse or
/// OutOfRangeProbability.
std::vector<double> remote_predict(const std::string& endpoint, std::span<const FeatureSchema> schema,
                                   std::span<const double> rows);

class RemotePredictor final : public Predictor {
 public:
  RemotePredictor(std::string endpoint, std::vector<FeatureSchema> schema);

  std::string name() const override { return "remote"; }
  std::size_t num_features() const override { return schema_.size(); }
  void predict_batch(std::span<const double> rows, std::span<double> out) const override;
  using Predictor::predict_batch;
  nlohmann::json describe() const override;

  const std::string& endpoint() const { return endpoint_; }

 private:
  std::string endpoint_;
  std::vector<FeatureSchema> schema_;
};

/// Serves any predictor with the wire protocol above (POST /predict), on a
/// background thread. Used for the stub oracle in tests and by `serve-model`.
class PredictorServer {
 public:
  PredictorServer(std::shared_ptr<const Predictor> predictor, std::vector<FeatureSchema> schema);
  ~PredictorServer();
  PredictorServer(const PredictorServer&) = delete;
  PredictorServer& operator=(const PredictorServer&) = delete;

  /// Binds (port 0 = ephemeral) and starts serving; returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void run(const std::string& host, int port);
  void stop();
  std::string endpoint() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cfcohort
