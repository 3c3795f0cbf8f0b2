#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfcohort/data_model.hpp"
#include "cfcohort/discretizer.hpp"
#include "cfcohort/predictor.hpp"

namespace cfcohort {

/// Search constraints.
///   max_features      at most this many features differ from the original
///   max_displacement  a continuous feature never ends up more than this many
///                     bins away from its original bin
struct AlgorithmConfig {
  int max_features = 5;
  int max_displacement = 4;
  std::vector<std::size_t> locked_features;  // sorted, unique
  std::optional<int> max_steps;              // default: max_features * max_displacement + #categorical

  void validate(std::size_t num_features) const;
  bool is_locked(std::size_t f) const;
  int step_cap(const DiscretizationScheme& scheme) const;

  nlohmann::json to_json() const;
  static AlgorithmConfig from_json(const nlohmann::json& j);
  bool operator==(const AlgorithmConfig&) const = default;
};

enum class MoveKind : std::uint8_t { Down, Up, Category };

std::string_view to_string(MoveKind kind);

/// One candidate step: a continuous feature moves one bin down or up, or a
/// categorical feature switches to `target` (a category ordinal).
struct CandidateMove {
  std::size_t feature = 0;
  MoveKind kind = MoveKind::Up;
  std::size_t target = 0;  // bin index or category ordinal

  bool operator==(const CandidateMove&) const = default;
};

/// Net difference of one feature between the original row and the counterfactual.
/// Slots are bins for continuous features and ordinals for categorical ones.
struct FeatureChange {
  std::size_t feature = 0;
  FeatureKind kind = FeatureKind::Continuous;
  std::size_t from_slot = 0;
  std::size_t to_slot = 0;
  double from_value = 0.0;  // raw value (ordinal for categorical)
  double to_value = 0.0;

  bool operator==(const FeatureChange&) const = default;
};

struct TraceStep {
  std::size_t step = 0;  // 1-based
  CandidateMove move;
  double probability = 0.0;
  double improvement = 0.0;

  bool operator==(const TraceStep&) const = default;
};

enum class StopReason : std::uint8_t { Flipped, NoImprovement, Exhausted, StepCap };

std::string_view to_string(StopReason reason);

struct CounterfactualExplanation {
  std::size_t row_id = 0;
  double original_prob = 0.0;
  int original_decision = 0;
  bool success = false;
  StopReason stop_reason = StopReason::Exhausted;
  std::vector<FeatureChange> changes;  // in order of first change
  std::vector<TraceStep> trace;
  double final_prob = 0.0;
  std::string fingerprint;

  bool operator==(const CounterfactualExplanation&) const = default;
};

/// Current point of the greedy walk, remembering where it started.
class SearchState {
 public:
  SearchState(std::span<const double> original, const DiscretizationScheme& scheme);

  std::span<const double> original() const { return original_; }
  std::span<const double> values() const { return values_; }

  /// Bin (continuous, binnable) or ordinal (categorical); 0 for constant features.
  std::size_t original_slot(std::size_t f) const { return original_slot_[f]; }
  std::size_t current_slot(std::size_t f) const { return current_slot_[f]; }
  bool is_changed(std::size_t f) const { return current_slot_[f] != original_slot_[f]; }
  std::size_t changed_count() const;

  /// Values after applying `move`, without mutating the state.
  void values_with(const CandidateMove& move, std::span<double> out) const;
  void apply(const CandidateMove& move);

 private:
  double value_for(std::size_t f, std::size_t slot) const;

  const DiscretizationScheme* scheme_;
  std::vector<double> original_;
  std::vector<double> values_;
  std::vector<std::size_t> original_slot_;
  std::vector<std::size_t> current_slot_;
};

/// Candidate moves in tie-break order: by feature index; for each continuous
/// feature the downward move before the upward one; categories by ordinal.
std::vector<CandidateMove> enumerate_candidates(const SearchState& state, const DiscretizationScheme& scheme,
                                                const AlgorithmConfig& config);

/// Applies net changes to an original row.
std::vector<double> apply_changes(std::span<const double> original, std::span<const FeatureChange> changes);

/// Identifies the binning and search configuration an explanation was made under.
std::string scheme_fingerprint(const DiscretizationScheme& scheme, const AlgorithmConfig& config,
                               const DecisionConfig& decision);

class CounterfactualEngine {
 public:
  CounterfactualEngine(const Predictor& predictor, const DiscretizationScheme& scheme, AlgorithmConfig config,
                       DecisionConfig decision = {});

  const std::string& fingerprint() const { return fingerprint_; }
  const AlgorithmConfig& config() const { return config_; }
  const DiscretizationScheme& scheme() const { return *scheme_; }

  /// `original_prob` may be supplied from a prediction cache to save one call.
  CounterfactualExplanation explain(const Instance& instance, std::optional<double> original_prob = {}) const;

  /// One explanation per row, in input order. Rows are independent; with
  /// threads > 1 they are split across worker threads.
  std::vector<CounterfactualExplanation> explain_batch(const Dataset& dataset, std::span<const std::size_t> rows,
                                                       const PredictionCache* cache = nullptr,
                                                       unsigned threads = 1) const;

 private:
  const Predictor* predictor_;
  const DiscretizationScheme* scheme_;
  AlgorithmConfig config_;
  DecisionConfig decision_;
  std::string fingerprint_;
};

CounterfactualExplanation generate_counterfactual(const Instance& instance, const Predictor& predictor,
                                                  const DiscretizationScheme& scheme, const AlgorithmConfig& config,
                                                  const DecisionConfig& decision = {});

std::vector<CounterfactualExplanation> generate_batch(const Dataset& dataset, std::span<const std::size_t> rows,
                                                      const Predictor& predictor, const DiscretizationScheme& scheme,
                                                      const AlgorithmConfig& config,
                                                      const DecisionConfig& decision = {},
                                                      const PredictionCache* cache = nullptr, unsigned threads = 1);

/// JSON-lines export record. Bins are reported for continuous features,
/// category labels for categorical ones.
nlohmann::json to_json(const CounterfactualExplanation& e, const DiscretizationScheme& scheme);
void write_jsonl(std::ostream& out, std::span<const CounterfactualExplanation> explanations,
                 const DiscretizationScheme& scheme);

}  // namespace cfcohort
