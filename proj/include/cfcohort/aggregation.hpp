#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfcohort/counterfactual.hpp"

namespace cfcohort {

/// Arrow endpoints: bins for continuous features, ordinals for categorical ones.
struct TransitionKey {
  std::size_t from = 0;
  std::size_t to = 0;
  auto operator<=>(const TransitionKey&) const = default;
};

struct TransitionCell {
  std::size_t count = 0;
  std::vector<std::size_t> explanation_ids;  // row ids, ascending
  bool operator==(const TransitionCell&) const = default;
};

using TransitionMap = std::map<TransitionKey, TransitionCell>;

/// Which side of the decision an explanation started from. Positive-origin
/// arrows push towards a negative decision and vice versa.
enum class Origin : std::uint8_t { Positive = 0, Negative = 1 };

struct FeatureTransitions {
  TransitionMap positive_origin;
  TransitionMap negative_origin;

  const TransitionMap& by_origin(Origin o) const { return o == Origin::Positive ? positive_origin : negative_origin; }
  TransitionMap& by_origin(Origin o) { return o == Origin::Positive ? positive_origin : negative_origin; }
  std::size_t total() const;
  bool operator==(const FeatureTransitions&) const = default;
};

/// Explanations that did not flip the decision, counted per stop reason.
struct UnexplainedTally {
  std::size_t count = 0;
  std::vector<std::size_t> row_ids;
  std::map<std::string, std::size_t> by_reason;
  bool operator==(const UnexplainedTally&) const = default;
};

class TransitionAggregate {
 public:
  TransitionAggregate() = default;
  explicit TransitionAggregate(std::size_t num_features) : features_(num_features) {}

  const std::string& fingerprint() const { return fingerprint_; }
  std::size_t num_features() const { return features_.size(); }
  const FeatureTransitions& feature(std::size_t f) const { return features_.at(f); }
  const UnexplainedTally& unexplained() const { return unexplained_; }
  std::size_t explained_count() const { return explained_; }

  /// Total arrow count of each feature over both origins.
  std::vector<std::size_t> feature_totals() const;

  void add(const CounterfactualExplanation& e);
  /// Cell-wise sum; throws MixedScheme on differing fingerprints.
  void merge(const TransitionAggregate& other);

  /// {"fingerprint", "explained", "unexplained", "positive_origin": {feature: {"from→to": {count, ids}}}, ...}
  nlohmann::json to_json(const DiscretizationScheme& scheme) const;

  bool operator==(const TransitionAggregate&) const = default;

 private:
  void adopt_fingerprint(const std::string& fp);

  std::string fingerprint_;
  std::vector<FeatureTransitions> features_;
  UnexplainedTally unexplained_;
  std::size_t explained_ = 0;
};

/// Every change of every successful explanation lands in exactly one cell;
/// unsuccessful explanations only add to the unexplained tally.
TransitionAggregate aggregate_transitions(std::span<const CounterfactualExplanation> explanations,
                                          std::size_t num_features);

/// Throws UnknownRow.
const CounterfactualExplanation& explanation_detail(std::size_t row_id,
                                                    std::span<const CounterfactualExplanation> explanations);

struct FeatureOpposition {
  std::size_t positive_mass = 0;
  std::size_t negative_mass = 0;
  /// Share of positive-origin arrow mass whose reverse arrow exists among the
  /// negative-origin arrows; empty when there is no positive-origin mass.
  std::optional<double> positive_reversed;
  std::optional<double> negative_reversed;
};

/// Symmetry of positive-origin arrows (from `positive`) against
/// negative-origin arrows (from `negative`), per feature.
std::vector<FeatureOpposition> opposition_report(const TransitionAggregate& positive,
                                                 const TransitionAggregate& negative);

nlohmann::json to_json(std::span<const FeatureOpposition> report, const DiscretizationScheme& scheme);

}  // namespace cfcohort
