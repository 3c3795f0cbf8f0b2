#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cfcohort/aggregation.hpp"
#include "cfcohort/data_model.hpp"
#include "cfcohort/discretizer.hpp"
#include "cfcohort/predictor.hpp"

namespace cfcohort {

/// Closed numeric interval on a continuous feature.
struct NumericRange {
  std::size_t feature = 0;
  double low = 0.0;
  double high = 0.0;
  bool operator==(const NumericRange&) const = default;
};

/// Allowed categories (ordinals) of a categorical feature.
struct CategorySet {
  std::size_t feature = 0;
  std::vector<std::size_t> allowed;
  bool operator==(const CategorySet&) const = default;
};

using RangeClause = std::variant<NumericRange, CategorySet>;

/// A cohort definition. A row belongs to the cohort iff it satisfies every clause:
/// its P(positive) lies in [confidence_low, confidence_high], its confusion cell
/// is in `cells` (empty means any), and every range clause holds.
struct FilterSet {
  double confidence_low = 0.0;
  double confidence_high = 1.0;
  std::vector<ConfusionCell> cells;
  std::vector<RangeClause> ranges;
  bool hidden = false;

  void validate(const Dataset& dataset) const;

  /// Rows the model predicts positive / negative.
  static FilterSet predicted_positive();
  static FilterSet predicted_negative();

  /// Features are written by name and categories by label.
  nlohmann::json to_json(const Dataset& dataset) const;
  /// Accepts features by name or index, categories by label or ordinal.
  static FilterSet from_json(const nlohmann::json& j, const Dataset& dataset);

  bool operator==(const FilterSet&) const = default;
};

/// Conjunction of two filter sets (the intersection of confidence intervals,
/// cell sets and clause lists). An empty intersection of cells is represented
/// by an empty confidence interval.
FilterSet conjoin(const FilterSet& a, const FilterSet& b);

bool row_matches(const Dataset& dataset, const PredictionCache& cache, const FilterSet& filter, std::size_t row);

/// Matching row ids in ascending order.
std::vector<std::size_t> apply_filterset(const Dataset& dataset, const PredictionCache& cache, const FilterSet& filter);

struct FeatureSummary {
  std::size_t feature = 0;
  FeatureKind kind = FeatureKind::Continuous;
  std::optional<double> median;          // continuous: lower median
  std::optional<std::size_t> median_bin; // continuous, binnable
  std::optional<std::size_t> mode;       // categorical: most frequent ordinal, lowest on ties
  std::vector<std::size_t> counts;       // histogram over the scheme's slots
};

struct CohortSummary {
  std::size_t size = 0;
  std::vector<FeatureSummary> features;

  nlohmann::json to_json(const DiscretizationScheme& scheme) const;
};

CohortSummary summarize_cohort(std::span<const std::size_t> rows, const Dataset& dataset,
                               const DiscretizationScheme& scheme);

enum class SortKey { MedianDifference, CounterfactualCount, SchemaOrder };

std::string_view to_string(SortKey key);
SortKey parse_sort_key(std::string_view s);

/// |median_a - median_b| / (4 sigma) for continuous features; 1 or 0 for
/// categorical features depending on whether the modes differ. Zero whenever
/// either cohort is empty or the feature is constant.
std::vector<double> median_differences(const CohortSummary& a, const CohortSummary& b,
                                       const DiscretizationScheme& scheme);

/// Continuous features first, then categorical; within each group by the key
/// (descending), ties in schema order. `aggregates` feeds the
/// counterfactual_count key and may be empty otherwise.
std::vector<std::size_t> sort_features(const CohortSummary& a, const CohortSummary& b,
                                       std::span<const TransitionAggregate> aggregates, SortKey key,
                                       const DiscretizationScheme& scheme);

/// Cohort rows whose value of `feature` falls in `bin` (or has category
/// ordinal `bin`), each with its complete value vector.
std::vector<Instance> bin_slice(std::span<const std::size_t> rows, const Dataset& dataset,
                                const DiscretizationScheme& scheme, std::size_t feature, std::size_t bin);

}  // namespace cfcohort
