#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cfcohort/data_model.hpp"

namespace cfcohort {

inline constexpr int kDefaultBinCount = 10;

/// Gaussian binning of one feature.
///
/// A continuous feature with mean m and standard deviation s is cut into n bins:
/// bins 1..n-2 have equal width 4s/(n-2) and together span [m-2s, m+2s); bin 0
/// catches everything below m-2s and bin n-1 everything at or above m+2s.
/// Edges are left-closed. Categorical features keep their category ordinals.
struct FeatureBinning {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
  double mean = 0.0;
  double stddev = 0.0;
  bool binnable = true;             // false for constant columns
  std::vector<double> inner_edges;  // n-1 values, continuous + binnable only
  std::vector<std::string> categories;

  double inner_width() const;
};

class DiscretizationScheme {
 public:
  DiscretizationScheme() = default;
  DiscretizationScheme(int bin_count, std::vector<FeatureBinning> features);

  /// Scheme for a continuous feature with given moments; convenient for tests
  /// and for reconstructing from JSON.
  static FeatureBinning continuous_binning(std::string name, double mean, double stddev, int bin_count);

  int bin_count() const { return bin_count_; }
  std::size_t num_features() const { return features_.size(); }
  const FeatureBinning& feature(std::size_t f) const { return features_.at(f); }
  const std::vector<FeatureBinning>& features() const { return features_; }

  bool is_categorical(std::size_t f) const { return features_.at(f).kind == FeatureKind::Categorical; }
  /// Continuous with non-zero spread; the only continuous features the search may move.
  bool is_binnable(std::size_t f) const;

  /// Throws UnbinnableFeature for categorical or constant features.
  std::size_t bin_of(double value, std::size_t f) const;
  /// Number value a bin maps back to: the midpoint for inner bins, one half
  /// inner width beyond the outer edge for the two extreme bins.
  double representative_value(std::size_t bin, std::size_t f) const;
  /// [low, high) of a bin, with -inf/+inf for the extreme bins.
  std::pair<double, double> bin_range(std::size_t bin, std::size_t f) const;

  /// Histogram slots of a feature: n bins for binnable continuous features,
  /// one slot per category for categorical ones, a single slot for constant ones.
  std::size_t num_slots(std::size_t f) const;
  /// Slot of a raw value (bin, category ordinal, or 0 for constant features).
  std::size_t slot_of(double raw, std::size_t f) const;
  /// Counts per slot; identical assignment to bin_of.
  std::vector<std::size_t> histogram(std::span<const double> values, std::size_t f) const;

  nlohmann::json to_json() const;
  static DiscretizationScheme from_json(const nlohmann::json& j);

 private:
  int bin_count_ = kDefaultBinCount;
  std::vector<FeatureBinning> features_;
};

/// Fits the scheme on every row of the dataset (population standard deviation).
DiscretizationScheme fit_discretizer(const Dataset& dataset, int bin_count = kDefaultBinCount);

}  // namespace cfcohort
