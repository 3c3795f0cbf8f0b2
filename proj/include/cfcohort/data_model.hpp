#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cfcohort {

enum class FeatureKind { Continuous, Categorical };

std::string_view to_string(FeatureKind kind);

struct FeatureSchema {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
  std::vector<std::string> categories;  // categorical only, ordinal order
  std::optional<std::string> display_unit;

  bool is_categorical() const { return kind == FeatureKind::Categorical; }
  std::optional<std::size_t> category_index(std::string_view label) const;
};

/// Schema descriptor as read from the JSON sidecar file:
///   {"label_column": ..., "positive_label": ..., "features": [{name, kind, categories?}]}
struct SchemaSpec {
  struct Feature {
    std::string name;
    FeatureKind kind = FeatureKind::Continuous;
    std::optional<std::vector<std::string>> categories;
    std::optional<std::string> display_unit;
  };

  std::string label_column;
  std::string positive_label;
  std::optional<std::string> negative_label;
  std::vector<Feature> features;

  static SchemaSpec from_json(const nlohmann::json& j);
  static SchemaSpec load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// One row of a dataset. Values are stored in the "raw" numeric layout used
/// throughout the library: continuous features hold the number itself,
/// categorical features hold the category ordinal.
struct Instance {
  std::size_t row_id = 0;
  std::vector<double> values;
};

/// Immutable, validated binary-labelled table. Row storage is row-major.
class Dataset {
 public:
  Dataset(std::vector<FeatureSchema> schema, std::vector<double> values, std::vector<int> labels,
          std::string label_column, std::string positive_label_name,
          std::string negative_label_name);

  std::size_t num_rows() const { return labels_.size(); }
  std::size_t num_features() const { return schema_.size(); }

  const std::vector<FeatureSchema>& schema() const { return schema_; }
  const FeatureSchema& feature(std::size_t f) const { return schema_.at(f); }
  std::optional<std::size_t> feature_index(std::string_view name) const;

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * schema_.size(), schema_.size()};
  }
  double value(std::size_t r, std::size_t f) const { return values_[r * schema_.size() + f]; }
  std::span<const double> values() const { return values_; }
  std::vector<double> column(std::size_t f) const;

  int label(std::size_t r) const { return labels_[r]; }
  std::span<const int> labels() const { return labels_; }

  Instance instance(std::size_t r) const;

  /// Display form of a raw value: category label or shortest round-trip number.
  std::string format_value(std::size_t f, double raw) const;

  const std::string& label_column() const { return label_column_; }
  const std::string& positive_label_name() const { return positive_label_; }
  const std::string& negative_label_name() const { return negative_label_; }

  /// Schema descriptor with categories spelled out, suitable for reloading a
  /// CSV written by write_csv.
  SchemaSpec to_schema_spec() const;

 private:
  std::vector<FeatureSchema> schema_;
  std::vector<double> values_;
  std::vector<int> labels_;
  std::string label_column_;
  std::string positive_label_;
  std::string negative_label_;
};

Dataset load_csv(const std::filesystem::path& path, const SchemaSpec& spec);
Dataset parse_csv(std::string_view text, const SchemaSpec& spec);

void write_csv(const Dataset& dataset, std::ostream& out);
void write_csv(const Dataset& dataset, const std::filesystem::path& path);

struct FeaturePartition {
  std::vector<std::size_t> continuous;
  std::vector<std::size_t> categorical;
};

FeaturePartition split_feature_kinds(const Dataset& dataset);
FeaturePartition split_feature_kinds(std::span<const FeatureSchema> schema);

std::string format_number(double v);

}  // namespace cfcohort
