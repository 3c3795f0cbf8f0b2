#include "cfcohort/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cfcohort/csv.hpp"
#include "cfcohort/error.hpp"

namespace cfcohort {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

FeatureKind parse_kind(const std::string& s) {
  if (s == "continuous") return FeatureKind::Continuous;
  if (s == "categorical") return FeatureKind::Categorical;
  throw Error(ErrorKind::InvalidSchema, "unknown feature kind '" + s + "'");
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::Continuous ? "continuous" : "categorical";
}

std::optional<std::size_t> FeatureSchema::category_index(std::string_view label) const {
  auto it = std::find(categories.begin(), categories.end(), label);
  if (it == categories.end()) return std::nullopt;
  return static_cast<std::size_t>(it - categories.begin());
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// SchemaSpec

SchemaSpec SchemaSpec::from_json(const nlohmann::json& j) {
  try {
    SchemaSpec spec;
    spec.label_column = j.at("label_column").get<std::string>();
    const auto& pos = j.at("positive_label");
    spec.positive_label = pos.is_string() ? pos.get<std::string>() : pos.dump();
    if (j.contains("negative_label")) {
      const auto& neg = j.at("negative_label");
      spec.negative_label = neg.is_string() ? neg.get<std::string>() : neg.dump();
    }
    for (const auto& jf : j.at("features")) {
      Feature f;
      f.name = jf.at("name").get<std::string>();
      f.kind = parse_kind(jf.value("kind", std::string("continuous")));
      if (jf.contains("categories")) {
        if (f.kind != FeatureKind::Categorical)
          throw Error(ErrorKind::InvalidSchema, "continuous feature '" + f.name + "' lists categories");
        f.categories = jf.at("categories").get<std::vector<std::string>>();
      }
      if (jf.contains("display_unit")) f.display_unit = jf.at("display_unit").get<std::string>();
      spec.features.push_back(std::move(f));
    }
    std::set<std::string> seen;
    for (const auto& f : spec.features) {
      if (!seen.insert(f.name).second)
        throw Error(ErrorKind::InvalidSchema, "duplicate feature name '" + f.name + "'");
      if (f.name == spec.label_column)
        throw Error(ErrorKind::InvalidSchema, "label column '" + f.name + "' is also listed as a feature");
    }
    if (spec.features.empty()) throw Error(ErrorKind::InvalidSchema, "schema lists no features");
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSchema, e.what());
  }
}

SchemaSpec SchemaSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSchema, path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json SchemaSpec::to_json() const {
  nlohmann::json j;
  j["label_column"] = label_column;
  j["positive_label"] = positive_label;
  if (negative_label) j["negative_label"] = *negative_label;
  j["features"] = nlohmann::json::array();
  for (const auto& f : features) {
    nlohmann::json jf{{"name", f.name}, {"kind", to_string(f.kind)}};
    if (f.categories) jf["categories"] = *f.categories;
    if (f.display_unit) jf["display_unit"] = *f.display_unit;
    j["features"].push_back(std::move(jf));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<FeatureSchema> schema, std::vector<double> values, std::vector<int> labels,
                 std::string label_column, std::string positive_label_name,
                 std::string negative_label_name)
    : schema_(std::move(schema)),
      values_(std::move(values)),
      labels_(std::move(labels)),
      label_column_(std::move(label_column)),
      positive_label_(std::move(positive_label_name)),
      negative_label_(std::move(negative_label_name)) {
  if (schema_.empty()) throw Error(ErrorKind::InvalidSchema, "dataset has no features");
  std::unordered_set<std::string> names;
  for (const auto& f : schema_) {
    if (!names.insert(f.name).second)
      throw Error(ErrorKind::InvalidSchema, "duplicate feature name '" + f.name + "'");
    if (f.is_categorical() && f.categories.size() < 2)
      throw Error(ErrorKind::InvalidSchema, "categorical feature '" + f.name + "' needs at least 2 categories");
    if (!f.is_categorical() && !f.categories.empty())
      throw Error(ErrorKind::InvalidSchema, "continuous feature '" + f.name + "' has a category list");
  }
  if (labels_.empty()) throw Error(ErrorKind::EmptyDataset, "dataset has no rows");
  if (values_.size() != labels_.size() * schema_.size())
    throw Error(ErrorKind::ArityMismatch, "row values do not match schema arity");
  for (int y : labels_)
    if (y != 0 && y != 1) throw Error(ErrorKind::InvalidSchema, "labels must be 0 or 1");
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    for (std::size_t f = 0; f < schema_.size(); ++f) {
      const double v = values_[r * schema_.size() + f];
      if (!std::isfinite(v))
        throw Error(ErrorKind::NonNumericContinuous, "non-finite value in '" + schema_[f].name + "'");
      if (schema_[f].is_categorical()) {
        if (v < 0 || v != std::floor(v) || v >= static_cast<double>(schema_[f].categories.size()))
          throw Error(ErrorKind::UnknownCategory, "bad category ordinal in '" + schema_[f].name + "'");
      }
    }
  }
}

std::optional<std::size_t> Dataset::feature_index(std::string_view name) const {
  for (std::size_t f = 0; f < schema_.size(); ++f)
    if (schema_[f].name == name) return f;
  return std::nullopt;
}

std::vector<double> Dataset::column(std::size_t f) const {
  std::vector<double> out(num_rows());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = value(r, f);
  return out;
}

Instance Dataset::instance(std::size_t r) const {
  auto rv = row(r);
  return Instance{r, std::vector<double>(rv.begin(), rv.end())};
}

std::string Dataset::format_value(std::size_t f, double raw) const {
  const auto& fs = schema_.at(f);
  if (fs.is_categorical()) return fs.categories.at(static_cast<std::size_t>(raw));
  return format_number(raw);
}

SchemaSpec Dataset::to_schema_spec() const {
  SchemaSpec spec;
  spec.label_column = label_column_;
  spec.positive_label = positive_label_;
  spec.negative_label = negative_label_;
  for (const auto& f : schema_) {
    SchemaSpec::Feature sf{f.name, f.kind, std::nullopt, f.display_unit};
    if (f.is_categorical()) sf.categories = f.categories;
    spec.features.push_back(std::move(sf));
  }
  return spec;
}

// ---------------------------------------------------------------------------
// CSV ingestion

Dataset parse_csv(std::string_view text, const SchemaSpec& spec) {
  auto records = csv::parse(text);
  if (records.empty()) throw Error(ErrorKind::EmptyDataset, "file has no header row");
  const auto& header = records.front();

  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t c = 0; c < header.size(); ++c) column_of.emplace(std::string(trim(header[c])), c);

  auto find_column = [&](const std::string& name) {
    auto it = column_of.find(name);
    if (it == column_of.end()) throw Error(ErrorKind::MissingColumn, "column '" + name + "' not found in header");
    return it->second;
  };

  const std::size_t label_col = find_column(spec.label_column);
  std::vector<std::size_t> feature_cols;
  for (const auto& f : spec.features) feature_cols.push_back(find_column(f.name));

  // drop fully blank trailing lines
  std::size_t n_rows = records.size() - 1;
  while (n_rows > 0 && records[n_rows].size() == 1 && trim(records[n_rows][0]).empty()) --n_rows;
  if (n_rows == 0) throw Error(ErrorKind::EmptyDataset, "file has a header but no data rows");

  const std::size_t n_features = spec.features.size();
  std::vector<FeatureSchema> schema(n_features);
  std::vector<std::vector<std::string>> category_cells(n_features);
  for (std::size_t f = 0; f < n_features; ++f) {
    schema[f].name = spec.features[f].name;
    schema[f].kind = spec.features[f].kind;
    schema[f].display_unit = spec.features[f].display_unit;
    if (spec.features[f].categories) schema[f].categories = *spec.features[f].categories;
  }

  std::vector<double> values(n_rows * n_features, 0.0);
  std::vector<int> labels(n_rows, 0);
  std::set<std::string> raw_labels;

  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto& rec = records[r + 1];
    const std::string where = " (data row " + std::to_string(r + 1) + ")";
    if (rec.size() != header.size())
      throw Error(ErrorKind::ArityMismatch, "row has " + std::to_string(rec.size()) + " fields, header has " +
                                                std::to_string(header.size()) + where);
    std::string label_cell(trim(rec[label_col]));
    if (label_cell.empty()) throw Error(ErrorKind::MissingValue, "empty label" + where);
    raw_labels.insert(label_cell);
    labels[r] = label_cell == spec.positive_label ? 1 : 0;

    for (std::size_t f = 0; f < n_features; ++f) {
      std::string_view cell = trim(rec[feature_cols[f]]);
      if (cell.empty()) throw Error(ErrorKind::MissingValue, "empty cell in '" + schema[f].name + "'" + where);
      if (schema[f].kind == FeatureKind::Continuous) {
        auto v = parse_number(cell);
        if (!v)
          throw Error(ErrorKind::NonNumericContinuous,
                      "'" + std::string(cell) + "' in '" + schema[f].name + "' is not a finite number" + where);
        values[r * n_features + f] = *v;
      } else if (spec.features[f].categories) {
        auto idx = schema[f].category_index(cell);
        if (!idx)
          throw Error(ErrorKind::UnknownCategory,
                      "'" + std::string(cell) + "' is not a category of '" + schema[f].name + "'" + where);
        values[r * n_features + f] = static_cast<double>(*idx);
      } else {
        category_cells[f].emplace_back(cell);
      }
    }
  }

  // Inferred categories: the sorted set of observed labels.
  for (std::size_t f = 0; f < n_features; ++f) {
    if (schema[f].kind != FeatureKind::Categorical || spec.features[f].categories) continue;
    std::set<std::string> observed(category_cells[f].begin(), category_cells[f].end());
    schema[f].categories.assign(observed.begin(), observed.end());
    std::map<std::string, std::size_t> ordinal;
    for (std::size_t i = 0; i < schema[f].categories.size(); ++i) ordinal[schema[f].categories[i]] = i;
    for (std::size_t r = 0; r < n_rows; ++r)
      values[r * n_features + f] = static_cast<double>(ordinal[category_cells[f][r]]);
  }

  std::string negative_name;
  if (spec.negative_label) {
    negative_name = *spec.negative_label;
    for (const auto& l : raw_labels)
      if (l != spec.positive_label && l != negative_name)
        throw Error(ErrorKind::InvalidSchema, "label '" + l + "' is neither positive nor negative label");
  } else {
    std::vector<std::string> others;
    for (const auto& l : raw_labels)
      if (l != spec.positive_label) others.push_back(l);
    if (others.size() > 1)
      throw Error(ErrorKind::InvalidSchema, "label column '" + spec.label_column + "' has more than two classes");
    negative_name = others.empty() ? "not " + spec.positive_label : others.front();
  }

  return Dataset(std::move(schema), std::move(values), std::move(labels), spec.label_column, spec.positive_label,
                 std::move(negative_name));
}

Dataset load_csv(const std::filesystem::path& path, const SchemaSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), spec);
}

void write_csv(const Dataset& dataset, std::ostream& out) {
  for (std::size_t f = 0; f < dataset.num_features(); ++f) out << csv::escape(dataset.feature(f).name) << ',';
  out << csv::escape(dataset.label_column()) << '\n';
  for (std::size_t r = 0; r < dataset.num_rows(); ++r) {
    for (std::size_t f = 0; f < dataset.num_features(); ++f)
      out << csv::escape(dataset.format_value(f, dataset.value(r, f))) << ',';
    out << csv::escape(dataset.label(r) == 1 ? dataset.positive_label_name() : dataset.negative_label_name())
        << '\n';
  }
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_csv(dataset, out);
}

FeaturePartition split_feature_kinds(std::span<const FeatureSchema> schema) {
  FeaturePartition p;
  for (std::size_t f = 0; f < schema.size(); ++f)
    (schema[f].is_categorical() ? p.categorical : p.continuous).push_back(f);
  return p;
}

FeaturePartition split_feature_kinds(const Dataset& dataset) { return split_feature_kinds(dataset.schema()); }

}  // namespace cfcohort
