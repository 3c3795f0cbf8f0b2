#include "cfcohort/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfcohort/error.hpp"

namespace cfcohort {

namespace {

std::size_t resolve_feature(const nlohmann::json& j, const Dataset& dataset) {
  if (j.is_number_unsigned() || j.is_number_integer()) {
    const auto f = j.get<long long>();
    if (f < 0 || static_cast<std::size_t>(f) >= dataset.num_features())
      throw Error(ErrorKind::InvalidArgument, "feature index " + std::to_string(f) + " out of range");
    return static_cast<std::size_t>(f);
  }
  const auto name = j.get<std::string>();
  auto f = dataset.feature_index(name);
  if (!f) throw Error(ErrorKind::MissingColumn, "unknown feature '" + name + "'");
  return *f;
}

}  // namespace

void FilterSet::validate(const Dataset& dataset) const {
  if (!(confidence_low >= 0.0 && confidence_high <= 1.0 && confidence_low <= confidence_high))
    throw Error(ErrorKind::InvalidArgument, "confidence range must satisfy 0 <= low <= high <= 1");
  for (const auto& clause : ranges) {
    if (const auto* r = std::get_if<NumericRange>(&clause)) {
      if (r->feature >= dataset.num_features() || dataset.feature(r->feature).is_categorical())
        throw Error(ErrorKind::InvalidArgument, "numeric range on a non-continuous feature");
      if (!(r->low <= r->high)) throw Error(ErrorKind::InvalidArgument, "range low must not exceed high");
    } else {
      const auto& c = std::get<CategorySet>(clause);
      if (c.feature >= dataset.num_features() || !dataset.feature(c.feature).is_categorical())
        throw Error(ErrorKind::InvalidArgument, "category set on a non-categorical feature");
      for (auto a : c.allowed)
        if (a >= dataset.feature(c.feature).categories.size())
          throw Error(ErrorKind::UnknownCategory, "category ordinal out of range");
    }
  }
}

FilterSet FilterSet::predicted_positive() {
  FilterSet f;
  f.cells = {ConfusionCell::TP, ConfusionCell::FP};
  return f;
}

FilterSet FilterSet::predicted_negative() {
  FilterSet f;
  f.cells = {ConfusionCell::TN, ConfusionCell::FN};
  return f;
}

nlohmann::json FilterSet::to_json(const Dataset& dataset) const {
  nlohmann::json j;
  j["confidence"] = {confidence_low, confidence_high};
  j["cells"] = nlohmann::json::array();
  for (auto c : cells) j["cells"].push_back(to_string(c));
  j["ranges"] = nlohmann::json::array();
  for (const auto& clause : ranges) {
    if (const auto* r = std::get_if<NumericRange>(&clause)) {
      j["ranges"].push_back({{"feature", dataset.feature(r->feature).name}, {"min", r->low}, {"max", r->high}});
    } else {
      const auto& c = std::get<CategorySet>(clause);
      auto labels = nlohmann::json::array();
      for (auto a : c.allowed) labels.push_back(dataset.feature(c.feature).categories.at(a));
      j["ranges"].push_back({{"feature", dataset.feature(c.feature).name}, {"categories", labels}});
    }
  }
  j["hidden"] = hidden;
  return j;
}

FilterSet FilterSet::from_json(const nlohmann::json& j, const Dataset& dataset) {
  FilterSet fs;
  try {
    if (j.contains("confidence")) {
      const auto& c = j.at("confidence");
      fs.confidence_low = c.at(0).get<double>();
      fs.confidence_high = c.at(1).get<double>();
    }
    if (j.contains("cells"))
      for (const auto& c : j.at("cells")) fs.cells.push_back(parse_confusion_cell(c.get<std::string>()));
    if (j.contains("ranges")) {
      for (const auto& jr : j.at("ranges")) {
        const std::size_t f = resolve_feature(jr.at("feature"), dataset);
        const auto& schema = dataset.feature(f);
        if (schema.is_categorical()) {
          CategorySet cs{f, {}};
          for (const auto& c : jr.at("categories")) {
            if (c.is_string()) {
              auto idx = schema.category_index(c.get<std::string>());
              if (!idx) throw Error(ErrorKind::UnknownCategory, "unknown category '" + c.get<std::string>() + "'");
              cs.allowed.push_back(*idx);
            } else {
              cs.allowed.push_back(c.get<std::size_t>());
            }
          }
          std::sort(cs.allowed.begin(), cs.allowed.end());
          cs.allowed.erase(std::unique(cs.allowed.begin(), cs.allowed.end()), cs.allowed.end());
          fs.ranges.emplace_back(std::move(cs));
        } else {
          fs.ranges.emplace_back(NumericRange{f, jr.at("min").get<double>(), jr.at("max").get<double>()});
        }
      }
    }
    fs.hidden = j.value("hidden", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("filter set: ") + e.what());
  }
  std::sort(fs.cells.begin(), fs.cells.end());
  fs.cells.erase(std::unique(fs.cells.begin(), fs.cells.end()), fs.cells.end());
  fs.validate(dataset);
  return fs;
}

FilterSet conjoin(const FilterSet& a, const FilterSet& b) {
  FilterSet out;
  out.confidence_low = std::max(a.confidence_low, b.confidence_low);
  out.confidence_high = std::min(a.confidence_high, b.confidence_high);
  if (a.cells.empty()) {
    out.cells = b.cells;
  } else if (b.cells.empty()) {
    out.cells = a.cells;
  } else {
    for (auto c : a.cells)
      if (std::find(b.cells.begin(), b.cells.end(), c) != b.cells.end()) out.cells.push_back(c);
    if (out.cells.empty()) {
      // no cell satisfies both sides: make the filter unsatisfiable
      out.confidence_low = 1.0;
      out.confidence_high = 0.0;
    }
  }
  out.ranges = a.ranges;
  out.ranges.insert(out.ranges.end(), b.ranges.begin(), b.ranges.end());
  out.hidden = a.hidden && b.hidden;
  return out;
}

bool row_matches(const Dataset& dataset, const PredictionCache& cache, const FilterSet& filter, std::size_t row) {
  const double p = cache.probability(row);
  if (!(p >= filter.confidence_low && p <= filter.confidence_high)) return false;
  if (!filter.cells.empty() && std::find(filter.cells.begin(), filter.cells.end(), cache.cell(row)) == filter.cells.end())
    return false;
  for (const auto& clause : filter.ranges) {
    if (const auto* r = std::get_if<NumericRange>(&clause)) {
      const double v = dataset.value(row, r->feature);
      if (!(v >= r->low && v <= r->high)) return false;
    } else {
      const auto& c = std::get<CategorySet>(clause);
      const auto v = static_cast<std::size_t>(dataset.value(row, c.feature));
      if (!std::binary_search(c.allowed.begin(), c.allowed.end(), v)) return false;
    }
  }
  return true;
}

std::vector<std::size_t> apply_filterset(const Dataset& dataset, const PredictionCache& cache,
                                         const FilterSet& filter) {
  if (cache.size() != dataset.num_rows())
    throw Error(ErrorKind::ArityMismatch, "prediction cache does not cover the dataset");
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < dataset.num_rows(); ++r)
    if (row_matches(dataset, cache, filter, r)) rows.push_back(r);
  return rows;
}

// ---------------------------------------------------------------------------
// summaries

CohortSummary summarize_cohort(std::span<const std::size_t> rows, const Dataset& dataset,
                               const DiscretizationScheme& scheme) {
  if (scheme.num_features() != dataset.num_features())
    throw Error(ErrorKind::ArityMismatch, "scheme does not match dataset");
  CohortSummary s;
  s.size = rows.size();
  std::vector<double> values(rows.size());
  for (std::size_t f = 0; f < dataset.num_features(); ++f) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] >= dataset.num_rows()) throw Error(ErrorKind::UnknownRow, "row " + std::to_string(rows[i]));
      values[i] = dataset.value(rows[i], f);
    }
    FeatureSummary fs;
    fs.feature = f;
    fs.kind = dataset.feature(f).kind;
    fs.counts = scheme.histogram(values, f);
    if (!rows.empty()) {
      if (fs.kind == FeatureKind::Categorical) {
        fs.mode = static_cast<std::size_t>(std::max_element(fs.counts.begin(), fs.counts.end()) - fs.counts.begin());
      } else {
        std::vector<double> sorted = values;
        const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>((sorted.size() - 1) / 2);
        std::nth_element(sorted.begin(), mid, sorted.end());
        fs.median = *mid;
        if (scheme.is_binnable(f)) fs.median_bin = scheme.bin_of(*mid, f);
      }
    }
    s.features.push_back(std::move(fs));
  }
  return s;
}

nlohmann::json CohortSummary::to_json(const DiscretizationScheme& scheme) const {
  nlohmann::json j;
  j["size"] = size;
  j["features"] = nlohmann::json::array();
  for (const auto& fs : features) {
    const auto& fb = scheme.feature(fs.feature);
    nlohmann::json jf{{"feature", fs.feature}, {"name", fb.name}, {"kind", to_string(fs.kind)}, {"counts", fs.counts}};
    if (fs.kind == FeatureKind::Categorical) {
      jf["mode"] = fs.mode ? nlohmann::json(fb.categories.at(*fs.mode)) : nlohmann::json(nullptr);
    } else {
      jf["median"] = fs.median ? nlohmann::json(*fs.median) : nlohmann::json(nullptr);
      jf["median_bin"] = fs.median_bin ? nlohmann::json(*fs.median_bin) : nlohmann::json(nullptr);
    }
    j["features"].push_back(std::move(jf));
  }
  return j;
}

std::string_view to_string(SortKey key) {
  switch (key) {
    case SortKey::MedianDifference: return "median_difference";
    case SortKey::CounterfactualCount: return "counterfactual_count";
    case SortKey::SchemaOrder: return "schema_order";
  }
  return "?";
}

SortKey parse_sort_key(std::string_view s) {
  for (auto k : {SortKey::MedianDifference, SortKey::CounterfactualCount, SortKey::SchemaOrder})
    if (s == to_string(k)) return k;
  throw Error(ErrorKind::InvalidArgument, "unknown sort key '" + std::string(s) + "'");
}

std::vector<double> median_differences(const CohortSummary& a, const CohortSummary& b,
                                       const DiscretizationScheme& scheme) {
  const std::size_t n = scheme.num_features();
  if (a.features.size() != n || b.features.size() != n)
    throw Error(ErrorKind::ArityMismatch, "summaries do not share the scheme's features");
  std::vector<double> diff(n, 0.0);
  for (std::size_t f = 0; f < n; ++f) {
    const auto& fa = a.features[f];
    const auto& fb = b.features[f];
    if (scheme.is_categorical(f)) {
      if (fa.mode && fb.mode) diff[f] = *fa.mode != *fb.mode ? 1.0 : 0.0;
    } else if (scheme.is_binnable(f) && fa.median && fb.median) {
      diff[f] = std::abs(*fa.median - *fb.median) / (4.0 * scheme.feature(f).stddev);
    }
  }
  return diff;
}

std::vector<std::size_t> sort_features(const CohortSummary& a, const CohortSummary& b,
                                       std::span<const TransitionAggregate> aggregates, SortKey key,
                                       const DiscretizationScheme& scheme) {
  const std::size_t n = scheme.num_features();
  std::vector<double> score(n, 0.0);
  if (key == SortKey::MedianDifference) {
    score = median_differences(a, b, scheme);
  } else if (key == SortKey::CounterfactualCount) {
    for (const auto& agg : aggregates) {
      if (agg.num_features() != n) throw Error(ErrorKind::ArityMismatch, "aggregate does not match scheme");
      const auto totals = agg.feature_totals();
      for (std::size_t f = 0; f < n; ++f) score[f] += static_cast<double>(totals[f]);
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const bool cx = scheme.is_categorical(x), cy = scheme.is_categorical(y);
    if (cx != cy) return !cx;
    return score[x] > score[y];
  });
  return order;
}

std::vector<Instance> bin_slice(std::span<const std::size_t> rows, const Dataset& dataset,
                                const DiscretizationScheme& scheme, std::size_t feature, std::size_t bin) {
  if (feature >= scheme.num_features()) throw Error(ErrorKind::InvalidArgument, "feature index out of range");
  if (!scheme.is_categorical(feature) && !scheme.is_binnable(feature))
    throw Error(ErrorKind::UnbinnableFeature, "feature '" + scheme.feature(feature).name + "' cannot be binned");
  if (bin >= scheme.num_slots(feature)) throw Error(ErrorKind::InvalidArgument, "bin index out of range");
  std::vector<Instance> out;
  for (auto r : rows)
    if (scheme.slot_of(dataset.value(r, feature), feature) == bin) out.push_back(dataset.instance(r));
  return out;
}

}  // namespace cfcohort
