#include "cfcohort/discretizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cfcohort/error.hpp"
#include "cfcohort/kernels.hpp"

namespace cfcohort {

double FeatureBinning::inner_width() const {
  if (inner_edges.size() < 2) return 0.0;
  return 4.0 * stddev / static_cast<double>(inner_edges.size() - 1);
}

FeatureBinning DiscretizationScheme::continuous_binning(std::string name, double mean, double stddev,
                                                        int bin_count) {
  if (bin_count < 4) throw Error(ErrorKind::InvalidArgument, "bin count must be at least 4");
  FeatureBinning fb;
  fb.name = std::move(name);
  fb.kind = FeatureKind::Continuous;
  fb.mean = mean;
  fb.stddev = stddev;
  fb.binnable = stddev > 0.0 && std::isfinite(stddev);
  if (!fb.binnable) return fb;

  const auto inner = static_cast<std::size_t>(bin_count - 2);
  const double width = 4.0 * stddev / static_cast<double>(inner);
  const double low = mean - 2.0 * stddev;
  fb.inner_edges.resize(inner + 1);
  for (std::size_t i = 0; i < inner; ++i) fb.inner_edges[i] = low + static_cast<double>(i) * width;
  fb.inner_edges[inner] = mean + 2.0 * stddev;
  // A spread far below the mean's precision collapses edges; such a column
  // cannot be binned meaningfully.
  for (std::size_t i = 1; i < fb.inner_edges.size(); ++i) {
    if (!(fb.inner_edges[i] > fb.inner_edges[i - 1])) {
      fb.binnable = false;
      fb.inner_edges.clear();
      break;
    }
  }
  return fb;
}

DiscretizationScheme::DiscretizationScheme(int bin_count, std::vector<FeatureBinning> features)
    : bin_count_(bin_count), features_(std::move(features)) {
  if (bin_count_ < 4) throw Error(ErrorKind::InvalidArgument, "bin count must be at least 4");
  for (const auto& f : features_) {
    if (f.kind == FeatureKind::Continuous && f.binnable &&
        f.inner_edges.size() != static_cast<std::size_t>(bin_count_ - 1))
      throw Error(ErrorKind::InvalidArgument, "feature '" + f.name + "' has the wrong number of edges");
  }
}

bool DiscretizationScheme::is_binnable(std::size_t f) const {
  const auto& fb = features_.at(f);
  return fb.kind == FeatureKind::Continuous && fb.binnable;
}

std::size_t DiscretizationScheme::bin_of(double value, std::size_t f) const {
  if (!is_binnable(f))
    throw Error(ErrorKind::UnbinnableFeature, "feature '" + features_.at(f).name + "' cannot be binned");
  const auto& edges = features_[f].inner_edges;
  return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
}

double DiscretizationScheme::representative_value(std::size_t bin, std::size_t f) const {
  const auto& fb = features_.at(f);
  if (fb.kind == FeatureKind::Categorical) {
    if (bin >= fb.categories.size()) throw Error(ErrorKind::InvalidArgument, "category ordinal out of range");
    return static_cast<double>(bin);
  }
  if (!fb.binnable) throw Error(ErrorKind::UnbinnableFeature, "feature '" + fb.name + "' cannot be binned");
  const auto n = static_cast<std::size_t>(bin_count_);
  if (bin >= n) throw Error(ErrorKind::InvalidArgument, "bin index out of range");
  const auto& e = fb.inner_edges;
  const double h = fb.inner_width();
  if (bin == 0) return e.front() - h / 2.0;
  if (bin == n - 1) return e.back() + h / 2.0;
  return (e[bin - 1] + e[bin]) / 2.0;
}

std::pair<double, double> DiscretizationScheme::bin_range(std::size_t bin, std::size_t f) const {
  if (!is_binnable(f))
    throw Error(ErrorKind::UnbinnableFeature, "feature '" + features_.at(f).name + "' cannot be binned");
  const auto n = static_cast<std::size_t>(bin_count_);
  if (bin >= n) throw Error(ErrorKind::InvalidArgument, "bin index out of range");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto& e = features_[f].inner_edges;
  return {bin == 0 ? -inf : e[bin - 1], bin == n - 1 ? inf : e[bin]};
}

std::size_t DiscretizationScheme::num_slots(std::size_t f) const {
  const auto& fb = features_.at(f);
  if (fb.kind == FeatureKind::Categorical) return fb.categories.size();
  return fb.binnable ? static_cast<std::size_t>(bin_count_) : 1;
}

std::size_t DiscretizationScheme::slot_of(double raw, std::size_t f) const {
  const auto& fb = features_.at(f);
  if (fb.kind == FeatureKind::Categorical) return static_cast<std::size_t>(raw);
  return fb.binnable ? bin_of(raw, f) : 0;
}

std::vector<std::size_t> DiscretizationScheme::histogram(std::span<const double> values, std::size_t f) const {
  std::vector<std::size_t> counts(num_slots(f), 0);
  const auto& fb = features_.at(f);
  if (fb.kind == FeatureKind::Continuous && fb.binnable) {
    std::vector<std::uint32_t> bins(values.size());
    kernels::count_edges_le(values, fb.inner_edges, bins);
    for (auto b : bins) ++counts[b];
  } else {
    for (double v : values) ++counts[slot_of(v, f)];
  }
  return counts;
}

nlohmann::json DiscretizationScheme::to_json() const {
  nlohmann::json j;
  j["bin_count"] = bin_count_;
  j["features"] = nlohmann::json::array();
  for (const auto& fb : features_) {
    nlohmann::json jf{{"name", fb.name}, {"kind", to_string(fb.kind)}};
    if (fb.kind == FeatureKind::Continuous) {
      jf["mean"] = fb.mean;
      jf["std"] = fb.stddev;
      jf["binnable"] = fb.binnable;
      jf["inner_edges"] = fb.inner_edges;
      jf["inner_width"] = fb.inner_width();
    } else {
      jf["categories"] = fb.categories;
    }
    j["features"].push_back(std::move(jf));
  }
  return j;
}

DiscretizationScheme DiscretizationScheme::from_json(const nlohmann::json& j) {
  try {
    const int n = j.at("bin_count").get<int>();
    std::vector<FeatureBinning> features;
    for (const auto& jf : j.at("features")) {
      FeatureBinning fb;
      fb.name = jf.at("name").get<std::string>();
      fb.kind = jf.at("kind").get<std::string>() == "categorical" ? FeatureKind::Categorical : FeatureKind::Continuous;
      if (fb.kind == FeatureKind::Continuous) {
        fb.mean = jf.at("mean").get<double>();
        fb.stddev = jf.at("std").get<double>();
        fb.binnable = jf.at("binnable").get<bool>();
        fb.inner_edges = jf.at("inner_edges").get<std::vector<double>>();
      } else {
        fb.categories = jf.at("categories").get<std::vector<std::string>>();
      }
      features.push_back(std::move(fb));
    }
    return DiscretizationScheme(n, std::move(features));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSchema, std::string("scheme JSON: ") + e.what());
  }
}

DiscretizationScheme fit_discretizer(const Dataset& dataset, int bin_count) {
  if (bin_count < 4) throw Error(ErrorKind::InvalidArgument, "bin count must be at least 4");
  std::vector<FeatureBinning> features;
  features.reserve(dataset.num_features());
  const auto n = static_cast<double>(dataset.num_rows());
  for (std::size_t f = 0; f < dataset.num_features(); ++f) {
    const auto& fs = dataset.feature(f);
    if (fs.is_categorical()) {
      FeatureBinning fb;
      fb.name = fs.name;
      fb.kind = FeatureKind::Categorical;
      fb.categories = fs.categories;
      features.push_back(std::move(fb));
      continue;
    }
    const auto col = dataset.column(f);
    const double mean = kernels::sum(col) / n;
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    // constant columns get an exact zero spread rather than rounding residue
    const double stddev = *lo == *hi ? 0.0 : std::sqrt(kernels::sum_sq_dev(col, mean) / n);
    features.push_back(DiscretizationScheme::continuous_binning(fs.name, mean, stddev, bin_count));
  }
  return DiscretizationScheme(bin_count, std::move(features));
}

}  // namespace cfcohort
