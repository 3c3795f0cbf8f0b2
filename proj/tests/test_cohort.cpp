#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "cfcohort/aggregation.hpp"
#include "cfcohort/cohort.hpp"
#include "cfcohort/error.hpp"
#include "support/fixtures.hpp"

using namespace cfcohort;

namespace {

struct Fitted {
  const Dataset& d;
  std::shared_ptr<LinearPredictor> model;
  PredictionCache cache;
  DiscretizationScheme scheme;

  explicit Fitted(const Dataset& data)
      : d(data),
        model(train_logistic(data, TrainOptions{.epochs = 200})),
        cache(PredictionCache::build(data, *model, DecisionConfig{})),
        scheme(fit_discretizer(data)) {}
};

const Fitted& heart_fit() {
  static const Fitted f(fixtures::heart());
  return f;
}

const Fitted& credit_fit() {
  static const Fitted f(fixtures::credit());
  return f;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}


}  // namespace

TEST_SUITE("cohort") {
  TEST_CASE("vacuous filter keeps every row") {
    const auto& f = heart_fit();
    CHECK(apply_filterset(f.d, f.cache, FilterSet{}) == all_rows(f.d.num_rows()));
  }

  TEST_CASE("cell filter on the four-row example") {
    const auto d = fixtures::continuous({"x"}, {1, 2, 3, 4}, {1, 0, 1, 0});
    const PredictionCache cache({0.9, 0.8, 0.2, 0.1}, d.labels(), DecisionConfig{});
    FilterSet tp;
    tp.cells = {ConfusionCell::TP};
    CHECK(apply_filterset(d, cache, tp) == std::vector<std::size_t>{0});
    CHECK(apply_filterset(d, cache, FilterSet::predicted_positive()) == std::vector<std::size_t>{0, 1});
    CHECK(apply_filterset(d, cache, FilterSet::predicted_negative()) == std::vector<std::size_t>{2, 3});
  }

  TEST_CASE("confidence interval is closed") {
    const auto d = fixtures::continuous({"x"}, {1, 2, 3}, {1, 0, 1});
    const PredictionCache cache({0.2, 0.5, 0.8}, d.labels(), DecisionConfig{});
    FilterSet f;
    f.confidence_low = 0.5;
    f.confidence_high = 0.8;
    CHECK(apply_filterset(d, cache, f) == std::vector<std::size_t>{1, 2});
  }

  TEST_CASE("validation") {
    const auto& f = heart_fit();
    FilterSet bad;
    bad.confidence_low = 0.7;
    bad.confidence_high = 0.2;
    CHECK_THROWS_AS(bad.validate(f.d), Error);
    FilterSet inverted;
    inverted.ranges.push_back(NumericRange{0, 5.0, 1.0});
    CHECK_THROWS_AS(inverted.validate(f.d), Error);
    FilterSet wrong_kind;
    wrong_kind.ranges.push_back(CategorySet{0, {0}});
    CHECK_THROWS_AS(wrong_kind.validate(f.d), Error);
  }

  TEST_CASE("credit table: range membership within TP and FP cohorts matches a linear scan") {
    const auto& f = credit_fit();
    const auto ere = *f.d.feature_index("External Risk Estimate");
    for (auto cell : {ConfusionCell::TP, ConfusionCell::FP}) {
      FilterSet base;
      base.cells = {cell};
      FilterSet ranged = base;
      ranged.ranges.push_back(NumericRange{ere, 80.0, 82.0});
      const auto cohort = apply_filterset(f.d, f.cache, base);
      const auto inside = apply_filterset(f.d, f.cache, ranged);
      std::size_t scan = 0;
      for (std::size_t r = 0; r < f.d.num_rows(); ++r)
        if (f.cache.cell(r) == cell && f.d.value(r, ere) >= 80.0 && f.d.value(r, ere) <= 82.0) ++scan;
      CHECK(inside.size() == scan);
      MESSAGE(to_string(cell) << ": " << inside.size() << " of " << cohort.size() << " rows have ERE in [80, 82]");
    }
  }

  TEST_CASE("summaries: lower median and single rows") {
    const auto d = fixtures::continuous({"x"}, {1, 2, 3, 4}, {1, 0, 1, 0});
    const auto s = fit_discretizer(d);
    const auto sum = summarize_cohort(all_rows(4), d, s);
    CHECK(sum.size == 4);
    CHECK(sum.features[0].median == 2.0);
    CHECK(sum.features[0].median_bin == s.bin_of(2.0, 0));

    const std::vector<std::size_t> one{2};
    const auto single = summarize_cohort(one, d, s);
    CHECK(single.features[0].median == 3.0);
    const auto& counts = single.features[0].counts;
    CHECK(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == 1);
    CHECK(counts[s.bin_of(3.0, 0)] == 1);

    const auto empty = summarize_cohort({}, d, s);
    CHECK(empty.size == 0);
    CHECK_FALSE(empty.features[0].median.has_value());
  }

  TEST_CASE("summaries: modes break ties by ordinal") {
    std::vector<FeatureSchema> schema{{"c", FeatureKind::Categorical, {"a", "b", "c"}, std::nullopt}};
    const Dataset d(schema, {2, 1, 1, 2, 0}, {0, 1, 0, 1, 0}, "y", "1", "0");
    const auto s = fit_discretizer(d);
    const auto sum = summarize_cohort(all_rows(5), d, s);
    CHECK(sum.features[0].mode == 1u);
    CHECK(sum.features[0].counts == std::vector<std::size_t>{1, 2, 2});
  }

  TEST_CASE("credit table medians match a sort-based oracle") {
    const auto& f = credit_fit();
    const auto rows = apply_filterset(f.d, f.cache, FilterSet::predicted_positive());
    const auto sum = summarize_cohort(rows, f.d, f.scheme);
    for (std::size_t feat = 0; feat < f.d.num_features(); ++feat) {
      std::vector<double> v;
      for (auto r : rows) v.push_back(f.d.value(r, feat));
      std::sort(v.begin(), v.end());
      CHECK(sum.features[feat].median == v[(v.size() - 1) / 2]);
      const auto& c = sum.features[feat].counts;
      CHECK(std::accumulate(c.begin(), c.end(), std::size_t{0}) == rows.size());
    }
  }

  TEST_CASE("sorting") {
    const auto& f = heart_fit();
    const auto rows = all_rows(f.d.num_rows());
    const auto sum = summarize_cohort(rows, f.d, f.scheme);
    const auto parts = split_feature_kinds(f.d);
    std::vector<std::size_t> continuous_then_categorical = parts.continuous;
    continuous_then_categorical.insert(continuous_then_categorical.end(), parts.categorical.begin(),
                                       parts.categorical.end());

    SUBCASE("identical cohorts fall back to schema order within each kind") {
      CHECK(sort_features(sum, sum, {}, SortKey::MedianDifference, f.scheme) == continuous_then_categorical);
      CHECK(sort_features(sum, sum, {}, SortKey::SchemaOrder, f.scheme) == continuous_then_categorical);
    }
    SUBCASE("larger normalised difference first") {
      const auto d = fixtures::continuous({"a", "b"}, {0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 10, 2}, {0, 1, 0, 1, 0, 1});
      const auto s = fit_discretizer(d);
      const std::vector<std::size_t> ra{0, 1}, rb{4, 5};
      const auto sa = summarize_cohort(ra, d, s), sb = summarize_cohort(rb, d, s);
      const auto diffs = median_differences(sa, sb, s);
      CHECK(diffs[0] == doctest::Approx(std::abs(0.0 - 4.0) / (4 * s.feature(0).stddev)));
      const auto order = sort_features(sa, sb, {}, SortKey::MedianDifference, s);
      CHECK(order.front() == (diffs[0] >= diffs[1] ? 0u : 1u));
    }
    SUBCASE("counterfactual count uses arrow totals") {
      const auto ex = generate_batch(f.d, rows, *f.model, f.scheme, AlgorithmConfig{});
      std::vector<TransitionAggregate> aggs{aggregate_transitions(ex, f.d.num_features())};
      const auto totals = aggs[0].feature_totals();
      const auto order = sort_features(sum, sum, aggs, SortKey::CounterfactualCount, f.scheme);
      for (std::size_t i = 1; i < order.size(); ++i) {
        const bool same_kind = f.scheme.is_categorical(order[i - 1]) == f.scheme.is_categorical(order[i]);
        if (same_kind) CHECK(totals[order[i - 1]] >= totals[order[i]]);
        else CHECK_FALSE(f.scheme.is_categorical(order[i - 1]));
      }
    }
  }

  TEST_CASE("credit table: positive vs negative median differences match recomputation") {
    const auto& f = credit_fit();
    const auto pos = apply_filterset(f.d, f.cache, FilterSet::predicted_positive());
    const auto neg = apply_filterset(f.d, f.cache, FilterSet::predicted_negative());
    const auto sa = summarize_cohort(pos, f.d, f.scheme), sb = summarize_cohort(neg, f.d, f.scheme);
    const auto diffs = median_differences(sa, sb, f.scheme);
    for (std::size_t feat = 0; feat < f.d.num_features(); ++feat) {
      const double expect = std::abs(*sa.features[feat].median - *sb.features[feat].median) /
                            (4.0 * f.scheme.feature(feat).stddev);
      CHECK(diffs[feat] == doctest::Approx(expect).epsilon(1e-12));
    }
    const auto order = sort_features(sa, sb, {}, SortKey::MedianDifference, f.scheme);
    std::string top;
    for (std::size_t i = 0; i < 5; ++i) top += f.d.feature(order[i]).name + "; ";
    MESSAGE("top five by median difference: " << top);
    const auto ere = *f.d.feature_index("External Risk Estimate");
    CHECK(std::find(order.begin(), order.begin() + 5, ere) != order.begin() + 5);
  }

  TEST_CASE("bin slices") {
    const auto d = fixtures::continuous({"x", "y"}, {-3, 10, 0.1, 20, 3, 30, 0.2, 40}, {0, 1, 0, 1});
    const DiscretizationScheme s(10, {DiscretizationScheme::continuous_binning("x", 0, 1, 10),
                                      DiscretizationScheme::continuous_binning("y", 25, 10, 10)});
    CHECK(bin_slice({}, d, s, 0, 5).empty());
    const std::vector<std::size_t> cohort{0, 1, 2};
    const auto slice = bin_slice(cohort, d, s, 0, 5);
    REQUIRE(slice.size() == 1);
    CHECK(slice[0].row_id == 1);
    CHECK(slice[0].values == std::vector<double>{0.1, 20});
  }

  TEST_CASE("property: slice sizes equal histogram counts") {
    for (const Fitted* f : {&heart_fit(), &credit_fit()}) {
      FilterSet tp;
      tp.cells = {ConfusionCell::TP};
      const auto rows = apply_filterset(f->d, f->cache, tp);
      const auto sum = summarize_cohort(rows, f->d, f->scheme);
      for (std::size_t feat = 0; feat < f->d.num_features(); ++feat)
        for (std::size_t b = 0; b < f->scheme.num_slots(feat); ++b)
          CHECK(bin_slice(rows, f->d, f->scheme, feat, b).size() == sum.features[feat].counts[b]);
    }
  }

  TEST_CASE("property: histogram of a disjoint union is the sum of the parts") {
    const auto& f = heart_fit();
    std::vector<std::size_t> a, b, u;
    for (std::size_t r = 0; r < f.d.num_rows(); ++r) (r % 3 == 0 ? a : b).push_back(r), u.push_back(r);
    const auto sa = summarize_cohort(a, f.d, f.scheme), sb = summarize_cohort(b, f.d, f.scheme),
               su = summarize_cohort(u, f.d, f.scheme);
    for (std::size_t feat = 0; feat < f.d.num_features(); ++feat)
      for (std::size_t k = 0; k < su.features[feat].counts.size(); ++k)
        CHECK(su.features[feat].counts[k] == sa.features[feat].counts[k] + sb.features[feat].counts[k]);
  }

  TEST_CASE("property: conjunction is intersection and clauses never grow cohorts") {
    std::mt19937_64 g(7);
    for (const Fitted* f : {&heart_fit(), &credit_fit()}) {
      for (int trial = 0; trial < 100; ++trial) {
        const auto a = fixtures::random_filter(g, f->d, f->scheme);
        const auto b = fixtures::random_filter(g, f->d, f->scheme);
        const auto ra = apply_filterset(f->d, f->cache, a);
        const auto rb = apply_filterset(f->d, f->cache, b);
        const auto rab = apply_filterset(f->d, f->cache, conjoin(a, b));
        std::vector<std::size_t> inter;
        std::set_intersection(ra.begin(), ra.end(), rb.begin(), rb.end(), std::back_inserter(inter));
        CHECK(rab == inter);
        CHECK(rab.size() <= ra.size());
        CHECK(rab.size() <= rb.size());
      }
    }
  }

  TEST_CASE("filter JSON round trip by name and label") {
    const auto& f = heart_fit();
    FilterSet fs;
    fs.confidence_low = 0.25;
    fs.cells = {ConfusionCell::TP, ConfusionCell::FN};
    fs.ranges.push_back(NumericRange{0, 40, 60});
    fs.ranges.push_back(CategorySet{*f.d.feature_index("Chest Pain Type"), {1, 3}});
    fs.hidden = true;
    const auto j = fs.to_json(f.d);
    CHECK(FilterSet::from_json(j, f.d) == fs);
    CHECK(j.dump().find("asymptomatic") != std::string::npos);

    // cell lists are normalised on the way in
    auto shuffled = j;
    shuffled["cells"] = {"FN", "TP", "FN"};
    CHECK(FilterSet::from_json(shuffled, f.d) == fs);
  }
}
