#include <doctest.h>

#include <cmath>
#include <random>

#include "cfcohort/discretizer.hpp"
#include "cfcohort/error.hpp"
#include "cfcohort/synthetic.hpp"
#include "support/fixtures.hpp"

using namespace cfcohort;

namespace {

DiscretizationScheme standard(int n = 10, double mean = 0.0, double sd = 1.0) {
  return DiscretizationScheme(n, {DiscretizationScheme::continuous_binning("x", mean, sd, n)});
}

}  // namespace

TEST_SUITE("discretizer") {
  TEST_CASE("fit on symmetric data gives the textbook edges") {
    // population sd of {-1, 1} is exactly 1
    const auto d = fixtures::continuous({"x"}, {-1.0, 1.0}, {0, 1});
    const auto s = fit_discretizer(d, 10);
    const auto& f = s.feature(0);
    CHECK(f.mean == 0.0);
    CHECK(f.stddev == 1.0);
    CHECK(f.inner_edges == std::vector<double>{-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0});
    CHECK(f.inner_width() == 0.5);

    const auto s6 = fit_discretizer(d, 6);
    CHECK(s6.feature(0).inner_edges == std::vector<double>{-2.0, -1.0, 0.0, 1.0, 2.0});
    CHECK(s6.feature(0).inner_width() == 1.0);
  }

  TEST_CASE("bin_of boundary conventions") {
    const auto s = standard();
    CHECK(s.bin_of(0.0, 0) == 5);
    CHECK(s.bin_of(-2.0, 0) == 1);
    CHECK(s.bin_of(-2.0000001, 0) == 0);
    CHECK(s.bin_of(2.0, 0) == 9);
    CHECK(s.bin_of(1.9999999, 0) == 8);
    CHECK(s.bin_of(-1e300, 0) == 0);
    CHECK(s.bin_of(1e300, 0) == 9);
  }

  TEST_CASE("representative values") {
    const auto s = standard();
    CHECK(s.representative_value(5, 0) == 0.25);
    CHECK(s.representative_value(0, 0) == -2.25);
    CHECK(s.representative_value(9, 0) == 2.25);
    const auto s2 = standard(6, 10.0, 2.0);
    CHECK(s2.bin_range(2, 0) == std::pair<double, double>{8.0, 10.0});
    CHECK(s2.representative_value(2, 0) == 9.0);
  }

  TEST_CASE("histogram") {
    const auto s = standard();
    CHECK(s.histogram({}, 0) == std::vector<std::size_t>(10, 0));
    const std::vector<double> v{-3.0, 0.0, 0.4, 3.0};
    CHECK(s.histogram(v, 0) == std::vector<std::size_t>{1, 0, 0, 0, 0, 2, 0, 0, 0, 1});
  }

  TEST_CASE("constant column is unbinnable, not an error") {
    const auto d = fixtures::continuous({"c", "x"}, {5, 1, 5, 2, 5, 3}, {0, 1, 0});
    const auto s = fit_discretizer(d);
    CHECK_FALSE(s.is_binnable(0));
    CHECK(s.is_binnable(1));
    CHECK(s.num_slots(0) == 1);
    CHECK_THROWS_AS(s.bin_of(5.0, 0), Error);
    try {
      s.bin_of(5.0, 0);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnbinnableFeature);
    }
  }

  TEST_CASE("bin count below 4 is rejected") {
    const auto d = fixtures::continuous({"x"}, {-1.0, 1.0}, {0, 1});
    CHECK_THROWS_AS(fit_discretizer(d, 3), Error);
  }

  TEST_CASE("categorical features map labels to ordinals") {
    const auto& h = fixtures::heart();
    const auto s = fit_discretizer(h);
    const auto f = *h.feature_index("Chest Pain Type");
    CHECK(s.is_categorical(f));
    CHECK(s.feature(f).categories == h.feature(f).categories);
    CHECK(s.num_slots(f) == 4);
    CHECK(s.slot_of(2.0, f) == 2);
  }

  TEST_CASE("credit risk column moments match a single-pass oracle") {
    const auto& d = fixtures::credit();
    const auto f = *d.feature_index("External Risk Estimate");
    // Welford's single pass
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (std::size_t r = 0; r < d.num_rows(); ++r) {
      const double x = d.value(r, f);
      ++k;
      const double delta = x - mean;
      mean += delta / static_cast<double>(k);
      m2 += delta * (x - mean);
    }
    const double sd = std::sqrt(m2 / static_cast<double>(k));
    const auto s = fit_discretizer(d, 10);
    const auto& b = s.feature(f);
    CHECK(b.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(b.stddev == doctest::Approx(sd).epsilon(1e-12));
    const double h = 4.0 * b.stddev / 8.0;
    REQUIRE(b.inner_edges.size() == 9);
    for (std::size_t i = 0; i + 1 < b.inner_edges.size(); ++i)
      CHECK(b.inner_edges[i] == (b.mean - 2.0 * b.stddev) + static_cast<double>(i) * h);
    CHECK(b.inner_edges.back() == b.mean + 2.0 * b.stddev);
  }

  TEST_CASE("standard-normal mass in the inner bins") {
    synthetic::Rng rng(2024);
    std::vector<double> v(10000);
    for (auto& x : v) x = rng.normal();
    const auto s = standard();
    const auto h = s.histogram(v, 0);
    std::size_t inner = 0;
    for (std::size_t b = 1; b <= 8; ++b) inner += h[b];
    const double share = 100.0 * static_cast<double>(inner) / 10000.0;
    CHECK(std::abs(share - 95.45) <= 1.0);
  }

  TEST_CASE("properties over random values") {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> mu_d(-50, 50), sd_d(0.01, 20), u(-1, 1);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 4 + trial % 12;
      const double mu = mu_d(gen), sd = sd_d(gen);
      const auto s = standard(n, mu, sd);
      std::vector<double> vals;
      for (int i = 0; i < 400; ++i) vals.push_back(mu + 3.0 * sd * u(gen));
      vals.push_back(s.feature(0).inner_edges.front());
      vals.push_back(s.feature(0).inner_edges.back());
      for (double e : s.feature(0).inner_edges) vals.push_back(e);

      std::vector<std::size_t> brute(static_cast<std::size_t>(n), 0);
      for (double v : vals) {
        const auto b = s.bin_of(v, 0);
        ++brute[b];
        const auto [lo, hi] = s.bin_range(b, 0);
        CHECK(lo <= v);
        CHECK(v < hi);
        if (b > 0 && b + 1 < static_cast<std::size_t>(n)) CHECK(s.bin_of(s.representative_value(b, 0), 0) == b);
      }
      CHECK(s.histogram(vals, 0) == brute);

      std::sort(vals.begin(), vals.end());
      for (std::size_t i = 1; i < vals.size(); ++i) CHECK(s.bin_of(vals[i - 1], 0) <= s.bin_of(vals[i], 0));

      const auto& e = s.feature(0).inner_edges;
      CHECK(e.size() == static_cast<std::size_t>(n - 1));
      for (std::size_t i = 1; i < e.size(); ++i) CHECK(e[i - 1] < e[i]);
    }
  }

  TEST_CASE("scheme JSON round trip") {
    const auto s = fit_discretizer(fixtures::heart());
    const auto back = DiscretizationScheme::from_json(s.to_json());
    CHECK(back.to_json() == s.to_json());
    for (std::size_t f = 0; f < s.num_features(); ++f) CHECK(back.feature(f).inner_edges == s.feature(f).inner_edges);
  }
}
