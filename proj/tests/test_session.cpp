#include <doctest.h>

#include <fstream>
#include <atomic>
#include <thread>

#include "cfcohort/error.hpp"
#include "cfcohort/session.hpp"
#include "cfcohort/synthetic.hpp"
#include "support/fixtures.hpp"

using namespace cfcohort;

namespace {

struct Files {
  fixtures::TempDir dir;
  std::filesystem::path csv = dir / "heart.csv";
  std::filesystem::path schema = dir / "heart.schema.json";

  Files() { synthetic::heart().write(csv, schema); }

  CreateRequest request() const {
    CreateRequest r;
    r.dataset_path = csv;
    r.schema = SchemaSpec::load(schema);
    r.model.type = ModelSpec::Type::Logistic;
    r.model.train.epochs = 200;
    return r;
  }
};

ErrorKind error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

}  // namespace

TEST_SUITE("service-cli") {
  TEST_CASE("toy dataset with a zero-weight model") {
    fixtures::TempDir dir;
    {
      std::ofstream(dir / "toy.csv") << "x,y\n1,0\n2,1\n3,1\n";
    }
    CreateRequest r;
    r.dataset_path = dir / "toy.csv";
    r.schema = SchemaSpec::from_json(
        nlohmann::json::parse(R"({"label_column": "y", "positive_label": "1", "features": [{"name": "x", "kind": "continuous"}]})"));
    r.model = ModelSpec::from_json(nlohmann::json::parse(R"({"type": "linear", "coefficients": {"intercept": 0, "weights": [0]}})"));
    const auto s = Session::create(r, "toy");
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(s->cache().probability(i) == 0.5);
      CHECK(s->cache().decision(i) == 1);
    }
    CHECK(s->filter(CohortSlot::A) == FilterSet::predicted_positive());
    CHECK(s->filter(CohortSlot::B) == FilterSet::predicted_negative());
    CHECK(s->snapshot()->explanations.size() == 3);
  }

  TEST_CASE("malformed schema spec surfaces the missing column") {
    Files f;
    auto r = f.request();
    r.schema.features[0].name = "Not A Column";
    try {
      Session::create(r, "x");
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::MissingColumn);
      CHECK(std::string(e.what()).find("Not A Column") != std::string::npos);
      CHECK(std::string(e.what()).find("dataset") != std::string::npos);
    }
  }

  TEST_CASE("save, load, save gives identical bytes") {
    Files f;
    const auto s = Session::create(f.request(), "abc");
    FilterSet custom;
    custom.cells = {ConfusionCell::FP};
    custom.ranges.push_back(CategorySet{*s->dataset().feature_index("Sex"), {1}});
    s->set_filter(CohortSlot::B, custom);
    s->save(f.dir / "one.json");
    const auto back = Session::load_file(f.dir / "one.json");
    back->save(f.dir / "two.json");
    CHECK(fixtures::read_file(f.dir / "one.json") == fixtures::read_file(f.dir / "two.json"));
    CHECK(back->snapshot()->fingerprint == s->snapshot()->fingerprint);
    CHECK(back->snapshot()->explanations == s->snapshot()->explanations);
    CHECK(back->filter(CohortSlot::B) == custom);
  }

  TEST_CASE("loading refuses a dataset that changed") {
    Files f;
    const auto s = Session::create(f.request(), "abc");
    const auto saved = s->persist();
    {
      std::ofstream(f.csv, std::ios::app) << "50,male,asymptomatic,130,250,no,normal,150,no,1.0,flat,0,normal,disease\n";
    }
    CHECK(error_of([&] { Session::load(saved); }) == ErrorKind::InvalidSchema);
  }

  TEST_CASE("two builds from identical inputs agree byte for byte") {
    Files f;
    const auto a = Session::create(f.request(), "same");
    const auto b = Session::create(f.request(), "same");
    CHECK(a->persist().dump() == b->persist().dump());
    CHECK(a->aggregate_view(CohortSlot::A).dump() == b->aggregate_view(CohortSlot::A).dump());
  }

  TEST_CASE("update_config") {
    Files f;
    const auto s = Session::create(f.request(), "cfg");
    const auto fp0 = s->snapshot()->fingerprint;

    SUBCASE("identical settings are a no-op") {
      ConfigUpdate same;
      same.max_features = 5;
      same.max_displacement = 4;
      const auto r = s->update_config(same);
      CHECK_FALSE(r.regenerated);
      CHECK(r.new_fingerprint == fp0);
      CHECK(r.success_rate_delta() == 0.0);
    }
    SUBCASE("w = 1 bounds every explanation") {
      ConfigUpdate u;
      u.max_features = 1;
      const auto r = s->update_config(u);
      CHECK(r.regenerated);
      CHECK(r.new_fingerprint != fp0);
      CHECK(s->snapshot()->fingerprint == r.new_fingerprint);
      for (const auto& e : s->snapshot()->explanations) {
        CHECK(e.changes.size() <= 1);
        CHECK(e.fingerprint == r.new_fingerprint);
      }
    }
    SUBCASE("new bin count refits the scheme") {
      ConfigUpdate u;
      u.bin_count = 6;
      s->update_config(u);
      CHECK(s->snapshot()->scheme.bin_count() == 6);
      CHECK(s->schema_view()["scheme"]["bin_count"] == 6);
    }
    SUBCASE("invalid values are rejected and leave the session alone") {
      ConfigUpdate u;
      u.max_displacement = 0;
      CHECK(error_of([&] { s->update_config(u); }) == ErrorKind::InvalidArgument);
      CHECK(s->snapshot()->fingerprint == fp0);
    }
    SUBCASE("filters survive and never touch explanations") {
      const auto before = s->snapshot();
      FilterSet fs;
      fs.cells = {ConfusionCell::TN};
      s->set_filter(CohortSlot::A, fs);
      CHECK(s->snapshot() == before);
    }
  }

  TEST_CASE("readers see one fingerprint per response during updates") {
    Files f;
    const auto s = Session::create(f.request(), "conc");
    std::atomic<bool> stop{false};
    std::atomic<int> mismatches{0};
    std::thread reader([&] {
      while (!stop) {
        const auto v = s->explanation_view(7);
        if (v["fingerprint"] != v["explanation"]["fingerprint"]) ++mismatches;
      }
    });
    for (int l : {2, 3, 4}) {
      ConfigUpdate u;
      u.max_displacement = l;
      s->update_config(u);
    }
    stop = true;
    reader.join();
    CHECK(mismatches == 0);
  }

  TEST_CASE("views") {
    Files f;
    const auto s = Session::create(f.request(), "views");
    const auto fp = s->snapshot()->fingerprint;
    CHECK(s->schema_view()["fingerprint"] == fp);
    CHECK(s->cohort_view(CohortSlot::A)["fingerprint"] == fp);
    CHECK(s->compare_view(SortKey::MedianDifference)["fingerprint"] == fp);
    CHECK(s->aggregate_view(CohortSlot::B)["fingerprint"] == fp);
    CHECK(s->slice_view(CohortSlot::A, 0, 5)["fingerprint"] == fp);
    CHECK(s->explanation_view(0)["fingerprint"] == fp);
    CHECK(error_of([&] { s->explanation_view(100000); }) == ErrorKind::UnknownRow);

    // the views are reproducible by direct module calls
    const auto rows_a = apply_filterset(s->dataset(), s->cache(), s->filter(CohortSlot::A));
    CHECK(s->cohort_view(CohortSlot::A)["row_ids"] == nlohmann::json(rows_a));
    const auto snap = s->snapshot();
    const auto agg = aggregate_transitions(snap->select(rows_a), s->dataset().num_features());
    auto expected = agg.to_json(snap->scheme);
    CHECK(s->aggregate_view(CohortSlot::A)["aggregate"] == expected);
    const auto slice = bin_slice(rows_a, s->dataset(), snap->scheme, 0, 5);
    CHECK(s->slice_view(CohortSlot::A, 0, 5)["rows"].size() == slice.size());
  }

  TEST_CASE("row sampling is deterministic and reported") {
    const auto a = sample_rows(1000, 100, 42);
    CHECK(a == sample_rows(1000, 100, 42));
    CHECK(a != sample_rows(1000, 100, 43));
    CHECK(a.size() == 100);
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
    CHECK(sample_rows(5, 10, 1) == std::vector<std::size_t>{0, 1, 2, 3, 4});

    Files f;
    auto r = f.request();
    r.config.sample_cap = 50;
    const auto s = Session::create(r, "sampled");
    CHECK(s->snapshot()->explanations.size() == 50);
    CHECK(s->schema_view()["explained_rows"] == 50);
    const auto v = s->aggregate_view(CohortSlot::A);
    CHECK(v["not_sampled"].get<std::size_t>() + v["aggregate"]["explained"].get<std::size_t>() +
              v["aggregate"]["unexplained"]["count"].get<std::size_t>() ==
          v["cohort_size"].get<std::size_t>());
  }

  TEST_CASE("session store persists and restores") {
    Files f;
    fixtures::TempDir store_dir;
    std::string id;
    {
      SessionStore store(store_dir.path());
      id = store.create(f.request())->id();
      CHECK(std::filesystem::exists(store_dir / (id + ".json")));
      CHECK(error_of([&] { store.get("nope"); }) == ErrorKind::UnknownSession);
    }
    SessionStore again(store_dir.path());
    CHECK(again.load_all() == 1);
    CHECK(again.get(id)->id() == id);
  }
}
