#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cfcohort/aggregation.hpp"
#include "cfcohort/cohort.hpp"
#include "cfcohort/counterfactual.hpp"
#include "cfcohort/data_model.hpp"
#include "cfcohort/discretizer.hpp"
#include "cfcohort/error.hpp"
#include "cfcohort/http_service.hpp"
#include "cfcohort/kernels.hpp"
#include "cfcohort/predictor.hpp"
#include "cfcohort/session.hpp"
#include "cfcohort/synthetic.hpp"

using namespace cfcohort;

namespace {

struct DataArgs {
  std::string csv;
  std::string schema;

  void add(CLI::App* app) {
    app->add_option("--data", csv, "Dataset CSV")->required()->check(CLI::ExistingFile);
    app->add_option("--schema", schema, "Schema descriptor JSON")->required()->check(CLI::ExistingFile);
  }
  Dataset load() const { return load_csv(csv, SchemaSpec::load(schema)); }
};

struct ModelArgs {
  std::string coefficients;
  TrainOptions train;

  void add(CLI::App* app) {
    app->add_option("--model", coefficients, "Linear model coefficients JSON; trains a logistic model when omitted")
        ->check(CLI::ExistingFile);
    add_training(app);
  }
  void add_training(CLI::App* app) {
    app->add_option("--epochs", train.epochs, "Training epochs")->capture_default_str();
    app->add_option("--lr", train.learning_rate, "Learning rate")->capture_default_str();
    app->add_option("--seed", train.seed, "Initialisation seed")->capture_default_str();
    app->add_option("--l2", train.l2, "L2 penalty")->capture_default_str();
  }
  std::shared_ptr<LinearPredictor> build(const Dataset& d) const {
    if (!coefficients.empty()) return load_linear(std::filesystem::path(coefficients), d.schema());
    return train_logistic(d, train);
  }
};

double accuracy(const ConfusionCounts& c) {
  return c.total() ? static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total()) : 0.0;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  return out;
}

HttpService* g_service = nullptr;
PredictorServer* g_model_server = nullptr;

void handle_signal(int) {
  if (g_service) g_service->stop();
  if (g_model_server) g_model_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual cohort analysis for tabular binary classifiers"};
  app.require_subcommand(1);
  std::string isa;
  app.add_option("--isa", isa, "Force a kernel variant (scalar, avx2, neon)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a CSV against a schema and print a summary");
  DataArgs ingest_data;
  ingest_data.add(ingest);

  // train
  auto* train = app.add_subcommand("train", "Train the logistic baseline and write its coefficients");
  DataArgs train_data;
  ModelArgs train_model;
  std::string train_out;
  double train_threshold = 0.5;
  train_data.add(train);
  train_model.add_training(train);
  train->add_option("--out,-o", train_out, "Coefficients output path")->required();
  train->add_option("--threshold", train_threshold, "Decision threshold for the reported accuracy")->capture_default_str();

  // explain
  auto* explain = app.add_subcommand("explain", "Generate counterfactuals for every row as JSON lines");
  DataArgs explain_data;
  ModelArgs explain_model;
  SessionConfig explain_cfg;
  std::vector<std::string> explain_locked;
  std::optional<int> explain_steps;
  std::string explain_out;
  explain_data.add(explain);
  explain_model.add(explain);
  explain->add_option("--bins,-n", explain_cfg.bin_count, "Bins per continuous feature")->capture_default_str();
  explain->add_option("--max-features,-w", explain_cfg.algorithm.max_features, "Max changed features")
      ->capture_default_str();
  explain->add_option("--max-displacement,-l", explain_cfg.algorithm.max_displacement, "Max bins moved per feature")
      ->capture_default_str();
  explain->add_option("--lock", explain_locked, "Feature that may not change (repeatable)");
  explain->add_option("--max-steps", explain_steps, "Step cap (default w*l + categorical count)");
  explain->add_option("--threshold", explain_cfg.decision.threshold, "Decision threshold")->capture_default_str();
  explain->add_option("--threads", explain_cfg.threads, "Worker threads")->capture_default_str();
  explain->add_option("--sample", explain_cfg.sample_cap, "Explain a uniform sample of this many rows");
  explain->add_option("--sample-seed", explain_cfg.sample_seed, "Sampling seed")->capture_default_str();
  explain->add_option("--out,-o", explain_out, "Output path (stdout when omitted)");

  // summarize
  auto* summarize = app.add_subcommand("summarize", "Print cohort statistics and transition counts");
  DataArgs sum_data;
  ModelArgs sum_model;
  std::string sum_filter;
  std::vector<std::string> sum_cells;
  int sum_bins = kDefaultBinCount;
  double sum_threshold = 0.5;
  bool sum_transitions = false;
  sum_data.add(summarize);
  sum_model.add(summarize);
  summarize->add_option("--filter", sum_filter, "FilterSet JSON file")->check(CLI::ExistingFile);
  summarize->add_option("--cells", sum_cells, "Confusion cells to keep (TP FP TN FN)");
  summarize->add_option("--bins,-n", sum_bins, "Bins per continuous feature")->capture_default_str();
  summarize->add_option("--threshold", sum_threshold, "Decision threshold")->capture_default_str();
  summarize->add_flag("--transitions", sum_transitions, "Also generate counterfactuals and aggregate them");

  // serve
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  std::string serve_dir;
  serve->add_option("--host", serve_host)->capture_default_str();
  serve->add_option("--port", serve_port)->capture_default_str();
  serve->add_option("--session-dir", serve_dir, "Directory where sessions are saved and restored from");

  // serve-model
  auto* serve_model = app.add_subcommand("serve-model", "Expose a linear model over the remote prediction protocol");
  DataArgs sm_data;
  ModelArgs sm_model;
  std::string sm_host = "127.0.0.1";
  int sm_port = 8081;
  sm_data.add(serve_model);
  sm_model.add(serve_model);
  serve_model->add_option("--host", sm_host)->capture_default_str();
  serve_model->add_option("--port", sm_port)->capture_default_str();

  // generate
  auto* generate = app.add_subcommand("generate", "Write a synthetic demo dataset and its schema");
  std::string gen_kind = "credit";
  std::string gen_csv, gen_schema;
  std::optional<std::size_t> gen_rows;
  std::optional<std::uint64_t> gen_seed;
  generate->add_option("kind", gen_kind, "credit or heart")->check(CLI::IsMember({"credit", "heart"}));
  generate->add_option("--csv", gen_csv)->required();
  generate->add_option("--schema", gen_schema)->required();
  generate->add_option("--rows", gen_rows);
  generate->add_option("--seed", gen_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (!isa.empty()) {
      if (isa == "scalar") kernels::set_active(kernels::Isa::Scalar);
      else if (isa == "avx2") kernels::set_active(kernels::Isa::Avx2);
      else if (isa == "neon") kernels::set_active(kernels::Isa::Neon);
      else throw Error(ErrorKind::InvalidArgument, "unknown ISA '" + isa + "'");
    }

    if (*ingest) {
      const auto d = ingest_data.load();
      const auto parts = split_feature_kinds(d);
      std::size_t positives = 0;
      for (auto y : d.labels()) positives += y;
      nlohmann::json features = nlohmann::json::array();
      for (const auto& f : d.schema()) {
        nlohmann::json jf{{"name", f.name}, {"kind", to_string(f.kind)}};
        if (f.is_categorical()) jf["categories"] = f.categories;
        features.push_back(jf);
      }
      std::cout << nlohmann::json{{"rows", d.num_rows()},
                                  {"features", features},
                                  {"continuous", parts.continuous.size()},
                                  {"categorical", parts.categorical.size()},
                                  {"positive", positives},
                                  {"negative", d.num_rows() - positives}}
                       .dump(2)
                << '\n';
    } else if (*train) {
      const auto d = train_data.load();
      const auto model = train_logistic(d, train_model.train);
      model->save(train_out);
      DecisionConfig decision{train_threshold};
      decision.validate();
      const auto cache = PredictionCache::build(d, *model, decision);
      const auto counts = confusion_matrix(cache);
      std::cout << nlohmann::json{{"training_accuracy", accuracy(counts)}, {"confusion", counts.to_json()}}.dump(2)
                << '\n';
    } else if (*explain) {
      const auto d = explain_data.load();
      explain_cfg.algorithm.max_steps = explain_steps;
      for (const auto& name : explain_locked) {
        auto f = d.feature_index(name);
        if (!f) throw Error(ErrorKind::MissingColumn, "unknown feature '" + name + "' in --lock");
        explain_cfg.algorithm.locked_features.push_back(*f);
      }
      std::sort(explain_cfg.algorithm.locked_features.begin(), explain_cfg.algorithm.locked_features.end());
      explain_cfg.algorithm.validate(d.num_features());
      explain_cfg.decision.validate();
      const auto model = explain_model.build(d);
      const auto scheme = fit_discretizer(d, explain_cfg.bin_count);
      const auto cache = PredictionCache::build(d, *model, explain_cfg.decision);
      const auto rows = explain_cfg.sample_cap ? sample_rows(d.num_rows(), *explain_cfg.sample_cap, explain_cfg.sample_seed)
                                               : sample_rows(d.num_rows(), d.num_rows(), 0);
      CounterfactualEngine engine(*model, scheme, explain_cfg.algorithm, explain_cfg.decision);
      const auto results = engine.explain_batch(d, rows, &cache, explain_cfg.threads);
      if (explain_out.empty()) {
        write_jsonl(std::cout, results, scheme);
      } else {
        auto out = open_out(explain_out);
        write_jsonl(out, results, scheme);
      }
      const auto ok = std::count_if(results.begin(), results.end(), [](const auto& e) { return e.success; });
      std::cerr << "explained " << results.size() << " rows, " << ok << " flipped, fingerprint "
                << engine.fingerprint() << '\n';
    } else if (*summarize) {
      const auto d = sum_data.load();
      const auto model = sum_model.build(d);
      DecisionConfig decision{sum_threshold};
      decision.validate();
      const auto cache = PredictionCache::build(d, *model, decision);
      FilterSet filter;
      if (!sum_filter.empty()) {
        std::ifstream in(sum_filter);
        filter = FilterSet::from_json(nlohmann::json::parse(in), d);
      }
      if (!sum_cells.empty()) {
        filter.cells.clear();
        for (const auto& c : sum_cells) filter.cells.push_back(parse_confusion_cell(c));
      }
      filter.validate(d);
      const auto scheme = fit_discretizer(d, sum_bins);
      const auto rows = apply_filterset(d, cache, filter);
      nlohmann::json out{{"filter", filter.to_json(d)},
                         {"confusion", confusion_matrix(cache).to_json()},
                         {"summary", summarize_cohort(rows, d, scheme).to_json(scheme)}};
      if (sum_transitions) {
        CounterfactualEngine engine(*model, scheme, AlgorithmConfig{}, decision);
        const auto expl = engine.explain_batch(d, rows, &cache, 1);
        out["transitions"] = aggregate_transitions(expl, d.num_features()).to_json(scheme);
      }
      std::cout << out.dump(2) << '\n';
    } else if (*serve) {
      auto store = std::make_shared<SessionStore>(serve_dir.empty() ? std::nullopt
                                                                    : std::optional<std::filesystem::path>(serve_dir));
      const auto restored = store->load_all();
      if (restored) std::cerr << "restored " << restored << " session(s)\n";
      HttpService service(store, std::filesystem::current_path());
      g_service = &service;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cerr << "listening on http://" << serve_host << ':' << serve_port << '\n';
      service.run(serve_host, serve_port);
      g_service = nullptr;
    } else if (*serve_model) {
      const auto d = sm_data.load();
      PredictorServer server(sm_model.build(d), d.schema());
      g_model_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cerr << "serving model on http://" << sm_host << ':' << sm_port << "/predict\n";
      server.run(sm_host, sm_port);
      g_model_server = nullptr;
    } else if (*generate) {
      const auto g = gen_kind == "credit" ? synthetic::credit_risk(gen_rows.value_or(10459), gen_seed.value_or(7))
                                          : synthetic::heart(gen_rows.value_or(303), gen_seed.value_or(11));
      g.write(gen_csv, gen_schema);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_validation_error(e.kind()) ? 1 : 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
