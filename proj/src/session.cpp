#include "cfcohort/session.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>

#include "cfcohort/error.hpp"
#include "cfcohort/hashing.hpp"

namespace cfcohort {

namespace {

constexpr const char* kFormat = "cfcohort-session/1";

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

template <typename F>
auto attributed(std::string_view source, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw e.with_context(source);
  }
}

std::vector<std::size_t> parse_feature_list(const nlohmann::json& j, const Dataset* dataset) {
  std::vector<std::size_t> out;
  for (const auto& item : j) {
    if (item.is_string()) {
      if (!dataset) throw Error(ErrorKind::InvalidArgument, "feature names need a dataset to resolve");
      auto f = dataset->feature_index(item.get<std::string>());
      if (!f) throw Error(ErrorKind::MissingColumn, "unknown feature '" + item.get<std::string>() + "'");
      out.push_back(*f);
    } else {
      out.push_back(item.get<std::size_t>());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t range) {
  // rejection sampling keeps the draw uniform and implementation independent
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % range;
}

}  // namespace

std::vector<std::size_t> sample_rows(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (count >= n) return idx;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + bounded(rng, n - i)]);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// ---------------------------------------------------------------------------
// specs

nlohmann::json ModelSpec::to_json() const {
  nlohmann::json j;
  switch (type) {
    case Type::Linear:
      j["type"] = "linear";
      if (path) j["path"] = path->string();
      break;
    case Type::Logistic:
      j["type"] = "logistic";
      j["epochs"] = train.epochs;
      j["learning_rate"] = train.learning_rate;
      j["seed"] = train.seed;
      j["l2"] = train.l2;
      break;
    case Type::Remote:
      j["type"] = "remote";
      j["endpoint"] = endpoint;
      break;
  }
  if (coefficients) j["coefficients"] = *coefficients;
  return j;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ModelSpec m;
  try {
    const auto type = j.value("type", std::string("logistic"));
    if (type == "linear") {
      m.type = Type::Linear;
      if (j.contains("path")) m.path = resolve(j.at("path").get<std::string>(), base_dir);
      if (!j.contains("path") && !j.contains("coefficients"))
        throw Error(ErrorKind::InvalidArgument, "linear model needs 'path' or 'coefficients'");
    } else if (type == "logistic") {
      m.type = Type::Logistic;
      m.train.epochs = j.value("epochs", m.train.epochs);
      m.train.learning_rate = j.value("learning_rate", m.train.learning_rate);
      m.train.seed = j.value("seed", m.train.seed);
      m.train.l2 = j.value("l2", m.train.l2);
    } else if (type == "remote") {
      m.type = Type::Remote;
      m.endpoint = j.at("endpoint").get<std::string>();
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown model type '" + type + "'");
    }
    if (j.contains("coefficients") && m.type != Type::Remote) m.coefficients = j.at("coefficients");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("model spec: ") + e.what());
  }
  return m;
}

nlohmann::json SessionConfig::to_json() const {
  nlohmann::json j = algorithm.to_json();
  j["n"] = bin_count;
  j["threshold"] = decision.threshold;
  j["sample_cap"] = sample_cap ? nlohmann::json(*sample_cap) : nlohmann::json(nullptr);
  j["sample_seed"] = sample_seed;
  j["threads"] = threads;
  return j;
}

SessionConfig SessionConfig::from_json(const nlohmann::json& j, const Dataset* dataset) {
  SessionConfig c;
  try {
    c.bin_count = j.value("n", c.bin_count);
    c.algorithm.max_features = j.value("w", c.algorithm.max_features);
    c.algorithm.max_displacement = j.value("l", c.algorithm.max_displacement);
    if (j.contains("locked_features")) c.algorithm.locked_features = parse_feature_list(j.at("locked_features"), dataset);
    if (j.contains("max_steps") && !j.at("max_steps").is_null()) c.algorithm.max_steps = j.at("max_steps").get<int>();
    c.decision.threshold = j.value("threshold", c.decision.threshold);
    if (j.contains("sample_cap") && !j.at("sample_cap").is_null()) c.sample_cap = j.at("sample_cap").get<std::size_t>();
    c.sample_seed = j.value("sample_seed", c.sample_seed);
    c.threads = j.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("config: ") + e.what());
  }
  c.decision.validate();
  if (c.bin_count < 4) throw Error(ErrorKind::InvalidArgument, "n must be at least 4");
  return c;
}

CreateRequest CreateRequest::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  CreateRequest r;
  try {
    r.dataset_path = resolve(j.at("dataset").get<std::string>(), base_dir);
    const auto& schema = j.at("schema");
    r.schema = schema.is_string() ? SchemaSpec::load(resolve(schema.get<std::string>(), base_dir))
                                  : SchemaSpec::from_json(schema);
    r.model = ModelSpec::from_json(j.value("model", nlohmann::json::object()), base_dir);
    // feature names in the config are resolved once the dataset is loaded
    r.config = SessionConfig::from_json(j.value("config", nlohmann::json::object()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("create request: ") + e.what());
  }
  return r;
}

ConfigUpdate ConfigUpdate::from_json(const nlohmann::json& j, const Dataset& dataset) {
  ConfigUpdate u;
  try {
    if (j.contains("n")) u.bin_count = j.at("n").get<int>();
    if (j.contains("w")) u.max_features = j.at("w").get<int>();
    if (j.contains("l")) u.max_displacement = j.at("l").get<int>();
    if (j.contains("locked_features")) u.locked_features = parse_feature_list(j.at("locked_features"), &dataset);
    if (j.contains("max_steps"))
      u.max_steps = j.at("max_steps").is_null() ? std::optional<int>{} : std::optional<int>{j.at("max_steps").get<int>()};
    if (j.contains("threshold"))
      throw Error(ErrorKind::InvalidArgument, "the decision threshold is fixed for a session");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("config update: ") + e.what());
  }
  return u;
}

nlohmann::json RegenerationReport::to_json() const {
  return nlohmann::json{{"regenerated", regenerated},
                        {"old_fingerprint", old_fingerprint},
                        {"fingerprint", new_fingerprint},
                        {"old_success_rate", old_success_rate},
                        {"success_rate", new_success_rate},
                        {"success_rate_delta", success_rate_delta()}};
}

CohortSlot parse_cohort_slot(std::string_view s) {
  if (s == "A" || s == "a") return CohortSlot::A;
  if (s == "B" || s == "b") return CohortSlot::B;
  throw Error(ErrorKind::InvalidArgument, "cohort must be A or B, got '" + std::string(s) + "'");
}

std::string_view to_string(CohortSlot slot) { return slot == CohortSlot::A ? "A" : "B"; }

// ---------------------------------------------------------------------------
// SessionSnapshot

const CounterfactualExplanation* SessionSnapshot::find(std::size_t row) const {
  if (row >= explanation_of_row.size() || explanation_of_row[row] < 0) return nullptr;
  return &explanations[static_cast<std::size_t>(explanation_of_row[row])];
}

double SessionSnapshot::success_rate() const {
  if (explanations.empty()) return 0.0;
  const auto ok = std::count_if(explanations.begin(), explanations.end(), [](const auto& e) { return e.success; });
  return static_cast<double>(ok) / static_cast<double>(explanations.size());
}

std::vector<CounterfactualExplanation> SessionSnapshot::select(std::span<const std::size_t> rows) const {
  std::vector<CounterfactualExplanation> out;
  for (auto r : rows)
    if (const auto* e = find(r)) out.push_back(*e);
  return out;
}

// ---------------------------------------------------------------------------
// Session

std::vector<std::size_t> Session::rows_to_explain() const {
  const std::size_t n = dataset_->num_rows();
  if (config_.sample_cap && *config_.sample_cap < n) return sample_rows(n, *config_.sample_cap, config_.sample_seed);
  return sample_rows(n, n, 0);
}

std::shared_ptr<const SessionSnapshot> Session::build_snapshot(int bin_count, const AlgorithmConfig& algorithm) const {
  auto snap = std::make_shared<SessionSnapshot>();
  snap->bin_count = bin_count;
  snap->algorithm = algorithm;
  snap->scheme = attributed("discretizer", [&] { return fit_discretizer(*dataset_, bin_count); });
  CounterfactualEngine engine(*predictor_, snap->scheme, algorithm, config_.decision);
  snap->fingerprint = engine.fingerprint();
  snap->explained_rows = rows_to_explain();
  snap->explanations = attributed("counterfactual-engine", [&] {
    return engine.explain_batch(*dataset_, snap->explained_rows, &cache_, config_.threads);
  });
  snap->explanation_of_row.assign(dataset_->num_rows(), -1);
  for (std::size_t i = 0; i < snap->explained_rows.size(); ++i)
    snap->explanation_of_row[snap->explained_rows[i]] = static_cast<std::ptrdiff_t>(i);
  return snap;
}

std::shared_ptr<Session> Session::create(const CreateRequest& request, std::string id) {
  std::shared_ptr<Session> s(new Session());
  s->id_ = std::move(id);
  s->dataset_path_ = std::filesystem::absolute(request.dataset_path).lexically_normal();
  s->schema_spec_ = request.schema;
  s->model_spec_ = request.model;
  s->config_ = request.config;

  s->dataset_sha256_ = attributed("dataset", [&] { return sha256_file_hex(s->dataset_path_); });
  s->dataset_ = attributed("dataset", [&] {
    return std::make_shared<const Dataset>(load_csv(s->dataset_path_, s->schema_spec_));
  });
  const auto& dataset = *s->dataset_;
  attributed("config", [&] {
    s->config_.algorithm.validate(dataset.num_features());
    return 0;
  });

  s->predictor_ = attributed("predictor", [&]() -> std::shared_ptr<const Predictor> {
    auto& spec = s->model_spec_;
    switch (spec.type) {
      case ModelSpec::Type::Remote:
        return std::make_shared<RemotePredictor>(spec.endpoint, dataset.schema());
      case ModelSpec::Type::Linear: {
        auto model = spec.coefficients ? load_linear(*spec.coefficients, dataset.schema())
                                       : load_linear(*spec.path, dataset.schema());
        spec.coefficients = model->coefficients_json();
        return model;
      }
      case ModelSpec::Type::Logistic: {
        if (spec.coefficients) return load_linear(*spec.coefficients, dataset.schema());
        auto model = train_logistic(dataset, spec.train);
        spec.coefficients = model->coefficients_json();
        return model;
      }
    }
    throw Error(ErrorKind::InvalidArgument, "unknown model type");
  });
  s->cache_ = attributed("predictor", [&] { return PredictionCache::build(dataset, *s->predictor_, s->config_.decision); });
  s->snapshot_ = s->build_snapshot(s->config_.bin_count, s->config_.algorithm);
  s->filters_[0] = FilterSet::predicted_positive();
  s->filters_[1] = FilterSet::predicted_negative();
  return s;
}

std::shared_ptr<Session> Session::load(const nlohmann::json& persisted) {
  try {
    if (persisted.value("format", std::string()) != kFormat)
      throw Error(ErrorKind::InvalidSchema, "not a session document");
    CreateRequest request;
    request.dataset_path = persisted.at("dataset").at("path").get<std::string>();
    request.schema = SchemaSpec::from_json(persisted.at("schema"));
    request.model = ModelSpec::from_json(persisted.at("model"));
    request.config = SessionConfig::from_json(persisted.at("config"));
    const auto expected_hash = persisted.at("dataset").at("sha256").get<std::string>();
    const auto actual_hash = sha256_file_hex(request.dataset_path);
    if (actual_hash != expected_hash)
      throw Error(ErrorKind::InvalidSchema, "dataset " + request.dataset_path.string() + " changed since the session was saved");
    auto s = create(request, persisted.at("id").get<std::string>());
    s->filters_[0] = FilterSet::from_json(persisted.at("filters").at("A"), s->dataset());
    s->filters_[1] = FilterSet::from_json(persisted.at("filters").at("B"), s->dataset());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSchema, std::string("session document: ") + e.what());
  }
}

std::shared_ptr<Session> Session::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSchema, path.string() + ": " + e.what());
  }
  return load(j);
}

std::shared_ptr<const SessionSnapshot> Session::snapshot() const {
  std::lock_guard lock(mutex_);
  return snapshot_;
}

FilterSet Session::filter(CohortSlot slot) const {
  std::lock_guard lock(mutex_);
  return filters_[static_cast<int>(slot)];
}

void Session::set_filter(CohortSlot slot, FilterSet filter) {
  filter.validate(*dataset_);
  std::lock_guard lock(mutex_);
  filters_[static_cast<int>(slot)] = std::move(filter);
}

RegenerationReport Session::update_config(const ConfigUpdate& update) {
  std::lock_guard writer(writer_mutex_);
  const auto current = snapshot();

  AlgorithmConfig algorithm = current->algorithm;
  int bin_count = current->bin_count;
  if (update.bin_count) bin_count = *update.bin_count;
  if (update.max_features) algorithm.max_features = *update.max_features;
  if (update.max_displacement) algorithm.max_displacement = *update.max_displacement;
  if (update.locked_features) algorithm.locked_features = *update.locked_features;
  if (update.max_steps) algorithm.max_steps = *update.max_steps;
  if (bin_count < 4) throw Error(ErrorKind::InvalidArgument, "n must be at least 4");
  algorithm.validate(dataset_->num_features());

  RegenerationReport report;
  report.old_fingerprint = current->fingerprint;
  report.old_success_rate = current->success_rate();
  if (bin_count == current->bin_count && algorithm == current->algorithm) {
    report.new_fingerprint = current->fingerprint;
    report.new_success_rate = report.old_success_rate;
    return report;
  }

  auto next = build_snapshot(bin_count, algorithm);
  report.regenerated = true;
  report.new_fingerprint = next->fingerprint;
  report.new_success_rate = next->success_rate();
  {
    std::lock_guard lock(mutex_);
    snapshot_ = std::move(next);
    config_.bin_count = bin_count;
    config_.algorithm = algorithm;
  }
  return report;
}

nlohmann::json Session::persist() const {
  std::lock_guard lock(mutex_);
  nlohmann::json j;
  j["format"] = kFormat;
  j["id"] = id_;
  j["dataset"] = {{"path", dataset_path_.string()}, {"sha256", dataset_sha256_}};
  j["schema"] = schema_spec_.to_json();
  j["model"] = model_spec_.to_json();
  j["config"] = config_.to_json();
  j["filters"] = {{"A", filters_[0].to_json(*dataset_)}, {"B", filters_[1].to_json(*dataset_)}};
  j["fingerprint"] = snapshot_->fingerprint;
  return j;
}

void Session::save(const std::filesystem::path& path) const {
  const auto text = persist().dump(2);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp);
    out << text << '\n';
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// views

nlohmann::json Session::schema_view() const {
  const auto snap = snapshot();
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : dataset_->schema()) {
    nlohmann::json jf{{"name", f.name}, {"kind", to_string(f.kind)}};
    if (f.is_categorical()) jf["categories"] = f.categories;
    if (f.display_unit) jf["display_unit"] = *f.display_unit;
    features.push_back(std::move(jf));
  }
  const auto parts = split_feature_kinds(*dataset_);
  return nlohmann::json{{"session_id", id_},
                        {"fingerprint", snap->fingerprint},
                        {"features", features},
                        {"continuous", parts.continuous},
                        {"categorical", parts.categorical},
                        {"scheme", snap->scheme.to_json()},
                        {"config", [&] {
                           std::lock_guard lock(mutex_);
                           return config_.to_json();
                         }()},
                        {"rows", dataset_->num_rows()},
                        {"explained_rows", snap->explained_rows.size()},
                        {"positive_label", dataset_->positive_label_name()},
                        {"negative_label", dataset_->negative_label_name()},
                        {"confusion", confusion_matrix(cache_).to_json()}};
}

nlohmann::json Session::cohort_view(CohortSlot slot) const {
  const auto snap = snapshot();
  const auto f = filter(slot);
  const auto rows = apply_filterset(*dataset_, cache_, f);
  return nlohmann::json{{"fingerprint", snap->fingerprint},
                        {"cohort", to_string(slot)},
                        {"filter", f.to_json(*dataset_)},
                        {"row_ids", rows},
                        {"summary", summarize_cohort(rows, *dataset_, snap->scheme).to_json(snap->scheme)}};
}

nlohmann::json Session::compare_view(SortKey key) const {
  const auto snap = snapshot();
  const auto fa = filter(CohortSlot::A);
  const auto fb = filter(CohortSlot::B);
  const auto rows_a = apply_filterset(*dataset_, cache_, fa);
  const auto rows_b = apply_filterset(*dataset_, cache_, fb);
  const auto sa = summarize_cohort(rows_a, *dataset_, snap->scheme);
  const auto sb = summarize_cohort(rows_b, *dataset_, snap->scheme);
  std::vector<TransitionAggregate> aggs;
  aggs.push_back(aggregate_transitions(snap->select(rows_a), dataset_->num_features()));
  aggs.push_back(aggregate_transitions(snap->select(rows_b), dataset_->num_features()));
  const auto order = sort_features(sa, sb, aggs, key, snap->scheme);
  std::vector<std::string> names;
  for (auto f : order) names.push_back(dataset_->feature(f).name);
  return nlohmann::json{{"fingerprint", snap->fingerprint},
                        {"sort", to_string(key)},
                        {"order", order},
                        {"order_names", names},
                        {"median_differences", median_differences(sa, sb, snap->scheme)},
                        {"A", {{"hidden", fa.hidden}, {"summary", sa.to_json(snap->scheme)}}},
                        {"B", {{"hidden", fb.hidden}, {"summary", sb.to_json(snap->scheme)}}}};
}

nlohmann::json Session::aggregate_view(CohortSlot slot) const {
  const auto snap = snapshot();
  const auto rows = apply_filterset(*dataset_, cache_, filter(slot));
  const auto explanations = snap->select(rows);
  const auto agg = aggregate_transitions(explanations, dataset_->num_features());
  auto j = agg.to_json(snap->scheme);
  j["fingerprint"] = snap->fingerprint;
  return nlohmann::json{{"fingerprint", snap->fingerprint},
                        {"cohort", to_string(slot)},
                        {"cohort_size", rows.size()},
                        {"not_sampled", rows.size() - explanations.size()},
                        {"aggregate", j},
                        {"unexplained", j["unexplained"]},
                        {"opposition", to_json(opposition_report(agg, agg), snap->scheme)}};
}

nlohmann::json Session::explanation_view(std::size_t row) const {
  const auto snap = snapshot();
  if (row >= dataset_->num_rows()) throw Error(ErrorKind::UnknownRow, "row " + std::to_string(row) + " does not exist");
  const auto* e = snap->find(row);
  if (!e) throw Error(ErrorKind::UnknownRow, "row " + std::to_string(row) + " was not sampled for explanation");
  return nlohmann::json{{"fingerprint", snap->fingerprint}, {"explanation", to_json(*e, snap->scheme)}};
}

nlohmann::json Session::slice_view(CohortSlot slot, std::size_t feature, std::size_t bin) const {
  const auto snap = snapshot();
  const auto rows = apply_filterset(*dataset_, cache_, filter(slot));
  const auto slice = bin_slice(rows, *dataset_, snap->scheme, feature, bin);
  nlohmann::json range = nullptr;
  if (snap->scheme.is_binnable(feature)) {
    const auto [lo, hi] = snap->scheme.bin_range(bin, feature);
    range = {std::isfinite(lo) ? nlohmann::json(lo) : nlohmann::json(nullptr),
             std::isfinite(hi) ? nlohmann::json(hi) : nlohmann::json(nullptr)};
  }
  nlohmann::json out_rows = nlohmann::json::array();
  for (const auto& inst : slice)
    out_rows.push_back({{"row_id", inst.row_id}, {"values", encode_instances(dataset_->schema(), inst.values)[0]}});
  return nlohmann::json{{"fingerprint", snap->fingerprint},
                        {"cohort", to_string(slot)},
                        {"feature", feature},
                        {"bin", bin},
                        {"range", range},
                        {"rows", out_rows}};
}

nlohmann::json Session::confusion_view() const {
  return nlohmann::json{{"fingerprint", snapshot()->fingerprint}, {"confusion", confusion_matrix(cache_).to_json()}};
}

// ---------------------------------------------------------------------------
// SessionStore

SessionStore::SessionStore(std::optional<std::filesystem::path> session_dir) : dir_(std::move(session_dir)) {
  if (dir_) std::filesystem::create_directories(*dir_);
}

std::shared_ptr<Session> SessionStore::create(const CreateRequest& request) {
  std::string id;
  {
    std::lock_guard lock(mutex_);
    const nlohmann::json canonical{{"dataset", request.dataset_path.string()},
                                   {"schema", request.schema.to_json()},
                                   {"model", request.model.to_json()},
                                   {"config", request.config.to_json()}};
    do {
      id = "s" + sha256_hex(canonical.dump() + "#" + std::to_string(counter_++)).substr(0, 12);
    } while (sessions_.contains(id));
  }
  auto session = Session::create(request, id);
  {
    std::lock_guard lock(mutex_);
    sessions_[id] = session;
  }
  persist(*session);
  return session;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorKind::UnknownSession, "no session '" + id + "'");
  return it->second;
}

std::vector<std::string> SessionStore::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

void SessionStore::persist(const Session& session) const {
  if (!dir_) return;
  session.save(*dir_ / (session.id() + ".json"));
}

std::size_t SessionStore::load_all() {
  if (!dir_) return 0;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(*dir_))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::size_t loaded = 0;
  for (const auto& p : files) {
    auto s = Session::load_file(p);
    std::lock_guard lock(mutex_);
    sessions_[s->id()] = std::move(s);
    ++loaded;
  }
  return loaded;
}

}  // namespace cfcohort
