#include "cfcohort/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "cfcohort/error.hpp"
#include "cfcohort/kernels.hpp"

namespace cfcohort {

std::vector<double> Predictor::predict_batch(std::span<const double> rows) const {
  const std::size_t d = num_features();
  if (d == 0 || rows.size() % d != 0) throw Error(ErrorKind::ArityMismatch, "row buffer is not a multiple of arity");
  std::vector<double> out(rows.size() / d);
  predict_batch(rows, out);
  return out;
}

double Predictor::predict_proba(std::span<const double> instance) const {
  if (instance.size() != num_features())
    throw Error(ErrorKind::ArityMismatch, "instance has " + std::to_string(instance.size()) + " values, predictor expects " +
                                              std::to_string(num_features()));
  double p = 0.0;
  predict_batch(instance, std::span<double>(&p, 1));
  return p;
}

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// OneHotEncoder

OneHotEncoder::OneHotEncoder(std::vector<FeatureSchema> schema) : schema_(std::move(schema)) {
  for (const auto& f : schema_) {
    const std::size_t width = f.is_categorical() ? f.categories.size() : 1;
    offset_.push_back(width_);
    span_.push_back(width);
    width_ += width;
    if (f.is_categorical()) identity_ = false;
  }
}

std::vector<std::string> OneHotEncoder::encoded_names() const {
  std::vector<std::string> names;
  for (const auto& f : schema_) {
    if (!f.is_categorical()) {
      names.push_back(f.name);
    } else {
      for (const auto& c : f.categories) names.push_back(f.name + "=" + c);
    }
  }
  return names;
}

void OneHotEncoder::encode(std::span<const double> raw_row, std::span<double> out) const {
  for (std::size_t f = 0; f < schema_.size(); ++f) {
    if (!schema_[f].is_categorical()) {
      out[offset_[f]] = raw_row[f];
      continue;
    }
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(offset_[f]), span_[f], 0.0);
    const auto cat = static_cast<std::size_t>(raw_row[f]);
    if (cat >= span_[f]) throw Error(ErrorKind::UnknownCategory, "category ordinal out of range for '" + schema_[f].name + "'");
    out[offset_[f] + cat] = 1.0;
  }
}

std::vector<double> OneHotEncoder::encode_rows(std::span<const double> raw_rows) const {
  const std::size_t n = raw_rows.size() / raw_width();
  std::vector<double> out(n * width_);
  for (std::size_t r = 0; r < n; ++r)
    encode(raw_rows.subspan(r * raw_width(), raw_width()), std::span<double>(out).subspan(r * width_, width_));
  return out;
}

// ---------------------------------------------------------------------------
// LinearPredictor

LinearPredictor::LinearPredictor(std::vector<FeatureSchema> schema, double intercept, std::vector<double> weights,
                                 std::string name)
    : encoder_(std::move(schema)), intercept_(intercept), weights_(std::move(weights)), name_(std::move(name)) {
  if (weights_.size() != encoder_.encoded_width())
    throw Error(ErrorKind::ArityMismatch, "expected " + std::to_string(encoder_.encoded_width()) +
                                              " weights for the schema, got " + std::to_string(weights_.size()));
  if (!std::isfinite(intercept_) || !std::all_of(weights_.begin(), weights_.end(), [](double w) { return std::isfinite(w); }))
    throw Error(ErrorKind::InvalidArgument, "coefficients must be finite");
}

void LinearPredictor::predict_batch(std::span<const double> rows, std::span<double> out) const {
  const std::size_t d = encoder_.raw_width();
  if (rows.size() != out.size() * d) throw Error(ErrorKind::ArityMismatch, "row buffer does not match output size");
  if (encoder_.is_identity()) {
    kernels::affine_rows(rows, d, weights_, intercept_, out);
  } else {
    const auto encoded = encoder_.encode_rows(rows);
    kernels::affine_rows(encoded, encoder_.encoded_width(), weights_, intercept_, out);
  }
  for (double& z : out) z = logistic(z);
}

nlohmann::json LinearPredictor::coefficients_json() const {
  return nlohmann::json{{"intercept", intercept_}, {"weights", weights_}, {"feature_names", encoder_.encoded_names()}};
}

nlohmann::json LinearPredictor::describe() const {
  auto j = coefficients_json();
  j["type"] = "linear";
  j["name"] = name_;
  return j;
}

void LinearPredictor::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << coefficients_json().dump(2) << '\n';
}

std::shared_ptr<LinearPredictor> load_linear(const nlohmann::json& coefficients, std::vector<FeatureSchema> schema) {
  double intercept = 0.0;
  std::vector<double> weights;
  try {
    intercept = coefficients.at("intercept").get<double>();
    weights = coefficients.at("weights").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSchema, std::string("coefficient file: ") + e.what());
  }
  return std::make_shared<LinearPredictor>(std::move(schema), intercept, std::move(weights));
}

std::shared_ptr<LinearPredictor> load_linear(const std::filesystem::path& path, std::vector<FeatureSchema> schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open coefficient file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSchema, path.string() + ": " + e.what());
  }
  return load_linear(j, std::move(schema));
}

std::shared_ptr<LinearPredictor> train_logistic(const Dataset& dataset, const TrainOptions& options) {
  if (options.epochs < 0) throw Error(ErrorKind::InvalidArgument, "epochs must be non-negative");
  if (!(options.learning_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be positive");
  const auto labels = dataset.labels();
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (!has_pos || !has_neg) throw Error(ErrorKind::SingleClassDataset, "training needs both classes present");

  OneHotEncoder encoder(dataset.schema());
  const std::size_t n = dataset.num_rows();
  const std::size_t d = encoder.encoded_width();
  std::vector<double> x = encoder.encode_rows(dataset.values());

  // standardise columns; constant columns keep scale 1
  std::vector<double> center(d, 0.0), scale(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += x[r * d + j];
    center[j] = s / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double dv = x[r * d + j] - center[j];
      ss += dv * dv;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd > 0.0) scale[j] = sd;
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) x[r * d + j] = (x[r * d + j] - center[j]) / scale[j];

  // small deterministic initialisation from the seed
  std::mt19937_64 rng(options.seed);
  std::vector<double> w(d);
  for (auto& wj : w) wj = (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5) * 0.02;
  double b = 0.0;

  std::vector<double> z(n), grad(d);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    kernels::affine_rows(x, d, w, b, z);
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double residual = logistic(z[r]) - static_cast<double>(labels[r]);
      grad_b += residual;
      kernels::axpy(residual, std::span<const double>(x).subspan(r * d, d), grad);
    }
    for (std::size_t j = 0; j < d; ++j) w[j] -= options.learning_rate * (grad[j] * inv_n + options.l2 * w[j]);
    b -= options.learning_rate * grad_b * inv_n;
  }

  // fold standardisation back into raw-space coefficients
  std::vector<double> raw_w(d);
  double raw_b = b;
  for (std::size_t j = 0; j < d; ++j) {
    raw_w[j] = w[j] / scale[j];
    raw_b -= raw_w[j] * center[j];
  }
  return std::make_shared<LinearPredictor>(dataset.schema(), raw_b, std::move(raw_w), "logistic");
}

// ---------------------------------------------------------------------------
// Decisions

void DecisionConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw Error(ErrorKind::InvalidArgument, "decision threshold must lie in (0, 1)");
}

std::string_view to_string(ConfusionCell cell) {
  switch (cell) {
    case ConfusionCell::TP: return "TP";
    case ConfusionCell::FP: return "FP";
    case ConfusionCell::TN: return "TN";
    case ConfusionCell::FN: return "FN";
  }
  return "?";
}

ConfusionCell parse_confusion_cell(std::string_view s) {
  for (auto c : {ConfusionCell::TP, ConfusionCell::FP, ConfusionCell::TN, ConfusionCell::FN})
    if (s == to_string(c)) return c;
  throw Error(ErrorKind::InvalidArgument, "unknown confusion cell '" + std::string(s) + "'");
}

ConfusionCell confusion_cell(int decision, int label) {
  if (decision == 1) return label == 1 ? ConfusionCell::TP : ConfusionCell::FP;
  return label == 1 ? ConfusionCell::FN : ConfusionCell::TN;
}

nlohmann::json ConfusionCounts::to_json() const {
  return nlohmann::json{{"TP", tp}, {"FP", fp}, {"TN", tn}, {"FN", fn}};
}

PredictionCache::PredictionCache(std::vector<double> probabilities, std::span<const int> labels,
                                 DecisionConfig decision)
    : probabilities_(std::move(probabilities)), decision_(decision) {
  decision_.validate();
  if (probabilities_.size() != labels.size())
    throw Error(ErrorKind::ArityMismatch, "probabilities and labels differ in length");
  decisions_.resize(probabilities_.size());
  cells_.resize(probabilities_.size());
  for (std::size_t r = 0; r < probabilities_.size(); ++r) {
    const double p = probabilities_[r];
    if (!(p >= 0.0 && p <= 1.0))
      throw Error(ErrorKind::OutOfRangeProbability, "probability " + format_number(p) + " outside [0, 1]");
    decisions_[r] = decision_.decide(p);
    cells_[r] = confusion_cell(decisions_[r], labels[r]);
  }
}

PredictionCache PredictionCache::build(const Dataset& dataset, const Predictor& predictor, DecisionConfig decision) {
  if (predictor.num_features() != dataset.num_features())
    throw Error(ErrorKind::ArityMismatch, "predictor arity does not match dataset schema");
  return PredictionCache(predictor.predict_batch(dataset.values()), dataset.labels(), decision);
}

ConfusionCounts confusion_matrix(const PredictionCache& cache) {
  ConfusionCounts c;
  for (std::size_t r = 0; r < cache.size(); ++r) {
    switch (cache.cell(r)) {
      case ConfusionCell::TP: ++c.tp; break;
      case ConfusionCell::FP: ++c.fp; break;
      case ConfusionCell::TN: ++c.tn; break;
      case ConfusionCell::FN: ++c.fn; break;
    }
  }
  return c;
}

}  // namespace cfcohort
