#include "cfcohort/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "cfcohort/error.hpp"

namespace cfcohort::synthetic {

double Rng::uniform() { return static_cast<double>(state_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = state_();
  } while (x >= limit);
  return x % n;
}

void GeneratedDataset::write(const std::filesystem::path& csv_path, const std::filesystem::path& schema_path) const {
  std::ofstream c(csv_path, std::ios::binary);
  if (!c) throw Error(ErrorKind::Io, "cannot write " + csv_path.string());
  c << csv;
  std::ofstream s(schema_path, std::ios::binary);
  if (!s) throw Error(ErrorKind::Io, "cannot write " + schema_path.string());
  s << schema.to_json().dump(2) << '\n';
}

namespace {

struct CreditFeature {
  const char* name;
  double mean, sd, loading, lo, hi;
  double no_data_rate;  // share of rows coded -8
};

// Loadings tie each column to the latent credit quality; positive means the
// column rises with good credit.
constexpr std::array<CreditFeature, 23> kCredit{{
    {"External Risk Estimate", 72, 10, 0.85, 33, 94, 0.0},
    {"Months Since Oldest Trade Open", 200, 95, 0.30, 2, 803, 0.02},
    {"Months Since Most Recent Trade Open", 9, 12, 0.05, 0, 383, 0.0},
    {"Average Months in File", 78, 33, 0.50, 4, 383, 0.0},
    {"Number Satisfactory Trades", 21, 11, 0.20, 0, 79, 0.0},
    {"Number Trades 60+ Ever", 0.6, 1.2, -0.35, 0, 19, 0.0},
    {"Number Trades 90+ Ever", 0.4, 1.0, -0.35, 0, 19, 0.0},
    {"Percent Trades Never Delinquent", 92, 9, 0.55, 0, 100, 0.0},
    {"Months Since Most Recent Delinquency", 22, 20, 0.30, 0, 83, 0.02},
    {"Max Delq/Public Records Last 12 Months", 5.8, 1.6, 0.45, 0, 9, 0.0},
    {"Max Delinquency Ever", 6.4, 1.8, 0.45, 2, 8, 0.0},
    {"Number of Total Trades", 23, 13, 0.15, 0, 104, 0.0},
    {"Number of Trades Open in Last 12 Months", 1.9, 1.8, -0.15, 0, 19, 0.0},
    {"Percent Installment Trades", 34, 17, -0.15, 0, 100, 0.0},
    {"Months Since Most Recent Inquiry excl 7 days", 2.5, 4.5, 0.35, 0, 24, 0.05},
    {"Number of Inquiries Last 6 Months", 1.5, 2.0, -0.35, 0, 66, 0.0},
    {"Number of Inquiries Last 6 Months excl 7 days", 1.4, 1.9, -0.35, 0, 66, 0.0},
    {"Net Fraction Revolving Burden", 35, 29, -0.60, 0, 232, 0.0},
    {"Net Fraction Installment Burden", 68, 24, -0.10, 0, 471, 0.34},
    {"Number Revolving Trades with Balance", 4.1, 3.0, -0.10, 0, 32, 0.016},
    {"Number Installment Trades with Balance", 2.5, 1.6, -0.05, 1, 23, 0.08},
    {"Number Bank/Natl Trades with High Utilization", 1.1, 1.4, -0.30, 0, 18, 0.06},
    {"Percent Trades with Balance", 66, 22, -0.30, 0, 100, 0.002},
}};

constexpr std::size_t kDelinquencyRecency = 8;
constexpr std::size_t kInquiryRecency = 14;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::size_t pick(Rng& rng, std::span<const double> weights) {
  double u = rng.uniform();
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

GeneratedDataset credit_risk(std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  GeneratedDataset out;
  out.schema.label_column = "Risk Performance";
  out.schema.positive_label = "good";
  out.schema.negative_label = "bad";

  std::string& csv = out.csv;
  csv += csv_field(out.schema.label_column);
  for (const auto& f : kCredit) {
    out.schema.features.push_back({f.name, FeatureKind::Continuous, std::nullopt, std::nullopt});
    csv += ',' + csv_field(f.name);
  }
  csv += '\n';

  std::array<long, kCredit.size()> values{};
  for (std::size_t r = 0; r < rows; ++r) {
    const double z = rng.normal();
    const bool no_record = rng.bernoulli(0.056);
    for (std::size_t i = 0; i < kCredit.size(); ++i) {
      const auto& f = kCredit[i];
      const double e = rng.normal();
      const double x = f.mean + f.sd * (f.loading * z + std::sqrt(1.0 - f.loading * f.loading) * e);
      values[i] = std::lround(std::clamp(x, f.lo, f.hi));
      if (f.no_data_rate > 0 && rng.bernoulli(f.no_data_rate)) values[i] = -8;
    }
    // -7 marks "condition not met": no delinquency / no recent inquiry
    if (rng.bernoulli(0.7 * sigmoid(1.5 * z))) values[kDelinquencyRecency] = -7;
    if (rng.bernoulli(0.25)) values[kInquiryRecency] = -7;
    if (no_record) values.fill(-9);

    const double logit = no_record ? 0.0 : 2.2 * z + 0.4 * rng.normal() - 0.1;
    csv += rng.bernoulli(sigmoid(logit)) ? "good" : "bad";
    for (long v : values) csv += ',' + std::to_string(v);
    csv += '\n';
  }
  return out;
}

GeneratedDataset heart(std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  GeneratedDataset out;
  auto& s = out.schema;
  s.label_column = "Diagnosis";
  s.positive_label = "disease";
  s.negative_label = "healthy";
  using C = std::vector<std::string>;
  const C sex{"female", "male"};
  const C chest{"typical angina", "atypical angina", "non-anginal pain", "asymptomatic"};
  const C yes_no{"no", "yes"};
  const C ecg{"normal", "ST-T abnormality", "LV hypertrophy"};
  const C slope{"upsloping", "flat", "downsloping"};
  const C thal{"normal", "fixed defect", "reversible defect"};
  const auto cont = [&](const char* name, std::optional<std::string> unit = std::nullopt) {
    s.features.push_back({name, FeatureKind::Continuous, std::nullopt, std::move(unit)});
  };
  const auto cat = [&](const char* name, const C& cats) {
    s.features.push_back({name, FeatureKind::Categorical, cats, std::nullopt});
  };
  cont("Age", "years");
  cat("Sex", sex);
  cat("Chest Pain Type", chest);
  cont("Resting Blood Pressure", "mm Hg");
  cont("Cholesterol", "mg/dl");
  cat("Fasting Blood Sugar > 120", yes_no);
  cat("Resting ECG", ecg);
  cont("Max Heart Rate", "bpm");
  cat("Exercise Angina", yes_no);
  cont("ST Depression", "mm");
  cat("ST Slope", slope);
  cont("Major Vessels");
  cat("Thalassemia", thal);

  std::string& csv = out.csv;
  for (const auto& f : s.features) csv += csv_field(f.name) + ',';
  csv += csv_field(s.label_column) + '\n';

  for (std::size_t r = 0; r < rows; ++r) {
    const bool d = rng.bernoulli(0.46);
    const double k = d ? 1.0 : 0.0;
    const auto num = [&](double mean, double sd, double lo, double hi) {
      return std::to_string(std::lround(std::clamp(mean + sd * rng.normal(), lo, hi)));
    };
    const auto choice = [&](const C& cats, std::initializer_list<double> healthy, std::initializer_list<double> sick) {
      const std::vector<double> w = d ? std::vector<double>(sick) : std::vector<double>(healthy);
      return csv_field(cats[pick(rng, w)]);
    };
    std::vector<std::string> row;
    row.push_back(num(53 + 3 * k, 9, 29, 77));
    row.push_back(choice(sex, {0.44, 0.56}, {0.18, 0.82}));
    row.push_back(choice(chest, {0.10, 0.28, 0.42, 0.20}, {0.05, 0.07, 0.13, 0.75}));
    row.push_back(num(129 + 5 * k, 17, 94, 200));
    row.push_back(num(242 + 9 * k, 50, 126, 564));
    row.push_back(choice(yes_no, {0.86, 0.14}, {0.84, 0.16}));
    row.push_back(choice(ecg, {0.57, 0.01, 0.42}, {0.42, 0.03, 0.55}));
    row.push_back(num(158 - 19 * k, 20, 71, 202));
    row.push_back(choice(yes_no, {0.86, 0.14}, {0.45, 0.55}));
    row.push_back(fixed1(std::clamp(0.6 + 1.0 * k + 0.9 * rng.normal(), 0.0, 6.2)));
    row.push_back(choice(slope, {0.65, 0.28, 0.07}, {0.25, 0.65, 0.10}));
    row.push_back(num(0.3 + 1.0 * k, 0.9, 0, 3));
    row.push_back(choice(thal, {0.78, 0.04, 0.18}, {0.25, 0.08, 0.67}));
    for (const auto& v : row) csv += v + ',';
    csv += d ? "disease\n" : "healthy\n";
  }
  return out;
}

}  // namespace cfcohort::synthetic
