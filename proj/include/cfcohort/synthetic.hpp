#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "cfcohort/data_model.hpp"

namespace cfcohort::synthetic {

/// A generated CSV and the schema that describes it.
struct GeneratedDataset {
  std::string csv;
  SchemaSpec schema;

  void write(const std::filesystem::path& csv_path, const std::filesystem::path& schema_path) const;
};

/// Credit-bureau style table: 23 integer features driven by one latent
/// credit-quality factor, negative sentinel codes (-7, -8, -9) mixed in, and a
/// "Risk Performance" label with classes good / bad.
GeneratedDataset credit_risk(std::size_t rows = 10459, std::uint64_t seed = 7);

/// Small clinical table with mixed continuous and categorical features and a
/// "Diagnosis" label with classes disease / healthy.
GeneratedDataset heart(std::size_t rows = 303, std::uint64_t seed = 11);

/// Portable generator: 64-bit Mersenne Twister with hand-written uniform and
/// normal transforms, so output does not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  double uniform();  // [0, 1)
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cfcohort::synthetic
