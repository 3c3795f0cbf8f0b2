#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <random>

#include "cfcohort/cohort.hpp"
#include "cfcohort/counterfactual.hpp"
#include "cfcohort/data_model.hpp"
#include "cfcohort/discretizer.hpp"
#include "cfcohort/predictor.hpp"

namespace fixtures {

using namespace cfcohort;

/// Dataset with continuous features only, built from a row-major value list.
Dataset continuous(const std::vector<std::string>& names, const std::vector<double>& values,
                   const std::vector<int>& labels);

/// Shared synthetic tables (generated once per process).
const Dataset& credit();
const Dataset& heart();
/// Smaller credit table for tests that run the engine many times.
const Dataset& credit_small();

/// Directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);

/// Random confidence interval, cell subset and up to two range clauses.
FilterSet random_filter(std::mt19937_64& g, const Dataset& d, const DiscretizationScheme& s);

/// Outcome of replaying one explanation with an independent search.
struct ReplayResult {
  bool ok = true;
  std::string failure;
  double worst_gap = 0.0;  // max |recorded improvement - brute-force best|
};

/// Re-walks the explanation's trace from the original row. At each step every
/// admissible move is re-enumerated from the constraints alone and scored with
/// the predictor; the recorded move must be the first maximiser and its
/// improvement must equal the maximum within `tol`. The final state and stop
/// reason are checked too.
ReplayResult replay(const CounterfactualExplanation& e, std::span<const double> original, const Predictor& predictor,
                    const DiscretizationScheme& scheme, const AlgorithmConfig& config, const DecisionConfig& decision,
                    double tol = 1e-9);

/// Checks the per-explanation constraints: |changes| <= w, displacement <= l,
/// locked features untouched, changes consistent with the trace.
std::string constraint_violation(const CounterfactualExplanation& e, const DiscretizationScheme& scheme,
                                 const AlgorithmConfig& config);

}  // namespace fixtures
