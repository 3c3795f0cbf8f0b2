#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "cfcohort/synthetic.hpp"

namespace fixtures {

Dataset continuous(const std::vector<std::string>& names, const std::vector<double>& values,
                   const std::vector<int>& labels) {
  std::vector<FeatureSchema> schema;
  for (const auto& n : names) schema.push_back(FeatureSchema{n, FeatureKind::Continuous, {}, std::nullopt});
  return Dataset(std::move(schema), values, labels, "y", "1", "0");
}

namespace {

Dataset from_generated(const synthetic::GeneratedDataset& g) { return parse_csv(g.csv, g.schema); }

}  // namespace

const Dataset& credit() {
  static const Dataset d = from_generated(synthetic::credit_risk());
  return d;
}

const Dataset& heart() {
  static const Dataset d = from_generated(synthetic::heart());
  return d;
}

const Dataset& credit_small() {
  static const Dataset d = from_generated(synthetic::credit_risk(1500, 3));
  return d;
}

TempDir::TempDir() {
  std::random_device rd;
  const auto base = std::filesystem::temp_directory_path();
  for (;;) {
    auto p = base / ("cfcohort-test-" + std::to_string(rd()));
    if (std::filesystem::create_directory(p)) {
      path_ = p;
      return;
    }
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

FilterSet random_filter(std::mt19937_64& g, const Dataset& d, const DiscretizationScheme& s) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FilterSet f;
  if (u(g) < 0.5) {
    double a = u(g), b = u(g);
    f.confidence_low = std::min(a, b);
    f.confidence_high = std::max(a, b);
  }
  for (auto c : {ConfusionCell::TP, ConfusionCell::FP, ConfusionCell::TN, ConfusionCell::FN})
    if (u(g) < 0.4) f.cells.push_back(c);
  const int clauses = static_cast<int>(u(g) * 3);
  for (int k = 0; k < clauses; ++k) {
    const auto feat = static_cast<std::size_t>(u(g) * static_cast<double>(d.num_features()));
    if (s.is_categorical(feat)) {
      CategorySet cs{feat, {}};
      for (std::size_t c = 0; c < d.feature(feat).categories.size(); ++c)
        if (u(g) < 0.6) cs.allowed.push_back(c);
      f.ranges.push_back(cs);
    } else {
      const auto& b = s.feature(feat);
      const double lo = b.mean - 2.5 * b.stddev + u(g) * 3.0 * b.stddev;
      f.ranges.push_back(NumericRange{feat, lo, lo + u(g) * 3.0 * b.stddev});
    }
  }
  return f;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// independent greedy replay

namespace {

struct Walk {
  const DiscretizationScheme& scheme;
  std::vector<double> original;
  std::vector<double> values;
  std::vector<long> orig_slot;
  std::vector<long> slot;

  Walk(std::span<const double> x, const DiscretizationScheme& s) : scheme(s), original(x.begin(), x.end()), values(original) {
    for (std::size_t f = 0; f < x.size(); ++f) orig_slot.push_back(slot_for(f, x[f]));
    slot = orig_slot;
  }

  bool movable(std::size_t f) const {
    const auto& b = scheme.feature(f);
    return b.kind == FeatureKind::Categorical || b.binnable;
  }

  long slot_for(std::size_t f, double v) const {
    const auto& b = scheme.feature(f);
    if (b.kind == FeatureKind::Categorical) return std::lround(v);
    if (!b.binnable) return 0;
    long k = 0;
    for (double e : b.inner_edges) k += (e <= v) ? 1 : 0;
    return k;
  }

  double value_at(std::size_t f, long s) const {
    const auto& b = scheme.feature(f);
    if (s == orig_slot[f]) return original[f];
    if (b.kind == FeatureKind::Categorical) return static_cast<double>(s);
    const auto& e = b.inner_edges;
    const long n = scheme.bin_count();
    const double h = 4.0 * b.stddev / static_cast<double>(n - 2);
    if (s == 0) return e.front() - h / 2.0;
    if (s == n - 1) return e.back() + h / 2.0;
    return (e[s - 1] + e[s]) / 2.0;
  }

  std::size_t changed() const {
    std::size_t c = 0;
    for (std::size_t f = 0; f < slot.size(); ++f) c += slot[f] != orig_slot[f];
    return c;
  }

  struct Move {
    std::size_t f;
    MoveKind kind;
    long target;
  };

  std::vector<Move> moves(const AlgorithmConfig& cfg) const {
    std::vector<Move> out;
    const std::size_t c = changed();
    const long n = scheme.bin_count();
    for (std::size_t f = 0; f < slot.size(); ++f) {
      if (std::find(cfg.locked_features.begin(), cfg.locked_features.end(), f) != cfg.locked_features.end()) continue;
      if (!movable(f)) continue;
      const bool was_changed = slot[f] != orig_slot[f];
      if (scheme.feature(f).kind == FeatureKind::Categorical) {
        if (was_changed) continue;
        if (c + 1 > static_cast<std::size_t>(cfg.max_features)) continue;
        for (long k = 0; k < static_cast<long>(scheme.feature(f).categories.size()); ++k)
          if (k != orig_slot[f]) out.push_back({f, MoveKind::Category, k});
        continue;
      }
      for (int dir : {-1, +1}) {
        const long t = slot[f] + dir;
        if (t < 0 || t > n - 1) continue;
        if (std::labs(t - orig_slot[f]) > cfg.max_displacement) continue;
        const std::size_t after = c - (was_changed ? 1 : 0) + (t != orig_slot[f] ? 1 : 0);
        if (after > static_cast<std::size_t>(cfg.max_features)) continue;
        out.push_back({f, dir < 0 ? MoveKind::Down : MoveKind::Up, t});
      }
    }
    return out;
  }

  std::vector<double> with(const Move& m) const {
    auto v = values;
    v[m.f] = value_at(m.f, m.target);
    return v;
  }
};

}  // namespace

ReplayResult replay(const CounterfactualExplanation& e, std::span<const double> original, const Predictor& predictor,
                    const DiscretizationScheme& scheme, const AlgorithmConfig& config, const DecisionConfig& decision,
                    double tol) {
  ReplayResult r;
  auto fail = [&](std::string msg) {
    if (r.ok) r.failure = "row " + std::to_string(e.row_id) + ": " + msg;
    r.ok = false;
    return r;
  };

  Walk walk(original, scheme);
  double p = predictor.predict_proba(walk.values);
  if (std::abs(p - e.original_prob) > tol) return fail("original probability differs");
  const int d0 = decision.decide(p);
  if (d0 != e.original_decision) return fail("original decision differs");
  const auto gain = [&](double cand) { return d0 == 1 ? p - cand : cand - p; };

  for (std::size_t i = 0; i < e.trace.size(); ++i) {
    const auto& step = e.trace[i];
    const auto moves = walk.moves(config);
    if (moves.empty()) return fail("step " + std::to_string(i + 1) + " taken with no admissible move");
    double best = -INFINITY;
    std::size_t best_i = 0;
    std::vector<double> best_p(moves.size());
    for (std::size_t k = 0; k < moves.size(); ++k) {
      best_p[k] = predictor.predict_proba(walk.with(moves[k]));
      const double g = gain(best_p[k]);
      if (g > best) {
        best = g;
        best_i = k;
      }
    }
    const double gap = std::abs(step.improvement - best);
    r.worst_gap = std::max(r.worst_gap, gap);
    if (gap > tol) return fail("step " + std::to_string(i + 1) + " improvement is not the maximum");
    if (!(best > 0)) return fail("step " + std::to_string(i + 1) + " accepted without positive improvement");
    const auto& m = moves[best_i];
    if (step.move.feature != m.f || step.move.kind != m.kind || static_cast<long>(step.move.target) != m.target) {
      return fail("step " + std::to_string(i + 1) + " chose a move other than the first maximiser");
    }
    walk.values[m.f] = walk.value_at(m.f, m.target);
    walk.slot[m.f] = m.target;
    p = best_p[best_i];
    if (std::abs(step.probability - p) > tol) return fail("step probability differs");
    if (step.step != i + 1) return fail("step numbering");
  }

  if (std::abs(e.final_prob - p) > tol) return fail("final probability differs");
  const bool flipped = decision.decide(p) != d0;
  if (e.success != flipped) return fail("success flag disagrees with the final decision");
  switch (e.stop_reason) {
    case StopReason::Flipped:
      if (!flipped) return fail("stop reason flipped without flip");
      break;
    case StopReason::Exhausted:
      if (!walk.moves(config).empty()) return fail("exhausted with moves left");
      break;
    case StopReason::NoImprovement: {
      const auto moves = walk.moves(config);
      if (moves.empty()) return fail("no_improvement with no moves (should be exhausted)");
      for (const auto& m : moves)
        if (gain(predictor.predict_proba(walk.with(m))) > 0) return fail("no_improvement but an improving move exists");
      break;
    }
    case StopReason::StepCap:
      if (static_cast<int>(e.trace.size()) != config.step_cap(scheme)) return fail("step cap stop before the cap");
      break;
  }

  // net changes must describe the final state
  std::size_t expected = 0;
  for (std::size_t f = 0; f < walk.slot.size(); ++f) expected += walk.slot[f] != walk.orig_slot[f];
  if (e.changes.size() != expected) return fail("change count differs from the walked state");
  for (const auto& c : e.changes) {
    if (static_cast<long>(c.to_slot) != walk.slot[c.feature]) return fail("change target differs");
    if (static_cast<long>(c.from_slot) != walk.orig_slot[c.feature]) return fail("change origin differs");
    if (c.to_value != walk.values[c.feature]) return fail("change value differs");
  }
  return r;
}

std::string constraint_violation(const CounterfactualExplanation& e, const DiscretizationScheme& scheme,
                                 const AlgorithmConfig& config) {
  const auto id = "row " + std::to_string(e.row_id) + ": ";
  if (e.changes.size() > static_cast<std::size_t>(config.max_features)) return id + "too many changed features";
  for (const auto& c : e.changes) {
    if (config.is_locked(c.feature)) return id + "locked feature changed";
    if (c.from_slot == c.to_slot) return id + "no-op change";
    if (!scheme.is_categorical(c.feature)) {
      const long disp = std::labs(static_cast<long>(c.to_slot) - static_cast<long>(c.from_slot));
      if (disp > config.max_displacement) return id + "displacement above l";
      if (c.to_value != scheme.representative_value(c.to_slot, c.feature)) return id + "value is not the bin representative";
    }
  }
  for (const auto& s : e.trace)
    if (config.is_locked(s.move.feature)) return id + "trace touches a locked feature";
  return {};
}

}  // namespace fixtures
