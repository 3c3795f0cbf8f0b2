#include "cfcohort/counterfactual.hpp"

#include <algorithm>
#include <ostream>
#include <thread>

#include "cfcohort/error.hpp"
#include "cfcohort/hashing.hpp"

namespace cfcohort {

// ---------------------------------------------------------------------------
// AlgorithmConfig

void AlgorithmConfig::validate(std::size_t num_features) const {
  if (max_features < 1) throw Error(ErrorKind::InvalidArgument, "w (max changed features) must be at least 1");
  if (max_displacement < 1) throw Error(ErrorKind::InvalidArgument, "l (max bin displacement) must be at least 1");
  if (max_steps && *max_steps < 1) throw Error(ErrorKind::InvalidArgument, "max_steps must be at least 1");
  if (!std::is_sorted(locked_features.begin(), locked_features.end()) ||
      std::adjacent_find(locked_features.begin(), locked_features.end()) != locked_features.end())
    throw Error(ErrorKind::InvalidArgument, "locked features must be sorted and unique");
  for (auto f : locked_features)
    if (f >= num_features) throw Error(ErrorKind::InvalidArgument, "locked feature index out of range");
}

bool AlgorithmConfig::is_locked(std::size_t f) const {
  return std::binary_search(locked_features.begin(), locked_features.end(), f);
}

int AlgorithmConfig::step_cap(const DiscretizationScheme& scheme) const {
  if (max_steps) return *max_steps;
  int categorical = 0;
  for (std::size_t f = 0; f < scheme.num_features(); ++f) categorical += scheme.is_categorical(f) ? 1 : 0;
  return max_features * max_displacement + categorical;
}

nlohmann::json AlgorithmConfig::to_json() const {
  nlohmann::json j{{"w", max_features}, {"l", max_displacement}, {"locked_features", locked_features}};
  j["max_steps"] = max_steps ? nlohmann::json(*max_steps) : nlohmann::json(nullptr);
  return j;
}

AlgorithmConfig AlgorithmConfig::from_json(const nlohmann::json& j) {
  AlgorithmConfig c;
  try {
    c.max_features = j.value("w", c.max_features);
    c.max_displacement = j.value("l", c.max_displacement);
    if (j.contains("locked_features")) c.locked_features = j.at("locked_features").get<std::vector<std::size_t>>();
    if (j.contains("max_steps") && !j.at("max_steps").is_null()) c.max_steps = j.at("max_steps").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("algorithm config: ") + e.what());
  }
  std::sort(c.locked_features.begin(), c.locked_features.end());
  c.locked_features.erase(std::unique(c.locked_features.begin(), c.locked_features.end()), c.locked_features.end());
  return c;
}

std::string_view to_string(MoveKind kind) {
  switch (kind) {
    case MoveKind::Down: return "down";
    case MoveKind::Up: return "up";
    case MoveKind::Category: return "category";
  }
  return "?";
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Flipped: return "flipped";
    case StopReason::NoImprovement: return "no_improvement";
    case StopReason::Exhausted: return "exhausted";
    case StopReason::StepCap: return "step_cap";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// SearchState

SearchState::SearchState(std::span<const double> original, const DiscretizationScheme& scheme)
    : scheme_(&scheme),
      original_(original.begin(), original.end()),
      values_(original.begin(), original.end()),
      original_slot_(original.size(), 0) {
  if (original.size() != scheme.num_features())
    throw Error(ErrorKind::ArityMismatch, "instance arity does not match the discretization scheme");
  for (std::size_t f = 0; f < original.size(); ++f) {
    if (scheme.is_categorical(f))
      original_slot_[f] = static_cast<std::size_t>(original[f]);
    else if (scheme.is_binnable(f))
      original_slot_[f] = scheme.bin_of(original[f], f);
  }
  current_slot_ = original_slot_;
}

std::size_t SearchState::changed_count() const {
  std::size_t c = 0;
  for (std::size_t f = 0; f < original_slot_.size(); ++f) c += is_changed(f) ? 1 : 0;
  return c;
}

double SearchState::value_for(std::size_t f, std::size_t slot) const {
  // returning to the starting bin restores the exact original value
  if (slot == original_slot_[f]) return original_[f];
  return scheme_->representative_value(slot, f);
}

void SearchState::values_with(const CandidateMove& move, std::span<double> out) const {
  std::copy(values_.begin(), values_.end(), out.begin());
  out[move.feature] = value_for(move.feature, move.target);
}

void SearchState::apply(const CandidateMove& move) {
  values_[move.feature] = value_for(move.feature, move.target);
  current_slot_[move.feature] = move.target;
}

// ---------------------------------------------------------------------------

std::vector<CandidateMove> enumerate_candidates(const SearchState& state, const DiscretizationScheme& scheme,
                                                const AlgorithmConfig& config) {
  std::vector<CandidateMove> out;
  const std::size_t changed = state.changed_count();
  const auto w = static_cast<std::size_t>(config.max_features);
  const auto l = static_cast<long>(config.max_displacement);
  const auto last_bin = static_cast<long>(scheme.bin_count()) - 1;

  // distinct-changed count after moving feature f to `target`
  auto count_after = [&](std::size_t f, std::size_t target) {
    return changed - (state.is_changed(f) ? 1 : 0) + (target != state.original_slot(f) ? 1 : 0);
  };

  for (std::size_t f = 0; f < scheme.num_features(); ++f) {
    if (config.is_locked(f)) continue;
    if (scheme.is_categorical(f)) {
      if (state.is_changed(f)) continue;  // one switch per explanation
      const std::size_t k = scheme.feature(f).categories.size();
      for (std::size_t c = 0; c < k; ++c) {
        if (c == state.original_slot(f)) continue;
        if (count_after(f, c) > w) continue;
        out.push_back({f, MoveKind::Category, c});
      }
      continue;
    }
    if (!scheme.is_binnable(f)) continue;
    const auto cur = static_cast<long>(state.current_slot(f));
    const auto orig = static_cast<long>(state.original_slot(f));
    for (auto [kind, target] : {std::pair{MoveKind::Down, cur - 1}, std::pair{MoveKind::Up, cur + 1}}) {
      if (target < 0 || target > last_bin) continue;
      if (std::labs(target - orig) > l) continue;
      if (count_after(f, static_cast<std::size_t>(target)) > w) continue;
      out.push_back({f, kind, static_cast<std::size_t>(target)});
    }
  }
  return out;
}

std::vector<double> apply_changes(std::span<const double> original, std::span<const FeatureChange> changes) {
  std::vector<double> out(original.begin(), original.end());
  for (const auto& c : changes) out.at(c.feature) = c.to_value;
  return out;
}

std::string scheme_fingerprint(const DiscretizationScheme& scheme, const AlgorithmConfig& config,
                               const DecisionConfig& decision) {
  const nlohmann::json canonical{
      {"scheme", scheme.to_json()}, {"config", config.to_json()}, {"threshold", decision.threshold}};
  return sha256_hex(canonical.dump()).substr(0, 16);
}

// ---------------------------------------------------------------------------
// CounterfactualEngine

CounterfactualEngine::CounterfactualEngine(const Predictor& predictor, const DiscretizationScheme& scheme,
                                           AlgorithmConfig config, DecisionConfig decision)
    : predictor_(&predictor), scheme_(&scheme), config_(std::move(config)), decision_(decision) {
  decision_.validate();
  config_.validate(scheme.num_features());
  if (predictor.num_features() != scheme.num_features())
    throw Error(ErrorKind::ArityMismatch, "predictor arity does not match the discretization scheme");
  fingerprint_ = scheme_fingerprint(scheme, config_, decision_);
}

CounterfactualExplanation CounterfactualEngine::explain(const Instance& instance,
                                                        std::optional<double> original_prob) const {
  const auto& scheme = *scheme_;
  CounterfactualExplanation ex;
  ex.row_id = instance.row_id;
  ex.fingerprint = fingerprint_;
  ex.original_prob = original_prob ? *original_prob : predictor_->predict_proba(instance.values);
  ex.original_decision = decision_.decide(ex.original_prob);

  SearchState state(instance.values, scheme);
  const std::size_t d = instance.values.size();
  const int cap = config_.step_cap(scheme);
  double p_current = ex.original_prob;
  std::vector<double> batch;
  std::vector<double> probs;
  std::vector<std::size_t> first_touch;  // feature order of first change

  ex.stop_reason = StopReason::Exhausted;
  for (int step = 0;; ++step) {
    if (step >= cap) {
      ex.stop_reason = StopReason::StepCap;
      break;
    }
    const auto candidates = enumerate_candidates(state, scheme, config_);
    if (candidates.empty()) {
      ex.stop_reason = StopReason::Exhausted;
      break;
    }
    batch.resize(candidates.size() * d);
    probs.resize(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
      state.values_with(candidates[i], std::span<double>(batch).subspan(i * d, d));
    predictor_->predict_batch(batch, probs);

    std::size_t best = 0;
    double best_gain = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double gain = ex.original_decision == 1 ? p_current - probs[i] : probs[i] - p_current;
      if (i == 0 || gain > best_gain) {
        best = i;
        best_gain = gain;
      }
    }
    if (!(best_gain > 0.0)) {
      ex.stop_reason = StopReason::NoImprovement;
      break;
    }

    const auto& move = candidates[best];
    state.apply(move);
    p_current = probs[best];
    ex.trace.push_back({static_cast<std::size_t>(step) + 1, move, p_current, best_gain});
    if (std::find(first_touch.begin(), first_touch.end(), move.feature) == first_touch.end())
      first_touch.push_back(move.feature);

    if (decision_.decide(p_current) != ex.original_decision) {
      ex.success = true;
      ex.stop_reason = StopReason::Flipped;
      break;
    }
  }

  ex.final_prob = p_current;
  for (auto f : first_touch) {
    if (!state.is_changed(f)) continue;
    ex.changes.push_back({f, scheme.is_categorical(f) ? FeatureKind::Categorical : FeatureKind::Continuous,
                          state.original_slot(f), state.current_slot(f), state.original()[f], state.values()[f]});
  }
  return ex;
}

std::vector<CounterfactualExplanation> CounterfactualEngine::explain_batch(const Dataset& dataset,
                                                                          std::span<const std::size_t> rows,
                                                                          const PredictionCache* cache,
                                                                          unsigned threads) const {
  std::vector<CounterfactualExplanation> out(rows.size());
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = rows[i];
      if (r >= dataset.num_rows()) throw Error(ErrorKind::UnknownRow, "row " + std::to_string(r) + " out of range");
      std::optional<double> p;
      if (cache) p = cache->probability(r);
      out[i] = explain(dataset.instance(r), p);
    }
  };
  if (threads <= 1 || rows.size() < 2) {
    run(0, rows.size());
    return out;
  }
  const std::size_t workers = std::min<std::size_t>(threads, rows.size());
  const std::size_t chunk = (rows.size() + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          run(t * chunk, std::min(rows.size(), (t + 1) * chunk));
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

CounterfactualExplanation generate_counterfactual(const Instance& instance, const Predictor& predictor,
                                                  const DiscretizationScheme& scheme, const AlgorithmConfig& config,
                                                  const DecisionConfig& decision) {
  return CounterfactualEngine(predictor, scheme, config, decision).explain(instance);
}

std::vector<CounterfactualExplanation> generate_batch(const Dataset& dataset, std::span<const std::size_t> rows,
                                                      const Predictor& predictor, const DiscretizationScheme& scheme,
                                                      const AlgorithmConfig& config, const DecisionConfig& decision,
                                                      const PredictionCache* cache, unsigned threads) {
  return CounterfactualEngine(predictor, scheme, config, decision).explain_batch(dataset, rows, cache, threads);
}

// ---------------------------------------------------------------------------
// export

nlohmann::json to_json(const CounterfactualExplanation& e, const DiscretizationScheme& scheme) {
  nlohmann::json j;
  j["row_id"] = e.row_id;
  j["success"] = e.success;
  j["stop_reason"] = to_string(e.stop_reason);
  j["original_prob"] = e.original_prob;
  j["original_decision"] = e.original_decision;
  j["final_prob"] = e.final_prob;
  j["fingerprint"] = e.fingerprint;
  j["changes"] = nlohmann::json::array();
  for (const auto& c : e.changes) {
    const auto& fb = scheme.feature(c.feature);
    nlohmann::json jc{{"feature", c.feature}, {"feature_name", fb.name}};
    if (c.kind == FeatureKind::Categorical) {
      jc["from_category"] = fb.categories.at(c.from_slot);
      jc["to_category"] = fb.categories.at(c.to_slot);
    } else {
      jc["from_bin"] = c.from_slot;
      jc["to_bin"] = c.to_slot;
      jc["from_value"] = c.from_value;
      jc["to_value"] = c.to_value;
    }
    j["changes"].push_back(std::move(jc));
  }
  j["trace"] = nlohmann::json::array();
  for (const auto& s : e.trace) {
    nlohmann::json js{{"step", s.step},
                      {"feature", s.move.feature},
                      {"move", to_string(s.move.kind)},
                      {"probability", s.probability},
                      {"improvement", s.improvement}};
    if (s.move.kind == MoveKind::Category)
      js["to_category"] = scheme.feature(s.move.feature).categories.at(s.move.target);
    else
      js["to_bin"] = s.move.target;
    j["trace"].push_back(std::move(js));
  }
  return j;
}

void write_jsonl(std::ostream& out, std::span<const CounterfactualExplanation> explanations,
                 const DiscretizationScheme& scheme) {
  for (const auto& e : explanations) out << to_json(e, scheme).dump() << '\n';
}

}  // namespace cfcohort
