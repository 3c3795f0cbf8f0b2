#include "cfcohort/aggregation.hpp"

#include <algorithm>

#include "cfcohort/error.hpp"

namespace cfcohort {

std::size_t FeatureTransitions::total() const {
  std::size_t n = 0;
  for (const auto& [k, c] : positive_origin) n += c.count;
  for (const auto& [k, c] : negative_origin) n += c.count;
  return n;
}

std::vector<std::size_t> TransitionAggregate::feature_totals() const {
  std::vector<std::size_t> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.total());
  return out;
}

void TransitionAggregate::adopt_fingerprint(const std::string& fp) {
  if (fingerprint_.empty()) {
    fingerprint_ = fp;
  } else if (!fp.empty() && fp != fingerprint_) {
    throw Error(ErrorKind::MixedScheme, "explanations from schemes " + fingerprint_ + " and " + fp + " cannot be mixed");
  }
}

void TransitionAggregate::add(const CounterfactualExplanation& e) {
  adopt_fingerprint(e.fingerprint);
  if (!e.success) {
    ++unexplained_.count;
    unexplained_.row_ids.insert(std::upper_bound(unexplained_.row_ids.begin(), unexplained_.row_ids.end(), e.row_id),
                                e.row_id);
    ++unexplained_.by_reason[std::string(to_string(e.stop_reason))];
    return;
  }
  ++explained_;
  const Origin origin = e.original_decision == 1 ? Origin::Positive : Origin::Negative;
  for (const auto& c : e.changes) {
    if (c.feature >= features_.size()) throw Error(ErrorKind::ArityMismatch, "change refers to an unknown feature");
    auto& cell = features_[c.feature].by_origin(origin)[{c.from_slot, c.to_slot}];
    ++cell.count;
    auto& ids = cell.explanation_ids;
    ids.insert(std::upper_bound(ids.begin(), ids.end(), e.row_id), e.row_id);
  }
}

void TransitionAggregate::merge(const TransitionAggregate& other) {
  if (other.features_.size() != features_.size())
    throw Error(ErrorKind::ArityMismatch, "aggregates cover different feature counts");
  adopt_fingerprint(other.fingerprint_);
  for (std::size_t f = 0; f < features_.size(); ++f) {
    for (Origin o : {Origin::Positive, Origin::Negative}) {
      auto& mine = features_[f].by_origin(o);
      for (const auto& [key, cell] : other.features_[f].by_origin(o)) {
        auto& dst = mine[key];
        dst.count += cell.count;
        std::vector<std::size_t> merged;
        std::merge(dst.explanation_ids.begin(), dst.explanation_ids.end(), cell.explanation_ids.begin(),
                   cell.explanation_ids.end(), std::back_inserter(merged));
        dst.explanation_ids = std::move(merged);
      }
    }
  }
  explained_ += other.explained_;
  unexplained_.count += other.unexplained_.count;
  std::vector<std::size_t> merged;
  std::merge(unexplained_.row_ids.begin(), unexplained_.row_ids.end(), other.unexplained_.row_ids.begin(),
             other.unexplained_.row_ids.end(), std::back_inserter(merged));
  unexplained_.row_ids = std::move(merged);
  for (const auto& [reason, n] : other.unexplained_.by_reason) unexplained_.by_reason[reason] += n;
}

namespace {

nlohmann::json transitions_json(const TransitionMap& m) {
  auto j = nlohmann::json::object();
  for (const auto& [key, cell] : m)
    j[std::to_string(key.from) + "→" + std::to_string(key.to)] = {{"count", cell.count}, {"ids", cell.explanation_ids}};
  return j;
}

}  // namespace

nlohmann::json TransitionAggregate::to_json(const DiscretizationScheme& scheme) const {
  nlohmann::json j;
  j["fingerprint"] = fingerprint_;
  j["explained"] = explained_;
  j["unexplained"] = {{"count", unexplained_.count}, {"ids", unexplained_.row_ids}, {"by_reason", unexplained_.by_reason}};
  for (Origin o : {Origin::Positive, Origin::Negative}) {
    auto side = nlohmann::json::object();
    for (std::size_t f = 0; f < features_.size(); ++f) {
      const auto& m = features_[f].by_origin(o);
      if (!m.empty()) side[scheme.feature(f).name] = transitions_json(m);
    }
    j[o == Origin::Positive ? "positive_origin" : "negative_origin"] = std::move(side);
  }
  auto totals = nlohmann::json::object();
  for (std::size_t f = 0; f < features_.size(); ++f) totals[scheme.feature(f).name] = features_[f].total();
  j["feature_totals"] = std::move(totals);
  return j;
}

TransitionAggregate aggregate_transitions(std::span<const CounterfactualExplanation> explanations,
                                          std::size_t num_features) {
  TransitionAggregate agg(num_features);
  for (const auto& e : explanations) agg.add(e);
  return agg;
}

const CounterfactualExplanation& explanation_detail(std::size_t row_id,
                                                    std::span<const CounterfactualExplanation> explanations) {
  auto it = std::find_if(explanations.begin(), explanations.end(),
                         [&](const CounterfactualExplanation& e) { return e.row_id == row_id; });
  if (it == explanations.end()) throw Error(ErrorKind::UnknownRow, "no explanation for row " + std::to_string(row_id));
  return *it;
}

std::vector<FeatureOpposition> opposition_report(const TransitionAggregate& positive,
                                                 const TransitionAggregate& negative) {
  if (positive.num_features() != negative.num_features())
    throw Error(ErrorKind::ArityMismatch, "aggregates cover different feature counts");
  if (!positive.fingerprint().empty() && !negative.fingerprint().empty() &&
      positive.fingerprint() != negative.fingerprint())
    throw Error(ErrorKind::MixedScheme, "aggregates were built under different schemes");

  // mass of `from` arrows whose reverse is present in `against`
  auto reversed_mass = [](const TransitionMap& from, const TransitionMap& against) {
    std::size_t mass = 0, total = 0;
    for (const auto& [key, cell] : from) {
      total += cell.count;
      if (against.contains({key.to, key.from})) mass += cell.count;
    }
    return std::pair{mass, total};
  };

  std::vector<FeatureOpposition> out(positive.num_features());
  for (std::size_t f = 0; f < out.size(); ++f) {
    const auto& pos = positive.feature(f).positive_origin;
    const auto& neg = negative.feature(f).negative_origin;
    const auto [pm, pt] = reversed_mass(pos, neg);
    const auto [nm, nt] = reversed_mass(neg, pos);
    out[f].positive_mass = pt;
    out[f].negative_mass = nt;
    if (pt > 0) out[f].positive_reversed = static_cast<double>(pm) / static_cast<double>(pt);
    if (nt > 0) out[f].negative_reversed = static_cast<double>(nm) / static_cast<double>(nt);
  }
  return out;
}

nlohmann::json to_json(std::span<const FeatureOpposition> report, const DiscretizationScheme& scheme) {
  auto j = nlohmann::json::object();
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  for (std::size_t f = 0; f < report.size(); ++f) {
    j[scheme.feature(f).name] = {{"positive_mass", report[f].positive_mass},
                                 {"negative_mass", report[f].negative_mass},
                                 {"positive_reversed", opt(report[f].positive_reversed)},
                                 {"negative_reversed", opt(report[f].negative_reversed)}};
  }
  return j;
}

}  // namespace cfcohort
