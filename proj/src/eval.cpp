#include "hfnd/eval.hpp"

#include <algorithm>
#include <stdexcept>

namespace hfnd::eval {

F1Result micro_f1(std::span<const std::pair<int, int>> gold_pred, int na_index) {
  F1Result r;
  for (const auto& [gold, pred] : gold_pred) {
    if (pred != na_index && gold == pred) ++r.tp;
    if (pred != na_index && gold != pred) ++r.fp;
    if (gold != na_index && pred != gold) ++r.fn;
  }
  r.precision = r.tp + r.fp == 0 ? 0.0 : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  r.recall = r.tp + r.fn == 0 ? 0.0 : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  r.f1 = r.precision + r.recall == 0.0 ? 0.0
                                       : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

std::vector<PRPoint> pr_curve(std::span<const ScoredPrediction> predictions, int na_index,
                              long total_gold_positives) {
  if (total_gold_positives <= 0) {
    throw std::invalid_argument("pr_curve: no gold positives");
  }
  std::vector<ScoredPrediction> sorted(predictions.begin(), predictions.end());
  for (const auto& p : sorted) {
    if (p.predicted == na_index) {
      throw std::invalid_argument("pr_curve: predictions must be positive relations");
    }
  }
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoredPrediction& a, const ScoredPrediction& b) {
                     return a.confidence > b.confidence;
                   });
  std::vector<PRPoint> curve;
  curve.reserve(sorted.size());
  long correct = 0;
  long emitted = 0;
  for (const auto& p : sorted) {
    ++emitted;
    if (p.gold == p.predicted) ++correct;
    PRPoint pt;
    pt.confidence = p.confidence;
    pt.precision = static_cast<double>(correct) / static_cast<double>(emitted);
    pt.recall = static_cast<double>(correct) / static_cast<double>(total_gold_positives);
    curve.push_back(pt);
  }
  return curve;
}

std::optional<double> revision_accuracy(std::span<const agent::Decision> decisions,
                                        const corpus::FlipLog& flips) {
  long seen = 0;
  long correct = 0;
  for (const auto& d : decisions) {
    if (d.action != agent::Action::kRevise) continue;
    const auto it = flips.entries.find(d.id);
    if (it == flips.entries.end()) continue;
    ++seen;
    if (d.revised_relation == it->second) ++correct;
  }
  if (seen == 0) return std::nullopt;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(seen);
}

PolicyDistribution policy_distribution(std::span<const agent::Decision> decisions,
                                       const corpus::FlipLog& flips) {
  PolicyDistribution out;
  for (const auto& d : decisions) {
    const std::size_t row = flips.entries.count(d.id) ? 1 : 0;
    out.counts[row][static_cast<std::size_t>(d.action)] += 1;
    out.population[row] += 1;
  }
  for (std::size_t row = 0; row < 2; ++row) {
    if (out.population[row] == 0) continue;
    for (std::size_t a = 0; a < 3; ++a) {
      out.percent[row][a] =
          100.0 * static_cast<double>(out.counts[row][a]) / static_cast<double>(out.population[row]);
    }
  }
  return out;
}

}  // namespace hfnd::eval
