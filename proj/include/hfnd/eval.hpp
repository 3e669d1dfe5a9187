#pragma once

#include <array>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hfnd/agent.hpp"
#include "hfnd/corpus.hpp"

namespace hfnd::eval {

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long tp = 0, fp = 0, fn = 0;
};

// Micro-averaged F1 over positive relations. A pair is (gold, predicted).
// TP: gold == pred != NA. FP: pred != NA and gold != pred. FN: gold != NA
// and pred != gold. Zero denominators yield zero, not NaN.
F1Result micro_f1(std::span<const std::pair<int, int>> gold_pred, int na_index);

struct PRPoint {
  double confidence = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct ScoredPrediction {
  int gold = 0;
  int predicted = 0;  // must be a positive relation
  double confidence = 0.0;
};

// Precision/recall prefix curve: predictions sorted by descending confidence
// (stable, so input order breaks ties), one point per prefix. Recall is
// against total_gold_positives, which must be positive.
std::vector<PRPoint> pr_curve(std::span<const ScoredPrediction> predictions, int na_index,
                              long total_gold_positives);

// Among Revise decisions whose instance is a logged flip: the percentage
// whose revised relation equals the original. Empty when no such decision.
std::optional<double> revision_accuracy(std::span<const agent::Decision> decisions,
                                        const corpus::FlipLog& flips);

// Action mix over true negatives (row 0) and injected false negatives
// (row 1). Percentages per row sum to 100 when the row has any decisions.
struct PolicyDistribution {
  std::array<std::array<long, 3>, 2> counts{};    // [TN|FN] x [Keep|Discard|Revise]
  std::array<std::array<double, 3>, 2> percent{};
  std::array<long, 2> population{};
};

PolicyDistribution policy_distribution(std::span<const agent::Decision> decisions,
                                       const corpus::FlipLog& flips);

}  // namespace hfnd::eval
