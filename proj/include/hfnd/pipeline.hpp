#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hfnd/agent.hpp"
#include "hfnd/classifier.hpp"
#include "hfnd/config.hpp"
#include "hfnd/corpus.hpp"
#include "hfnd/eval.hpp"

namespace hfnd::pipeline {

enum class Mode { kBase, kHfnd, kAblationNoRevise, kAblationNoPretrain };

std::string mode_name(Mode m);
std::optional<Mode> parse_mode(std::string_view name);
inline bool uses_agent(Mode m) { return m != Mode::kBase; }

// Per-epoch record. Agent-mode epochs carry the denoising counts and reward;
// base-mode epochs carry only loss and validation F1.
struct EpochReport {
  int epoch = 0;
  bool cotrain = false;
  bool aborted = false;
  double train_loss = 0.0;
  double val_f1 = 0.0;

  long train_kept = 0, train_discarded = 0, train_revised = 0;
  long val_kept = 0, val_discarded = 0, val_revised = 0;
  long cleaned_train = 0, cleaned_val = 0;
  double reward = 0.0;
  double baseline = 0.0;
  eval::PolicyDistribution train_policy;

  // Carried for downstream evaluation; not part of the serialized line.
  std::vector<agent::Decision> train_decisions, val_decisions;
};

// One "key=value ..." line; fixed key order, %.6f floats, no trailing space.
std::string format_epoch_report(const EpochReport& r, Mode mode);

classifier::ClassifierModel make_classifier(const ExperimentConfig& cfg,
                                            const corpus::RelationInventory& inventory,
                                            std::shared_ptr<const encoder::Vocab> vocab,
                                            Rng& init_rng);
agent::AgentModel make_agent(const ExperimentConfig& cfg,
                             std::shared_ptr<const encoder::Vocab> vocab, Rng& init_rng);

// Cross-entropy pretraining of the classifier on the noisy labels as given.
// Returns the last epoch's mean loss.
double pretrain_classifier(const ExperimentConfig& cfg, classifier::ClassifierModel& rc,
                           const corpus::Dataset& train, Rng& rng);

// Action supervision from classifier agreement: a correct positive
// prediction maps to Revise, a correct NA prediction to Keep, and any wrong
// prediction to Discard. The predictor is injectable so it can be stubbed.
std::unordered_map<std::string, agent::Action> generate_action_labels(
    const std::function<int(const corpus::Instance&)>& predict, const corpus::Dataset& train,
    int na_index);

// Cross-entropy pretraining of the policy against the generated actions,
// over all training instances. Errors on an instance without a label.
double pretrain_agent(const ExperimentConfig& cfg, agent::AgentModel& da,
                      const corpus::Dataset& train,
                      const std::unordered_map<std::string, agent::Action>& labels, Rng& rng);

// Negative (NA-labeled) instances in dataset order.
std::vector<const corpus::Instance*> collect_negatives(const corpus::Dataset& d);

// Applies one decision per negative, in order: Keep -> labeled NA,
// Revise -> labeled with the revised relation, Discard -> dropped.
// Positives pass through with their own labels.
std::vector<classifier::Labeled> build_cleaned(const corpus::Dataset& d,
                                               std::span<const agent::Decision> decisions,
                                               int na_index);

// One co-training epoch: the agent acts on the negatives of the original
// train split (sampled) and validation split (greedy), the classifier trains
// once on the cleaned train set, the cleaned-validation micro-F1 becomes the
// policy reward, and the policy takes one reinforcement step. Decisions
// never accumulate: both datasets are read-only here. An epoch whose cleaned
// train set is empty or has no positives aborts with the flag set.
EpochReport cotrain_epoch(const ExperimentConfig& cfg, Mode mode,
                          classifier::ClassifierModel& rc, agent::AgentModel& da,
                          const corpus::Dataset& train, const corpus::Dataset& val,
                          const corpus::FlipLog& train_flips, agent::BaselineTracker& tracker,
                          int epoch, Rng& rng);

// Load or synthesize the three splits, held-out-filter train and validation
// against test, then inject false negatives into train and validation.
struct RunInputs {
  corpus::Dataset train, val, test;
  corpus::FlipLog train_flips, val_flips;
  std::shared_ptr<const encoder::Vocab> vocab;
};

RunInputs prepare_inputs(const ExperimentConfig& cfg);

struct RunResult {
  std::string run_dir;
  eval::F1Result test;
  double final_val_f1 = 0.0;
  std::optional<double> final_revision_accuracy;
  EpochReport final_epoch;
  bool has_final_epoch = false;
};

// Full experiment: prepare inputs, write the manifest before any training
// output, pretrain (mode permitting), co-train, evaluate on the untouched
// test split, and write reports, decisions, metrics, and checkpoints under
// out_dir.
RunResult run_experiment(const ExperimentConfig& cfg, Mode mode, const std::string& out_dir);

extern const char* const kVersion;

}  // namespace hfnd::pipeline
