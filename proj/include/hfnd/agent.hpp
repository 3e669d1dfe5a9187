#pragma once

#include <deque>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hfnd/classifier.hpp"
#include "hfnd/corpus.hpp"

namespace hfnd::agent {

// Ternary denoising action on a negative (NA-labeled) instance.
enum class Action { kKeep = 0, kDiscard = 1, kRevise = 2 };

std::string action_name(Action a);

struct Decision {
  std::string id;
  Action action = Action::kKeep;
  double log_prob = 0.0;        // log pi(action | sentence), always <= 0
  int revised_relation = -1;    // set iff action == kRevise
};

// Mean of the rewards from the most recent co-training epochs; zero until
// the first reward arrives.
class BaselineTracker {
 public:
  static constexpr std::size_t kWindow = 5;

  double baseline() const;
  void record(double reward);
  std::size_t size() const { return window_.size(); }

 private:
  std::deque<double> window_;
};

// The denoising policy: an encoder of its own plus a three-way softmax.
// It shares no parameters with the relation classifier.
struct AgentModel {
  classifier::SoftmaxNet net;

  AgentModel(const encoder::EncoderConfig& cfg, std::shared_ptr<const encoder::Vocab> vocab,
             Rng& init_rng);

  // Action distribution; deterministic (no dropout) unless training is set.
  nn::Vec policy(const corpus::Instance& inst, bool training = false, Rng* rng = nullptr) const;
};

enum class ActMode { kSample, kGreedy };

// One decision per negative instance, in input order. Every input must be
// labeled NA. Revise decisions carry the classifier's revision, which never
// returns NA. Greedy mode draws nothing from the rng.
std::vector<Decision> act(const AgentModel& model,
                          std::span<const corpus::Instance* const> negatives,
                          const classifier::ClassifierModel& rc, ActMode mode, Rng& rng);

// One Adam ascent step on sum_i log pi(a_i) * (reward - baseline), then
// records the reward in the tracker. The classifier's revision step is
// deterministic, so only the policy parameters receive gradient. With no
// decisions this is a no-op (warning on stderr, nothing recorded).
void reinforce_update(AgentModel& model, std::span<const corpus::Instance* const> negatives,
                      std::span<const Decision> decisions, double reward,
                      BaselineTracker& tracker);

}  // namespace hfnd::agent
