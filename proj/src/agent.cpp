#include "hfnd/agent.hpp"

#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

namespace hfnd::agent {

std::string action_name(Action a) {
  switch (a) {
    case Action::kKeep: return "keep";
    case Action::kDiscard: return "discard";
    case Action::kRevise: return "revise";
  }
  throw std::logic_error("action_name: bad action");
}

double BaselineTracker::baseline() const {
  if (window_.empty()) return 0.0;
  return std::accumulate(window_.begin(), window_.end(), 0.0) /
         static_cast<double>(window_.size());
}

void BaselineTracker::record(double reward) {
  window_.push_back(reward);
  if (window_.size() > kWindow) window_.pop_front();
}

AgentModel::AgentModel(const encoder::EncoderConfig& cfg,
                       std::shared_ptr<const encoder::Vocab> vocab, Rng& init_rng)
    : net(cfg, std::move(vocab), 3, init_rng) {}

nn::Vec AgentModel::policy(const corpus::Instance& inst, bool training, Rng* rng) const {
  return net.probs(inst, training, rng);
}

std::vector<Decision> act(const AgentModel& model,
                          std::span<const corpus::Instance* const> negatives,
                          const classifier::ClassifierModel& rc, ActMode mode, Rng& rng) {
  std::vector<Decision> out;
  out.reserve(negatives.size());
  for (const corpus::Instance* inst : negatives) {
    if (!rc.inventory.is_na(inst->relation)) {
      throw std::invalid_argument("act: instance '" + inst->id + "' is not labeled NA");
    }
    const nn::Vec p = model.policy(*inst);
    const Eigen::Index a =
        mode == ActMode::kSample ? nn::sample_categorical(p, rng) : nn::argmax_lowest(p);
    Decision d;
    d.id = inst->id;
    d.action = static_cast<Action>(a);
    d.log_prob = std::log(p(a));
    if (d.action == Action::kRevise) d.revised_relation = rc.revise(*inst);
    out.push_back(std::move(d));
  }
  return out;
}

void reinforce_update(AgentModel& model, std::span<const corpus::Instance* const> negatives,
                      std::span<const Decision> decisions, double reward,
                      BaselineTracker& tracker) {
  if (decisions.empty()) {
    std::cerr << "reinforce_update: no decisions, skipping update\n";
    return;
  }
  if (negatives.size() != decisions.size()) {
    throw std::invalid_argument("reinforce_update: decisions do not match instances");
  }
  const double advantage = reward - tracker.baseline();
  // A reward exactly at the baseline contributes a zero gradient; skipping the
  // optimizer step entirely keeps the parameters bit-identical in that case
  // (an Adam step with zero gradient would still decay the moment estimates).
  if (advantage == 0.0) {
    tracker.record(reward);
    return;
  }

  // Loss is -J; its logit gradient per decision is advantage * (pi - onehot).
  nn::ParamSet params = model.net.trainable();
  params.zero_grads();
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const corpus::Instance& inst = *negatives[i];
    if (decisions[i].id != inst.id) {
      throw std::invalid_argument("reinforce_update: decision order does not match instances");
    }
    const auto acts = model.net.enc.encode_trace(inst, false, nullptr);
    const nn::Mat logits =
        nn::affine(acts.feature.transpose(), model.net.out_w.value, model.net.out_b.value);
    nn::Vec grad_logits = nn::softmax(logits.row(0).transpose());
    grad_logits(static_cast<Eigen::Index>(decisions[i].action)) -= 1.0;
    grad_logits *= advantage;
    const auto head = nn::affine_backward(grad_logits.transpose(), acts.feature.transpose(),
                                          model.net.out_w.value);
    model.net.out_w.grad += head.w;
    model.net.out_b.grad += head.b;
    model.net.enc.backward(acts, head.x.row(0).transpose());
  }
  nn::adam_step(params, model.net.opt);
  tracker.record(reward);
}

}  // namespace hfnd::agent
