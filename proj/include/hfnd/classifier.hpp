#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hfnd/corpus.hpp"
#include "hfnd/encoder.hpp"
#include "hfnd/nn.hpp"

namespace hfnd::classifier {

// An instance paired with a supervision label. The label need not equal
// inst->relation: cleaned sets carry revised labels, and the denoising
// agent's pretraining carries action labels.
struct Labeled {
  const corpus::Instance* inst;
  int label;
};

// Encoder plus a softmax output layer; the chassis behind both the relation
// classifier and the three-way denoising policy.
struct SoftmaxNet {
  encoder::EncoderModel enc;
  nn::Param out_w;  // feature_size x k
  nn::Param out_b;  // 1 x k
  nn::AdamState opt;

  SoftmaxNet(const encoder::EncoderConfig& cfg, std::shared_ptr<const encoder::Vocab> vocab,
             int k_out, Rng& init_rng);

  int k_out() const { return static_cast<int>(out_w.value.cols()); }
  nn::Vec logits(const corpus::Instance& inst, bool training, Rng* rng) const;
  nn::Vec probs(const corpus::Instance& inst, bool training, Rng* rng) const;

  // Trainable views rebuilt on demand; order is stable, which the optimizer
  // slots rely on.
  nn::ParamSet trainable();
  std::vector<std::pair<std::string, nn::Mat*>> named_matrices();
};

// One pass over data in shuffled order with minibatch Adam updates on the
// mean cross-entropy. Returns the mean per-instance loss. Gradients flow
// from the labels actually given, which may differ from inst->relation.
double train_supervised_epoch(SoftmaxNet& net, std::span<const Labeled> data, int batch_size,
                              Rng& rng);

// Relation classifier over the full inventory.
struct ClassifierModel {
  corpus::RelationInventory inventory;
  SoftmaxNet net;

  ClassifierModel(const encoder::EncoderConfig& cfg, corpus::RelationInventory inv,
                  std::shared_ptr<const encoder::Vocab> vocab, Rng& init_rng);

  nn::Vec probs(const corpus::Instance& inst, bool training = false, Rng* rng = nullptr) const;
  // Argmax over all relations including NA; ties resolve to the lowest index.
  int predict(const corpus::Instance& inst) const;
  // Argmax over positive relations only; never returns NA.
  int revise(const corpus::Instance& inst) const;
};

double train_epoch(ClassifierModel& model, std::span<const Labeled> data, int batch_size,
                   Rng& rng);

}  // namespace hfnd::classifier
