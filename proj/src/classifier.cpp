#include "hfnd/classifier.hpp"

#include <numeric>
#include <stdexcept>

namespace hfnd::classifier {

SoftmaxNet::SoftmaxNet(const encoder::EncoderConfig& cfg,
                       std::shared_ptr<const encoder::Vocab> vocab, int k_out, Rng& init_rng)
    : enc(cfg, std::move(vocab), init_rng) {
  if (k_out < 2) throw std::invalid_argument("SoftmaxNet: need at least two output classes");
  out_w.name = "out.weights";
  out_w.init_xavier(enc.feature_size(), k_out, enc.feature_size(), k_out, init_rng);
  out_b.name = "out.bias";
  out_b.init_zero(1, k_out);
}

nn::Vec SoftmaxNet::logits(const corpus::Instance& inst, bool training, Rng* rng) const {
  const nn::Vec feature = enc.encode(inst, training, rng);
  const nn::Mat out = nn::affine(feature.transpose(), out_w.value, out_b.value);
  return out.row(0).transpose();
}

nn::Vec SoftmaxNet::probs(const corpus::Instance& inst, bool training, Rng* rng) const {
  return nn::softmax(logits(inst, training, rng));
}

nn::ParamSet SoftmaxNet::trainable() {
  nn::ParamSet set;
  enc.collect_trainable(set);
  set.add(out_w);
  set.add(out_b);
  return set;
}

std::vector<std::pair<std::string, nn::Mat*>> SoftmaxNet::named_matrices() {
  auto out = enc.named_matrices();
  out.emplace_back(out_w.name, &out_w.value);
  out.emplace_back(out_b.name, &out_b.value);
  return out;
}

double train_supervised_epoch(SoftmaxNet& net, std::span<const Labeled> data, int batch_size,
                              Rng& rng) {
  if (data.empty()) throw std::invalid_argument("train_supervised_epoch: empty data");
  if (batch_size < 1) throw std::invalid_argument("train_supervised_epoch: bad batch size");

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  nn::ParamSet params = net.trainable();
  double total_loss = 0.0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    params.zero_grads();
    for (std::size_t j = start; j < end; ++j) {
      const Labeled& ex = data[order[j]];
      if (ex.label < 0 || ex.label >= net.k_out()) {
        throw std::invalid_argument("train_supervised_epoch: label out of range for '" +
                                    ex.inst->id + "'");
      }
      const auto acts = net.enc.encode_trace(*ex.inst, true, &rng);
      const nn::Mat logits = nn::affine(acts.feature.transpose(), net.out_w.value, net.out_b.value);
      const auto sx = nn::softmax_xent(logits.row(0).transpose(), ex.label);
      total_loss += sx.loss;
      const auto head = nn::affine_backward(sx.grad_logits.transpose(), acts.feature.transpose(),
                                            net.out_w.value);
      net.out_w.grad += head.w;
      net.out_b.grad += head.b;
      net.enc.backward(acts, head.x.row(0).transpose());
    }
    params.scale_grads(1.0 / static_cast<double>(end - start));
    nn::adam_step(params, net.opt);
  }
  return total_loss / static_cast<double>(data.size());
}

ClassifierModel::ClassifierModel(const encoder::EncoderConfig& cfg, corpus::RelationInventory inv,
                                 std::shared_ptr<const encoder::Vocab> vocab, Rng& init_rng)
    : inventory(std::move(inv)), net(cfg, std::move(vocab), inventory.size(), init_rng) {}

nn::Vec ClassifierModel::probs(const corpus::Instance& inst, bool training, Rng* rng) const {
  return net.probs(inst, training, rng);
}

int ClassifierModel::predict(const corpus::Instance& inst) const {
  return static_cast<int>(nn::argmax_lowest(net.logits(inst, false, nullptr)));
}

int ClassifierModel::revise(const corpus::Instance& inst) const {
  if (inventory.positive_count() < 1) {
    throw std::invalid_argument("revise: inventory has no positive relation");
  }
  const nn::Vec l = net.logits(inst, false, nullptr);
  int best = -1;
  for (int r = 0; r < inventory.size(); ++r) {
    if (inventory.is_na(r)) continue;
    if (best < 0 || l(r) > l(best)) best = r;
  }
  return best;
}

double train_epoch(ClassifierModel& model, std::span<const Labeled> data, int batch_size,
                   Rng& rng) {
  return train_supervised_epoch(model.net, data, batch_size, rng);
}

}  // namespace hfnd::classifier
