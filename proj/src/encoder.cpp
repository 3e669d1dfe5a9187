#include "hfnd/encoder.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace hfnd::encoder {

Vocab::Vocab() {
  push("<pad>");
  push("<unk>");
}

void Vocab::push(const std::string& token) {
  if (index_.count(token)) throw std::invalid_argument("Vocab: duplicate token '" + token + "'");
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocab Vocab::build(const corpus::Dataset& train, int min_count) {
  if (min_count < 1) throw std::invalid_argument("Vocab::build: min_count must be >= 1");
  std::unordered_map<std::string, int> counts;
  for (const auto& inst : train.instances) {
    for (const auto& tok : inst.tokens) ++counts[tok];
  }
  // Insertion in first-occurrence order keeps ids deterministic.
  Vocab v;
  for (const auto& inst : train.instances) {
    for (const auto& tok : inst.tokens) {
      if (!v.index_.count(tok) && counts[tok] >= min_count) v.push(tok);
    }
  }
  return v;
}

int Vocab::id(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  for (const auto& tok : tokens_) out << tok << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  Vocab v;
  v.tokens_.clear();
  v.index_.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    v.push(line);
  }
  if (v.size() < 2 || v.tokens_[0] != "<pad>" || v.tokens_[1] != "<unk>") {
    throw std::invalid_argument(path + ": vocabulary must start with <pad> and <unk>");
  }
  return v;
}

int EmbeddingTable::pos_index(int offset) const {
  return std::clamp(offset, -l_max, l_max) + l_max;
}

void EmbeddingTable::init(int vocab_size, int dw, int dp, int lmax, Rng& rng) {
  if (vocab_size < 2 || dw < 1 || dp < 1 || lmax < 1) {
    throw std::invalid_argument("EmbeddingTable: bad dimensions");
  }
  d_w = dw;
  d_p = dp;
  l_max = lmax;
  word.name = "embed.word";
  word.init_uniform(vocab_size, d_w, 0.05, rng);
  word.value.row(Vocab::kPad).setZero();
  pos_head.name = "embed.pos_head";
  pos_head.init_uniform(2 * l_max + 1, d_p, 0.05, rng);
  pos_tail.name = "embed.pos_tail";
  pos_tail.init_uniform(2 * l_max + 1, d_p, 0.05, rng);
}

void EmbeddingTable::load_word_vectors(const std::string& path, const Vocab& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string token;
    row >> token;
    const int id = vocab.id(token);
    nn::Vec values(d_w);
    for (int j = 0; j < d_w; ++j) {
      if (!(row >> values(j))) {
        throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                    ": expected " + std::to_string(d_w) + " values");
      }
    }
    double extra;
    if (row >> extra) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": too many values");
    }
    if (id != Vocab::kUnk || token == "<unk>") {
      if (id != Vocab::kPad) word.value.row(id) = values.transpose();
    }
  }
}

nn::Mat embed(const std::vector<int>& ids, int head_start, int tail_start,
              const EmbeddingTable& table) {
  const auto n = static_cast<Eigen::Index>(ids.size());
  nn::Mat v(n, table.d_e());
  for (Eigen::Index t = 0; t < n; ++t) {
    const int id = ids[static_cast<std::size_t>(t)];
    if (id == Vocab::kPad) {
      v.row(t).head(table.d_w).setZero();
    } else {
      v.row(t).head(table.d_w) = table.word.value.row(id);
    }
    const int ti = static_cast<int>(t);
    v.row(t).segment(table.d_w, table.d_p) =
        table.pos_head.value.row(table.pos_index(ti - head_start));
    v.row(t).tail(table.d_p) = table.pos_tail.value.row(table.pos_index(ti - tail_start));
  }
  return v;
}

nn::Mat embed(const corpus::Instance& inst, const EmbeddingTable& table, const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(inst.tokens.size());
  for (const auto& tok : inst.tokens) ids.push_back(vocab.id(tok));
  return embed(ids, inst.head.first, inst.tail.first, table);
}

std::string pool_mode_name(PoolMode m) {
  return m == PoolMode::kCnn ? "cnn" : "pcnn";
}

std::pair<Eigen::Index, Eigen::Index> pcnn_cuts(const corpus::Instance& inst, int width,
                                                int padded_len) {
  const Eigen::Index t_cols = padded_len - width + 1;
  if (t_cols < 1) throw std::invalid_argument("pcnn_cuts: padded length shorter than the filter");
  auto clamp = [&](Eigen::Index c) { return std::clamp<Eigen::Index>(c, 0, t_cols); };
  const Eigen::Index cut1 = clamp(std::min(inst.head.first, inst.tail.first));
  const Eigen::Index cut2 = clamp(std::max(inst.head.first, inst.tail.first));
  return {cut1, std::max(cut1, cut2)};
}

EncoderModel::EncoderModel(const EncoderConfig& cfg, std::shared_ptr<const Vocab> vocab,
                           Rng& init_rng)
    : cfg_(cfg), vocab_(std::move(vocab)) {
  if (!vocab_) throw std::invalid_argument("EncoderModel: null vocabulary");
  if (cfg_.widths.empty() || cfg_.filters < 1) {
    throw std::invalid_argument("EncoderModel: need at least one filter width and one filter");
  }
  if (cfg_.dropout < 0.0 || cfg_.dropout >= 1.0) {
    throw std::invalid_argument("EncoderModel: dropout rate outside [0,1)");
  }
  table.init(vocab_->size(), cfg_.d_w, cfg_.d_p, cfg_.l_max, init_rng);
  for (const int f : cfg_.widths) {
    if (f < 1) throw std::invalid_argument("EncoderModel: filter width must be positive");
    ConvBank bank;
    bank.width = f;
    bank.weights.name = "conv.w" + std::to_string(f) + ".weights";
    bank.weights.init_xavier(cfg_.filters, static_cast<Eigen::Index>(f) * table.d_e(),
                             static_cast<Eigen::Index>(f) * table.d_e(), cfg_.filters, init_rng);
    bank.bias.name = "conv.w" + std::to_string(f) + ".bias";
    bank.bias.init_zero(1, cfg_.filters);
    banks.push_back(std::move(bank));
  }
}

int EncoderModel::feature_size() const {
  const int per_width = cfg_.mode == PoolMode::kPcnn ? 3 * cfg_.filters : cfg_.filters;
  return per_width * static_cast<int>(cfg_.widths.size());
}

std::vector<int> EncoderModel::padded_ids(const corpus::Instance& inst) const {
  std::vector<int> ids;
  const int max_width = *std::max_element(cfg_.widths.begin(), cfg_.widths.end());
  ids.reserve(std::max<std::size_t>(inst.tokens.size(), static_cast<std::size_t>(max_width)));
  for (const auto& tok : inst.tokens) ids.push_back(vocab_->id(tok));
  while (static_cast<int>(ids.size()) < max_width) ids.push_back(Vocab::kPad);
  return ids;
}

EncoderActivations EncoderModel::encode_trace(const corpus::Instance& inst, bool training,
                                              Rng* rng) const {
  EncoderActivations a;
  a.ids = padded_ids(inst);
  const auto n = static_cast<int>(a.ids.size());
  a.pos_head_idx.reserve(static_cast<std::size_t>(n));
  a.pos_tail_idx.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    a.pos_head_idx.push_back(table.pos_index(t - inst.head.first));
    a.pos_tail_idx.push_back(table.pos_index(t - inst.tail.first));
  }

  const nn::Mat v = embed(a.ids, inst.head.first, inst.tail.first, table);
  auto in_drop = nn::dropout(v, cfg_.dropout, rng, training);
  a.v_drop = std::move(in_drop.value);
  a.in_mask = std::move(in_drop.mask);

  nn::Vec feature(feature_size());
  Eigen::Index at = 0;
  a.widths.reserve(banks.size());
  for (const ConvBank& bank : banks) {
    const nn::Mat c = nn::conv_seq(a.v_drop, bank.weights.value, bank.bias.value);
    nn::PoolResult pool;
    if (cfg_.mode == PoolMode::kPcnn) {
      const auto [cut1, cut2] = pcnn_cuts(inst, bank.width, n);
      pool = nn::piecewise_max(c, cut1, cut2);
    } else {
      pool = nn::max_over_time(c);
    }
    feature.segment(at, pool.values.size()) = pool.values;
    at += pool.values.size();
    a.widths.push_back({std::move(pool.argmax_col), c.cols()});
  }

  nn::Mat feature_row = feature.transpose();
  auto out_drop = nn::dropout(feature_row, cfg_.dropout, rng, training);
  a.feature = out_drop.value.row(0).transpose();
  a.out_mask = out_drop.mask.row(0).transpose();
  return a;
}

nn::Vec EncoderModel::encode(const corpus::Instance& inst, bool training, Rng* rng) const {
  return encode_trace(inst, training, rng).feature;
}

void EncoderModel::backward(const EncoderActivations& acts, const nn::Vec& grad_feature) {
  if (grad_feature.size() != feature_size()) {
    throw std::invalid_argument("EncoderModel::backward: feature gradient size mismatch");
  }
  const nn::Vec g = grad_feature.cwiseProduct(acts.out_mask);
  nn::Mat gv = nn::Mat::Zero(acts.v_drop.rows(), acts.v_drop.cols());
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < banks.size(); ++i) {
    ConvBank& bank = banks[i];
    const auto& wt = acts.widths[i];
    const auto block = static_cast<Eigen::Index>(wt.argmax_col.size());
    const nn::Mat gc = nn::pool_backward(g.segment(at, block), wt.argmax_col, cfg_.filters, wt.t_cols);
    at += block;
    auto grads = nn::conv_seq_backward(gc, acts.v_drop, bank.weights.value);
    bank.weights.grad += grads.filters;
    bank.bias.grad += grads.bias;
    gv += grads.v;
  }
  gv = gv.cwiseProduct(acts.in_mask);

  for (Eigen::Index t = 0; t < gv.rows(); ++t) {
    const int id = acts.ids[static_cast<std::size_t>(t)];
    if (id != Vocab::kPad && !table.freeze_words) {
      table.word.grad.row(id) += gv.row(t).head(table.d_w);
    }
    table.pos_head.grad.row(acts.pos_head_idx[static_cast<std::size_t>(t)]) +=
        gv.row(t).segment(table.d_w, table.d_p);
    table.pos_tail.grad.row(acts.pos_tail_idx[static_cast<std::size_t>(t)]) +=
        gv.row(t).tail(table.d_p);
  }
}

void EncoderModel::collect_trainable(nn::ParamSet& out) {
  if (!table.freeze_words) out.add(table.word);
  out.add(table.pos_head);
  out.add(table.pos_tail);
  for (ConvBank& bank : banks) {
    out.add(bank.weights);
    out.add(bank.bias);
  }
}

std::vector<std::pair<std::string, nn::Mat*>> EncoderModel::named_matrices() {
  std::vector<std::pair<std::string, nn::Mat*>> out;
  out.emplace_back(table.word.name, &table.word.value);
  out.emplace_back(table.pos_head.name, &table.pos_head.value);
  out.emplace_back(table.pos_tail.name, &table.pos_tail.value);
  for (ConvBank& bank : banks) {
    out.emplace_back(bank.weights.name, &bank.weights.value);
    out.emplace_back(bank.bias.name, &bank.bias.value);
  }
  return out;
}

}  // namespace hfnd::encoder
