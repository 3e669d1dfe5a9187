#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hfnd/corpus.hpp"
#include "hfnd/nn.hpp"
#include "hfnd/rng.hpp"

namespace hfnd::encoder {

// Token index. Id 0 is the padding token and id 1 the unknown-token bucket;
// both are always present.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab();
  // Tokens appearing fewer than min_count times in the training split are
  // left out and map to the unknown bucket. In particular this strips
  // single-occurrence surface forms (e.g. entity names unique to one
  // sentence), which models would otherwise use to memorize individual
  // training instances instead of generalizing over context patterns.
  static Vocab build(const corpus::Dataset& train, int min_count = 1);
  static Vocab load(const std::string& path);
  void save(const std::string& path) const;

  int id(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;

  void push(const std::string& token);
};

// Word and position lookup tables. Position tables index the clipped signed
// distance to an entity span start, shifted by l_max into [0, 2*l_max].
// The padding word vector is structurally zero: it is never read and never
// receives gradient, so it cannot drift.
struct EmbeddingTable {
  int d_w = 0;
  int d_p = 0;
  int l_max = 0;
  bool freeze_words = false;
  nn::Param word;      // vocab x d_w
  nn::Param pos_head;  // (2*l_max+1) x d_p
  nn::Param pos_tail;  // (2*l_max+1) x d_p

  int d_e() const { return d_w + 2 * d_p; }
  int pos_index(int offset) const;  // clip to [-l_max, l_max], shift by l_max
  void init(int vocab_size, int d_w, int d_p, int l_max, Rng& rng);

  // Overwrites rows for tokens found in a text file of lines
  // "token v1 v2 ... v_{d_w}". Unlisted tokens keep their random init.
  void load_word_vectors(const std::string& path, const Vocab& vocab);
};

// Token-major embedding of a padded id sequence: row t is
// [word(ids[t]) | pos_head(t - head_start) | pos_tail(t - tail_start)].
nn::Mat embed(const std::vector<int>& ids, int head_start, int tail_start,
              const EmbeddingTable& table);
// Convenience overload over an unpadded instance.
nn::Mat embed(const corpus::Instance& inst, const EmbeddingTable& table, const Vocab& vocab);

enum class PoolMode { kCnn, kPcnn };

std::string pool_mode_name(PoolMode m);

// Segment cut columns for piecewise pooling of an instance convolved at the
// given filter width: cut1 = min of the span starts, cut2 = the later span
// start, both clamped to the valid column range [0, T].
std::pair<Eigen::Index, Eigen::Index> pcnn_cuts(const corpus::Instance& inst, int width,
                                                int padded_len);

struct EncoderConfig {
  PoolMode mode = PoolMode::kCnn;
  int d_w = 300;
  int d_p = 50;
  int l_max = 60;
  int filters = 230;              // per width
  std::vector<int> widths = {2, 3, 4, 5};
  double dropout = 0.5;
};

// One filter bank per width: weights h x (f*d_e), bias 1 x h.
struct ConvBank {
  int width = 0;
  nn::Param weights;
  nn::Param bias;
};

// Everything the backward pass needs from one forward pass.
struct EncoderActivations {
  std::vector<int> ids;
  std::vector<int> pos_head_idx, pos_tail_idx;
  nn::Mat v_drop;    // embedded rows after input dropout
  nn::Mat in_mask;
  nn::Vec out_mask;
  struct WidthTrace {
    std::vector<Eigen::Index> argmax_col;
    Eigen::Index t_cols = 0;
  };
  std::vector<WidthTrace> widths;
  nn::Vec feature;
};

// Sentence encoder: embed -> dropout -> per-width convolution -> max or
// piecewise pooling -> concatenation -> dropout. Inference (training=false)
// draws nothing from the rng and is deterministic.
class EncoderModel {
 public:
  EncoderModel(const EncoderConfig& cfg, std::shared_ptr<const Vocab> vocab, Rng& init_rng);

  const EncoderConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return *vocab_; }
  std::shared_ptr<const Vocab> vocab_ptr() const { return vocab_; }
  int feature_size() const;

  nn::Vec encode(const corpus::Instance& inst, bool training, Rng* rng) const;
  EncoderActivations encode_trace(const corpus::Instance& inst, bool training, Rng* rng) const;
  // Accumulates parameter gradients; grad_feature is d(loss)/d(feature).
  void backward(const EncoderActivations& acts, const nn::Vec& grad_feature);

  void collect_trainable(nn::ParamSet& out);
  std::vector<std::pair<std::string, nn::Mat*>> named_matrices();

  EmbeddingTable table;
  std::vector<ConvBank> banks;

  // Used by grad-check harnesses: flips pooling mode in place; parameters
  // and shapes are mode-independent.
  void set_mode(PoolMode m) { cfg_.mode = m; }

 private:
  EncoderConfig cfg_;
  std::shared_ptr<const Vocab> vocab_;

  std::vector<int> padded_ids(const corpus::Instance& inst) const;
};

}  // namespace hfnd::encoder
