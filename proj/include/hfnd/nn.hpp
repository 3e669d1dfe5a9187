#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "hfnd/rng.hpp"

namespace hfnd::nn {

// Row-major storage so a flattened view of a matrix reads in row order; the
// checkpoint format and the grad-check probes rely on that.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// A named parameter with its gradient accumulator. Biases are 1xN matrices so
// every parameter is a Mat and the optimizer and checkpoints stay uniform.
struct Param {
  std::string name;
  Mat value;
  Mat grad;

  void init_zero(Eigen::Index rows, Eigen::Index cols);
  void init_uniform(Eigen::Index rows, Eigen::Index cols, double limit, Rng& rng);
  // Xavier range sqrt(6 / (fan_in + fan_out)).
  void init_xavier(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                   Eigen::Index fan_out, Rng& rng);
};

// Non-owning, ordered view over the trainable parameters of a model. The
// order is part of the contract: optimizer slots are matched by position.
struct ParamSet {
  std::vector<Param*> items;

  void add(Param& p) { items.push_back(&p); }
  std::size_t size() const { return items.size(); }
  Eigen::Index scalar_count() const;
  void zero_grads();
  void scale_grads(double s);

  // Row-order flattening used by the finite-difference checks.
  Vec flatten_values() const;
  Vec flatten_grads() const;
  void set_values(const Vec& flat);
};

// Adam with bias correction. Moment slots are created on the first step and
// keyed by position in the ParamSet, so the set layout must not change
// between steps. The learning rate may change between steps; moments persist.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<Mat> m, v;
};

// Applies one update from the accumulated gradients, then zeroes them.
void adam_step(ParamSet& params, AdamState& state);

// y = x * W + b. x: N x d, W: d x K, b: 1 x K broadcast over rows.
Mat affine(const Mat& x, const Mat& w, const Mat& b);
struct AffineGrads {
  Mat x, w, b;
};
AffineGrads affine_backward(const Mat& grad_out, const Mat& x, const Mat& w);

// 1-D valid convolution over a token-major sequence. v: L x d rows are token
// vectors; filters: h x (f*d), row i is filter i flattened in row order;
// bias: 1 x h. Output: h x T with T = L - f + 1. Requires L >= f.
Mat conv_seq(const Mat& v, const Mat& filters, const Mat& bias);
struct ConvSeqGrads {
  Mat v, filters, bias;
};
ConvSeqGrads conv_seq_backward(const Mat& grad_out, const Mat& v, const Mat& filters);

// Pooling results carry the winning column per output entry so the backward
// pass routes gradient only to the argmax. Entries for empty segments hold
// column -1 and receive no gradient.
struct PoolResult {
  Vec values;
  std::vector<Eigen::Index> argmax_col;
};

// Row-wise max over all T columns; ties resolve to the lowest column index.
PoolResult max_over_time(const Mat& c);

// Segment-wise max with columns split at cut1 and cut2: [0,cut1), [cut1,cut2),
// [cut2,T). Output is segment-major: values[seg*h + i] is row i's max within
// segment seg. Empty segments contribute zeros. Requires 0<=cut1<=cut2<=T.
PoolResult piecewise_max(const Mat& c, Eigen::Index cut1, Eigen::Index cut2);

// Shared backward for both pooling ops; output entry k maps to row k % rows.
Mat pool_backward(const Vec& grad, const std::vector<Eigen::Index>& argmax_col,
                  Eigen::Index rows, Eigen::Index cols);

// Max-shifted softmax; probabilities sum to 1 within 1e-12.
Vec softmax(const Vec& logits);

// Cross-entropy of softmax(logits) against a one-hot target.
// Gradient w.r.t. logits is softmax - onehot.
struct SoftmaxXent {
  double loss;
  Vec grad_logits;
  Vec probs;
};
SoftmaxXent softmax_xent(const Vec& logits, Eigen::Index target);

// Inverted dropout: kept entries are scaled by 1/(1-rate) so inference is the
// identity. training=false returns x unchanged with an all-ones mask.
// The backward pass is grad .* mask. Requires 0 <= rate < 1.
struct DropoutResult {
  Mat value;
  Mat mask;
};
DropoutResult dropout(const Mat& x, double rate, Rng* rng, bool training);

// Index of the largest entry; ties resolve to the lowest index.
Eigen::Index argmax_lowest(const Vec& v);

// Draws an index from a probability vector (sums to ~1) via its CDF.
Eigen::Index sample_categorical(const Vec& probs, Rng& rng);

// Central-difference check: returns the worst relative error between the
// analytic gradient and (f(x+h e_i) - f(x-h e_i)) / 2h over all coordinates,
// with the relative error denominator floored at 1e-8. Errors out on
// non-finite values. fn must be pure.
double grad_check(const std::function<double(const Vec&)>& fn, const Vec& point,
                  const Vec& analytic_grad, double step = 1e-5);

}  // namespace hfnd::nn
