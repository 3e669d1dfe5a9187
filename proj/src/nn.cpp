#include "hfnd/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace hfnd::nn {

void Param::init_zero(Eigen::Index rows, Eigen::Index cols) {
  value = Mat::Zero(rows, cols);
  grad = Mat::Zero(rows, cols);
}

void Param::init_uniform(Eigen::Index rows, Eigen::Index cols, double limit, Rng& rng) {
  value.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      value(i, j) = rng.uniform(-limit, limit);
    }
  }
  grad = Mat::Zero(rows, cols);
}

void Param::init_xavier(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                        Eigen::Index fan_out, Rng& rng) {
  init_uniform(rows, cols, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

Eigen::Index ParamSet::scalar_count() const {
  Eigen::Index n = 0;
  for (const Param* p : items) n += p->value.size();
  return n;
}

void ParamSet::zero_grads() {
  for (Param* p : items) p->grad.setZero();
}

void ParamSet::scale_grads(double s) {
  for (Param* p : items) p->grad *= s;
}

Vec ParamSet::flatten_values() const {
  Vec out(scalar_count());
  Eigen::Index at = 0;
  for (const Param* p : items) {
    out.segment(at, p->value.size()) = Eigen::Map<const Vec>(p->value.data(), p->value.size());
    at += p->value.size();
  }
  return out;
}

Vec ParamSet::flatten_grads() const {
  Vec out(scalar_count());
  Eigen::Index at = 0;
  for (const Param* p : items) {
    out.segment(at, p->grad.size()) = Eigen::Map<const Vec>(p->grad.data(), p->grad.size());
    at += p->grad.size();
  }
  return out;
}

void ParamSet::set_values(const Vec& flat) {
  if (flat.size() != scalar_count()) {
    throw std::invalid_argument("ParamSet::set_values: size mismatch");
  }
  Eigen::Index at = 0;
  for (Param* p : items) {
    Eigen::Map<Vec>(p->value.data(), p->value.size()) = flat.segment(at, p->value.size());
    at += p->value.size();
  }
}

void adam_step(ParamSet& params, AdamState& state) {
  if (state.m.empty()) {
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const Param* p : params.items) {
      state.m.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter count changed between steps");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.items.size(); ++i) {
    Param& p = *params.items[i];
    if (state.m[i].rows() != p.value.rows() || state.m[i].cols() != p.value.cols()) {
      throw std::invalid_argument("adam_step: parameter shape changed between steps");
    }
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * p.grad;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * p.grad.cwiseProduct(p.grad);
    const Mat m_hat = state.m[i] / bc1;
    const Mat v_hat = state.v[i] / bc2;
    p.value -= state.lr * m_hat.cwiseQuotient(v_hat.cwiseSqrt() + Mat::Constant(v_hat.rows(), v_hat.cols(), state.eps));
    p.grad.setZero();
  }
}

Mat affine(const Mat& x, const Mat& w, const Mat& b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw std::invalid_argument("affine: shape mismatch");
  }
  Mat out = x * w;
  out.rowwise() += b.row(0);
  return out;
}

AffineGrads affine_backward(const Mat& grad_out, const Mat& x, const Mat& w) {
  AffineGrads g;
  g.x = grad_out * w.transpose();
  g.w = x.transpose() * grad_out;
  g.b = grad_out.colwise().sum();
  return g;
}

namespace {

// Rows t..t+f-1 of a row-major L x d matrix are one contiguous block of f*d
// doubles; the unfolded view row is a straight memory map.
Eigen::Index filter_width(const Mat& v, const Mat& filters) {
  if (v.cols() == 0 || filters.cols() % v.cols() != 0) {
    throw std::invalid_argument("conv_seq: filter row length is not a multiple of the token width");
  }
  const Eigen::Index f = filters.cols() / v.cols();
  if (f < 1 || v.rows() < f) {
    throw std::invalid_argument("conv_seq: sequence shorter than the filter width; pad first");
  }
  return f;
}

Mat unfold(const Mat& v, Eigen::Index f) {
  const Eigen::Index t_cols = v.rows() - f + 1;
  const Eigen::Index d = v.cols();
  Mat x(t_cols, f * d);
  for (Eigen::Index t = 0; t < t_cols; ++t) {
    x.row(t) = Eigen::Map<const Eigen::RowVectorXd>(v.data() + t * d, f * d);
  }
  return x;
}

}  // namespace

Mat conv_seq(const Mat& v, const Mat& filters, const Mat& bias) {
  const Eigen::Index f = filter_width(v, filters);
  if (bias.rows() != 1 || bias.cols() != filters.rows()) {
    throw std::invalid_argument("conv_seq: bias shape mismatch");
  }
  Mat c = filters * unfold(v, f).transpose();
  c.colwise() += bias.row(0).transpose();
  return c;
}

ConvSeqGrads conv_seq_backward(const Mat& grad_out, const Mat& v, const Mat& filters) {
  const Eigen::Index f = filter_width(v, filters);
  const Mat x = unfold(v, f);
  if (grad_out.rows() != filters.rows() || grad_out.cols() != x.rows()) {
    throw std::invalid_argument("conv_seq_backward: gradient shape mismatch");
  }
  ConvSeqGrads g;
  g.filters = grad_out * x;
  g.bias = grad_out.rowwise().sum().transpose();
  g.v = Mat::Zero(v.rows(), v.cols());
  const Mat gx = filters.transpose() * grad_out;  // (f*d) x T
  const Eigen::Index d = v.cols();
  for (Eigen::Index t = 0; t < gx.cols(); ++t) {
    Eigen::Map<Vec>(g.v.data() + t * d, f * d) += gx.col(t);
  }
  return g;
}

PoolResult max_over_time(const Mat& c) {
  if (c.cols() < 1) throw std::invalid_argument("max_over_time: empty sequence");
  PoolResult r;
  r.values.resize(c.rows());
  r.argmax_col.resize(static_cast<std::size_t>(c.rows()));
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index t = 1; t < c.cols(); ++t) {
      if (c(i, t) > c(i, best)) best = t;
    }
    r.values(i) = c(i, best);
    r.argmax_col[static_cast<std::size_t>(i)] = best;
  }
  return r;
}

PoolResult piecewise_max(const Mat& c, Eigen::Index cut1, Eigen::Index cut2) {
  if (cut1 < 0 || cut1 > cut2 || cut2 > c.cols()) {
    throw std::invalid_argument("piecewise_max: cuts out of order or range");
  }
  const Eigen::Index h = c.rows();
  PoolResult r;
  r.values = Vec::Zero(3 * h);
  r.argmax_col.assign(static_cast<std::size_t>(3 * h), -1);
  const Eigen::Index lo[3] = {0, cut1, cut2};
  const Eigen::Index hi[3] = {cut1, cut2, c.cols()};
  for (int seg = 0; seg < 3; ++seg) {
    if (lo[seg] == hi[seg]) continue;
    for (Eigen::Index i = 0; i < h; ++i) {
      Eigen::Index best = lo[seg];
      for (Eigen::Index t = lo[seg] + 1; t < hi[seg]; ++t) {
        if (c(i, t) > c(i, best)) best = t;
      }
      r.values(seg * h + i) = c(i, best);
      r.argmax_col[static_cast<std::size_t>(seg * h + i)] = best;
    }
  }
  return r;
}

Mat pool_backward(const Vec& grad, const std::vector<Eigen::Index>& argmax_col,
                  Eigen::Index rows, Eigen::Index cols) {
  if (grad.size() != static_cast<Eigen::Index>(argmax_col.size()) || grad.size() % rows != 0) {
    throw std::invalid_argument("pool_backward: shape mismatch");
  }
  Mat out = Mat::Zero(rows, cols);
  for (Eigen::Index k = 0; k < grad.size(); ++k) {
    const Eigen::Index t = argmax_col[static_cast<std::size_t>(k)];
    if (t < 0) continue;
    out(k % rows, t) += grad(k);
  }
  return out;
}

Vec softmax(const Vec& logits) {
  if (logits.size() < 1) throw std::invalid_argument("softmax: empty logits");
  Vec z = (logits.array() - logits.maxCoeff()).exp();
  return z / z.sum();
}

SoftmaxXent softmax_xent(const Vec& logits, Eigen::Index target) {
  if (target < 0 || target >= logits.size()) {
    throw std::invalid_argument("softmax_xent: target out of range");
  }
  SoftmaxXent r;
  r.probs = softmax(logits);
  r.loss = -std::log(r.probs(target));
  r.grad_logits = r.probs;
  r.grad_logits(target) -= 1.0;
  return r;
}

DropoutResult dropout(const Mat& x, double rate, Rng* rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must be in [0,1)");
  }
  DropoutResult r;
  r.mask = Mat::Ones(x.rows(), x.cols());
  if (training && rate > 0.0) {
    if (rng == nullptr) throw std::invalid_argument("dropout: training mode needs an rng");
    const double keep_scale = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        r.mask(i, j) = rng->uniform() < rate ? 0.0 : keep_scale;
      }
    }
  }
  r.value = x.cwiseProduct(r.mask);
  return r;
}

Eigen::Index argmax_lowest(const Vec& v) {
  if (v.size() < 1) throw std::invalid_argument("argmax_lowest: empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

Eigen::Index sample_categorical(const Vec& probs, Rng& rng) {
  if (probs.size() < 1) throw std::invalid_argument("sample_categorical: empty distribution");
  const double u = rng.uniform() * probs.sum();
  double cdf = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    cdf += probs(i);
    if (u < cdf) return i;
  }
  return probs.size() - 1;
}

double grad_check(const std::function<double(const Vec&)>& fn, const Vec& point,
                  const Vec& analytic_grad, double step) {
  if (point.size() != analytic_grad.size()) {
    throw std::invalid_argument("grad_check: gradient size mismatch");
  }
  if (!point.allFinite() || !analytic_grad.allFinite()) {
    throw std::invalid_argument("grad_check: non-finite input");
  }
  double worst = 0.0;
  Vec probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe(i) = point(i) + step;
    const double up = fn(probe);
    probe(i) = point(i) - step;
    const double down = fn(probe);
    probe(i) = point(i);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::runtime_error("grad_check: non-finite function value");
    }
    const double numeric = (up - down) / (2.0 * step);
    const double ana = analytic_grad(i);
    const double denom = std::max(1e-8, std::max(std::abs(numeric), std::abs(ana)));
    worst = std::max(worst, std::abs(numeric - ana) / denom);
  }
  return worst;
}

}  // namespace hfnd::nn
