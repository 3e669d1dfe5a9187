#include "hfnd/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>

#include "hfnd/agent.hpp"
#include "hfnd/classifier.hpp"
#include "hfnd/corpus.hpp"
#include "hfnd/encoder.hpp"
#include "hfnd/nn.hpp"
#include "hfnd/rng.hpp"

namespace hfnd::gradcheck {

namespace {

using nn::Mat;
using nn::Vec;

Mat random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng, double limit = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
  }
  return m;
}

// Row entries separated by at least ~0.15 so a 1e-5 probe never crosses an
// argmax tie.
Mat spaced_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    std::vector<double> levels;
    for (Eigen::Index j = 0; j < cols; ++j) {
      levels.push_back(0.25 * static_cast<double>(j) + rng.uniform(-0.05, 0.05));
    }
    rng.shuffle(levels);
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = levels[static_cast<std::size_t>(j)];
  }
  return m;
}

Vec concat(const std::vector<const Mat*>& parts) {
  Eigen::Index total = 0;
  for (const Mat* p : parts) total += p->size();
  Vec out(total);
  Eigen::Index at = 0;
  for (const Mat* p : parts) {
    out.segment(at, p->size()) = Eigen::Map<const Vec>(p->data(), p->size());
    at += p->size();
  }
  return out;
}

void scatter(const Vec& flat, const std::vector<Mat*>& parts) {
  Eigen::Index at = 0;
  for (Mat* p : parts) {
    Eigen::Map<Vec>(p->data(), p->size()) = flat.segment(at, p->size());
    at += p->size();
  }
}

void corrupt_largest(Vec& g) {
  Eigen::Index worst = 0;
  for (Eigen::Index i = 1; i < g.size(); ++i) {
    if (std::abs(g(i)) > std::abs(g(worst))) worst = i;
  }
  g(worst) *= 1.1;
}

CheckRow make_row(const std::string& name, const std::function<double(const Vec&)>& fn,
                  const Vec& point, Vec analytic, double tol, bool corrupt) {
  if (corrupt) corrupt_largest(analytic);
  CheckRow row;
  row.name = name;
  row.tolerance = tol;
  row.err = nn::grad_check(fn, point, analytic, 1e-5);
  row.pass = row.err < tol;
  return row;
}

// ---- primitive ops ------------------------------------------------------

CheckRow check_affine(Rng& rng, bool corrupt) {
  Mat x = random_mat(3, 4, rng), w = random_mat(4, 2, rng), b = random_mat(1, 2, rng);
  const Mat u = random_mat(3, 2, rng);
  const Vec point = concat({&x, &w, &b});
  auto fn = [&](const Vec& v) {
    Mat xx = x, ww = w, bb = b;
    scatter(v, {&xx, &ww, &bb});
    return nn::affine(xx, ww, bb).cwiseProduct(u).sum();
  };
  const auto g = nn::affine_backward(u, x, w);
  return make_row("affine", fn, point, concat({&g.x, &g.w, &g.b}), kLayerTol, corrupt);
}

CheckRow check_conv_seq(Rng& rng, bool corrupt) {
  Mat v = random_mat(6, 3, rng), filters = random_mat(4, 6, rng), bias = random_mat(1, 4, rng);
  const Mat u = random_mat(4, 5, rng);
  const Vec point = concat({&v, &filters, &bias});
  auto fn = [&](const Vec& p) {
    Mat vv = v, ff = filters, bb = bias;
    scatter(p, {&vv, &ff, &bb});
    return nn::conv_seq(vv, ff, bb).cwiseProduct(u).sum();
  };
  const auto g = nn::conv_seq_backward(u, v, filters);
  return make_row("conv_seq", fn, point, concat({&g.v, &g.filters, &g.bias}), kLayerTol, corrupt);
}

CheckRow check_max_over_time(Rng& rng, bool corrupt) {
  Mat c = spaced_mat(3, 6, rng);
  const Mat u = random_mat(3, 1, rng);
  auto fn = [&](const Vec& p) {
    Mat cc = c;
    scatter(p, {&cc});
    return nn::max_over_time(cc).values.dot(u.col(0));
  };
  const auto pool = nn::max_over_time(c);
  Mat g = nn::pool_backward(u.col(0), pool.argmax_col, c.rows(), c.cols());
  return make_row("max_over_time", fn, concat({&c}), concat({&g}), kLayerTol, corrupt);
}

CheckRow check_piecewise_max(Rng& rng, bool corrupt) {
  Mat c = spaced_mat(3, 8, rng);
  const Mat u = random_mat(9, 1, rng);
  auto fn = [&](const Vec& p) {
    Mat cc = c;
    scatter(p, {&cc});
    return nn::piecewise_max(cc, 2, 5).values.dot(u.col(0));
  };
  const auto pool = nn::piecewise_max(c, 2, 5);
  Mat g = nn::pool_backward(u.col(0), pool.argmax_col, c.rows(), c.cols());
  return make_row("piecewise_max", fn, concat({&c}), concat({&g}), kLayerTol, corrupt);
}

CheckRow check_softmax_xent(Rng& rng, bool corrupt) {
  Mat logits = random_mat(1, 5, rng, 2.0);
  auto fn = [&](const Vec& p) {
    Mat ll = logits;
    scatter(p, {&ll});
    return nn::softmax_xent(ll.row(0).transpose(), 2).loss;
  };
  const auto sx = nn::softmax_xent(logits.row(0).transpose(), 2);
  Mat g = sx.grad_logits.transpose();
  return make_row("softmax_xent", fn, concat({&logits}), concat({&g}), kLayerTol, corrupt);
}

CheckRow check_dropout_mask(Rng& rng, bool corrupt) {
  Mat x = random_mat(4, 5, rng);
  const auto dr = nn::dropout(x, 0.5, &rng, true);
  const Mat mask = dr.mask;  // held fixed; the op's randomness is not probed
  const Mat u = random_mat(4, 5, rng);
  auto fn = [&](const Vec& p) {
    Mat xx = x;
    scatter(p, {&xx});
    return xx.cwiseProduct(mask).cwiseProduct(u).sum();
  };
  Mat g = u.cwiseProduct(mask);
  return make_row("dropout_mask", fn, concat({&x}), concat({&g}), kLayerTol, corrupt);
}

// ---- model fixtures -----------------------------------------------------

corpus::Instance make_inst(std::string id, std::vector<std::string> tokens, corpus::Span head,
                           corpus::Span tail, int rel) {
  corpus::Instance inst;
  inst.id = std::move(id);
  inst.tokens = std::move(tokens);
  inst.head = head;
  inst.tail = tail;
  inst.relation = rel;
  return inst;
}

struct Fixture {
  corpus::RelationInventory inventory;
  std::vector<corpus::Instance> instances;
  std::shared_ptr<const encoder::Vocab> vocab;
};

// Covers the interior case, entities at both sentence edges (one empty
// piecewise segment), and a sentence shorter than the widest filter.
Fixture model_fixture() {
  Fixture f;
  f.inventory = corpus::RelationInventory({"NA", "R01", "R02", "R03"}, 0);
  f.instances.push_back(
      make_inst("g0", {"t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7"}, {1, 1}, {5, 6}, 1));
  f.instances.push_back(make_inst("g1", {"t2", "t4", "t0", "t6", "t1"}, {0, 0}, {4, 4}, 2));
  f.instances.push_back(make_inst("g2", {"t3", "t5"}, {0, 0}, {1, 1}, 3));
  corpus::Dataset d;
  d.inventory = f.inventory;
  d.instances = f.instances;
  f.vocab = std::make_shared<encoder::Vocab>(encoder::Vocab::build(d));
  return f;
}

encoder::EncoderConfig small_config(encoder::PoolMode mode) {
  encoder::EncoderConfig cfg;
  cfg.mode = mode;
  cfg.d_w = 6;
  cfg.d_p = 3;
  cfg.l_max = 8;
  cfg.filters = 4;
  cfg.widths = {2, 3};
  cfg.dropout = 0.5;  // inactive at inference, where these checks run
  return cfg;
}

void check_encoder(std::vector<CheckRow>& rows, encoder::PoolMode mode, std::uint64_t seed,
                   bool corrupt) {
  Rng rng(mix_seed(seed, 11));
  const Fixture f = model_fixture();
  encoder::EncoderModel enc(small_config(mode), f.vocab, rng);
  nn::ParamSet params;
  enc.collect_trainable(params);
  const Vec point = params.flatten_values();

  for (const auto& inst : f.instances) {
    Vec u(enc.feature_size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.uniform(-1.0, 1.0);

    auto fn = [&](const Vec& v) {
      params.set_values(v);
      return enc.encode(inst, false, nullptr).dot(u);
    };
    params.set_values(point);
    params.zero_grads();
    const auto acts = enc.encode_trace(inst, false, nullptr);
    enc.backward(acts, u);
    const Vec analytic = params.flatten_grads();
    rows.push_back(make_row("encoder/" + encoder::pool_mode_name(mode) + "/" + inst.id, fn, point,
                            analytic, kModelTol, corrupt));
    params.set_values(point);
  }
}

void check_classifier(std::vector<CheckRow>& rows, encoder::PoolMode mode, std::uint64_t seed,
                      bool corrupt) {
  Rng rng(mix_seed(seed, 13));
  const Fixture f = model_fixture();
  classifier::ClassifierModel rc(small_config(mode), f.inventory, f.vocab, rng);
  nn::ParamSet params = rc.net.trainable();
  const Vec point = params.flatten_values();

  for (const auto& inst : f.instances) {
    const int target = inst.relation;
    auto fn = [&](const Vec& v) {
      params.set_values(v);
      return nn::softmax_xent(rc.net.logits(inst, false, nullptr), target).loss;
    };
    params.set_values(point);
    params.zero_grads();
    const auto acts = rc.net.enc.encode_trace(inst, false, nullptr);
    const Mat logits = nn::affine(acts.feature.transpose(), rc.net.out_w.value, rc.net.out_b.value);
    const auto sx = nn::softmax_xent(logits.row(0).transpose(), target);
    const auto head =
        nn::affine_backward(sx.grad_logits.transpose(), acts.feature.transpose(), rc.net.out_w.value);
    rc.net.out_w.grad += head.w;
    rc.net.out_b.grad += head.b;
    rc.net.enc.backward(acts, head.x.row(0).transpose());
    const Vec analytic = params.flatten_grads();
    rows.push_back(make_row("classifier/" + encoder::pool_mode_name(mode) + "/" + inst.id, fn,
                            point, analytic, kModelTol, corrupt));
    params.set_values(point);
  }
}

void check_agent(std::vector<CheckRow>& rows, encoder::PoolMode mode, std::uint64_t seed,
                 bool corrupt) {
  Rng rng(mix_seed(seed, 17));
  const Fixture f = model_fixture();
  agent::AgentModel da(small_config(mode), f.vocab, rng);
  nn::ParamSet params = da.net.trainable();
  const Vec point = params.flatten_values();

  int target = 0;
  for (const auto& inst : f.instances) {
    auto fn = [&](const Vec& v) {
      params.set_values(v);
      return nn::softmax_xent(da.net.logits(inst, false, nullptr), target).loss;
    };
    params.set_values(point);
    params.zero_grads();
    const auto acts = da.net.enc.encode_trace(inst, false, nullptr);
    const Mat logits = nn::affine(acts.feature.transpose(), da.net.out_w.value, da.net.out_b.value);
    const auto sx = nn::softmax_xent(logits.row(0).transpose(), target);
    const auto head =
        nn::affine_backward(sx.grad_logits.transpose(), acts.feature.transpose(), da.net.out_w.value);
    da.net.out_w.grad += head.w;
    da.net.out_b.grad += head.b;
    da.net.enc.backward(acts, head.x.row(0).transpose());
    const Vec analytic = params.flatten_grads();
    rows.push_back(make_row("agent/" + encoder::pool_mode_name(mode) + "/" + inst.id, fn, point,
                            analytic, kModelTol, corrupt));
    params.set_values(point);
    target = (target + 1) % 3;
  }
}

}  // namespace

std::vector<CheckRow> run_scope(const std::string& scope, std::uint64_t seed, bool corrupt) {
  std::vector<CheckRow> rows;
  if (scope == "layers") {
    Rng rng(mix_seed(seed, 7));
    rows.push_back(check_affine(rng, corrupt));
    rows.push_back(check_conv_seq(rng, corrupt));
    rows.push_back(check_max_over_time(rng, corrupt));
    rows.push_back(check_piecewise_max(rng, corrupt));
    rows.push_back(check_softmax_xent(rng, corrupt));
    rows.push_back(check_dropout_mask(rng, corrupt));
  } else if (scope == "encoder") {
    check_encoder(rows, encoder::PoolMode::kCnn, seed, corrupt);
    check_encoder(rows, encoder::PoolMode::kPcnn, seed, corrupt);
  } else if (scope == "classifier") {
    check_classifier(rows, encoder::PoolMode::kCnn, seed, corrupt);
    check_classifier(rows, encoder::PoolMode::kPcnn, seed, corrupt);
  } else if (scope == "agent") {
    check_agent(rows, encoder::PoolMode::kCnn, seed, corrupt);
    check_agent(rows, encoder::PoolMode::kPcnn, seed, corrupt);
  } else {
    throw std::invalid_argument("gradcheck: unknown scope '" + scope + "'");
  }
  return rows;
}

bool all_pass(const std::vector<CheckRow>& rows) {
  for (const auto& r : rows) {
    if (!r.pass) return false;
  }
  return true;
}

}  // namespace hfnd::gradcheck
