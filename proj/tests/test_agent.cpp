#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "hfnd/agent.hpp"
#include "hfnd/classifier.hpp"
#include "hfnd/corpus.hpp"
#include "hfnd/encoder.hpp"
#include "hfnd/gradcheck.hpp"
#include "hfnd/nn.hpp"
#include "hfnd/rng.hpp"

using namespace hfnd;
using agent::Action;
using agent::AgentModel;
using agent::BaselineTracker;
using agent::Decision;
using classifier::ClassifierModel;
using encoder::EncoderConfig;
using encoder::PoolMode;
using encoder::Vocab;

namespace {

EncoderConfig small_config() {
  EncoderConfig cfg;
  cfg.mode = PoolMode::kCnn;
  cfg.d_w = 8;
  cfg.d_p = 2;
  cfg.l_max = 6;
  cfg.filters = 4;
  cfg.widths = {2, 3};
  cfg.dropout = 0.5;
  return cfg;
}

struct Fixture {
  corpus::SyntheticData data;
  std::shared_ptr<const Vocab> vocab;
  std::vector<const corpus::Instance*> negatives;
  ClassifierModel rc;
  AgentModel da;

  explicit Fixture(std::uint64_t seed)
      : data(corpus::generate_synthetic(make_spec(), 41)),
        vocab(std::make_shared<Vocab>(Vocab::build(data.train, 1))),
        rc(small_config(), data.train.inventory, vocab, *make_rng(seed)),
        da(small_config(), vocab, *make_rng(seed + 1)) {
    for (const auto& inst : data.train.instances) {
      if (inst.relation == 0) negatives.push_back(&inst);
    }
  }

  static corpus::SyntheticSpec make_spec() {
    corpus::SyntheticSpec spec;
    spec.n_relations = 4;
    spec.n_train = 40;
    spec.n_val = 8;
    spec.n_test = 8;
    spec.vocab_size = 10;
    return spec;
  }

  // Keeps constructor-order rng lifetimes simple.
  static std::unique_ptr<Rng> make_rng(std::uint64_t seed) { return std::make_unique<Rng>(seed); }
};

double sum_log_prob_of(const AgentModel& model, std::span<const corpus::Instance* const> negs,
                       std::span<const Decision> decisions) {
  double total = 0.0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const nn::Vec p = model.policy(*negs[i]);
    total += std::log(p(static_cast<Eigen::Index>(decisions[i].action)));
  }
  return total;
}

}  // namespace

TEST_CASE("action names") {
  CHECK(agent::action_name(Action::kKeep) == "keep");
  CHECK(agent::action_name(Action::kDiscard) == "discard");
  CHECK(agent::action_name(Action::kRevise) == "revise");
}

TEST_CASE("baseline tracker: mean of a bounded reward window") {
  BaselineTracker t;
  CHECK(t.baseline() == 0.0);
  CHECK(t.size() == 0);

  t.record(1.0);
  CHECK(t.baseline() == 1.0);
  t.record(2.0);
  t.record(3.0);
  CHECK(t.baseline() == doctest::Approx(2.0));
  CHECK(t.size() == 3);

  // Seven records with a window of five: the first two fall out.
  t.record(4.0);
  t.record(5.0);
  t.record(6.0);
  t.record(7.0);
  CHECK(t.size() == BaselineTracker::kWindow);
  CHECK(t.baseline() == doctest::Approx((3.0 + 4.0 + 5.0 + 6.0 + 7.0) / 5.0));
}

TEST_CASE("agent policy is a deterministic three-way distribution") {
  Fixture f(70);
  const auto& inst = *f.negatives[0];
  const nn::Vec p = f.da.policy(inst);
  CHECK(p.size() == 3);
  CHECK(p.minCoeff() > 0.0);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.da.policy(inst) == p);
}

TEST_CASE("act: one decision per negative, in order, NA inputs only") {
  Fixture f(70);
  REQUIRE(f.negatives.size() >= 5);
  Rng rng(3);
  const auto decisions = agent::act(f.da, f.negatives, f.rc, agent::ActMode::kSample, rng);
  REQUIRE(decisions.size() == f.negatives.size());
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    CHECK(decisions[i].id == f.negatives[i]->id);
    CHECK(decisions[i].log_prob <= 0.0);
    const nn::Vec p = f.da.policy(*f.negatives[i]);
    CHECK(decisions[i].log_prob ==
          doctest::Approx(std::log(p(static_cast<Eigen::Index>(decisions[i].action))))
              .epsilon(1e-12));
    if (decisions[i].action == Action::kRevise) {
      CHECK(decisions[i].revised_relation == f.rc.revise(*f.negatives[i]));
      CHECK_FALSE(f.rc.inventory.is_na(decisions[i].revised_relation));
    } else {
      CHECK(decisions[i].revised_relation == -1);
    }
  }

  // A positive-labeled instance is rejected.
  std::vector<const corpus::Instance*> bad = f.negatives;
  for (const auto& inst : f.data.train.instances) {
    if (inst.relation != 0) {
      bad.push_back(&inst);
      break;
    }
  }
  CHECK_THROWS_AS(agent::act(f.da, bad, f.rc, agent::ActMode::kSample, rng),
                  std::invalid_argument);
}

TEST_CASE("act: sampling is seed-deterministic, greedy consumes no randomness") {
  Fixture f(70);
  Rng r1(5), r2(5), r3(99);
  const auto a = agent::act(f.da, f.negatives, f.rc, agent::ActMode::kSample, r1);
  const auto b = agent::act(f.da, f.negatives, f.rc, agent::ActMode::kSample, r2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].action == b[i].action);
    CHECK(a[i].log_prob == b[i].log_prob);
    CHECK(a[i].revised_relation == b[i].revised_relation);
  }

  const auto c = agent::act(f.da, f.negatives, f.rc, agent::ActMode::kSample, r3);
  bool any_differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) any_differs |= a[i].action != c[i].action;
  CHECK(any_differs);

  // Greedy: argmax of the policy, and the rng is left untouched.
  Rng used(123), untouched(123);
  const auto g = agent::act(f.da, f.negatives, f.rc, agent::ActMode::kGreedy, used);
  CHECK(used.bits() == untouched.bits());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const nn::Vec p = f.da.policy(*f.negatives[i]);
    CHECK(static_cast<Eigen::Index>(g[i].action) == nn::argmax_lowest(p));
  }

  // Greedy twice is identical.
  Rng again(123);
  const auto g2 = agent::act(f.da, f.negatives, f.rc, agent::ActMode::kGreedy, again);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i].action == g2[i].action);
}

TEST_CASE("reinforce: empty decision set is a no-op and records nothing") {
  Fixture f(70);
  BaselineTracker tracker;
  const nn::Vec before = f.da.net.trainable().flatten_values();
  const std::vector<const corpus::Instance*> no_negs;
  const std::vector<Decision> no_decisions;
  agent::reinforce_update(f.da, no_negs, no_decisions, 0.7, tracker);
  CHECK(tracker.size() == 0);
  CHECK(f.da.net.trainable().flatten_values() == before);
}

TEST_CASE("reinforce: decisions must match the instances") {
  Fixture f(70);
  BaselineTracker tracker;
  Rng rng(5);
  auto decisions = agent::act(f.da, f.negatives, f.rc, agent::ActMode::kSample, rng);

  std::vector<Decision> short_list(decisions.begin(), decisions.end() - 1);
  CHECK_THROWS_AS(agent::reinforce_update(f.da, f.negatives, short_list, 0.5, tracker),
                  std::invalid_argument);

  auto shuffled = decisions;
  std::swap(shuffled[0].id, shuffled[1].id);
  CHECK_THROWS_AS(agent::reinforce_update(f.da, f.negatives, shuffled, 0.5, tracker),
                  std::invalid_argument);
}

TEST_CASE("reinforce: zero advantage leaves parameters bit-identical but records") {
  Fixture f(70);
  BaselineTracker tracker;
  Rng rng(5);
  const auto decisions = agent::act(f.da, f.negatives, f.rc, agent::ActMode::kSample, rng);

  // First-ever update with reward 0: baseline is 0, advantage is 0.
  const nn::Vec before = f.da.net.trainable().flatten_values();
  agent::reinforce_update(f.da, f.negatives, decisions, 0.0, tracker);
  CHECK(tracker.size() == 1);
  CHECK(f.da.net.trainable().flatten_values() == before);

  // Reward equal to the running baseline: same story.
  tracker.record(0.5);
  tracker.record(1.0);  // window mean now (0 + 0.5 + 1) / 3 = 0.5
  agent::reinforce_update(f.da, f.negatives, decisions, 0.5, tracker);
  CHECK(tracker.size() == 4);
  CHECK(f.da.net.trainable().flatten_values() == before);
}

TEST_CASE("reinforce: reward above baseline reinforces the taken actions") {
  Fixture f(70);
  BaselineTracker tracker;
  Rng rng(5);
  const auto decisions = agent::act(f.da, f.negatives, f.rc, agent::ActMode::kSample, rng);

  const double before = sum_log_prob_of(f.da, f.negatives, decisions);
  agent::reinforce_update(f.da, f.negatives, decisions, 1.0, tracker);
  const double after = sum_log_prob_of(f.da, f.negatives, decisions);
  CHECK(tracker.size() == 1);
  CHECK(after > before);
}

TEST_CASE("reinforce: reward below baseline suppresses the taken actions") {
  Fixture f(70);
  BaselineTracker tracker;
  tracker.record(1.0);  // baseline 1.0
  Rng rng(5);
  const auto decisions = agent::act(f.da, f.negatives, f.rc, agent::ActMode::kSample, rng);

  const double before = sum_log_prob_of(f.da, f.negatives, decisions);
  agent::reinforce_update(f.da, f.negatives, decisions, 0.0, tracker);
  const double after = sum_log_prob_of(f.da, f.negatives, decisions);
  CHECK(tracker.size() == 2);
  CHECK(after < before);

  // The recorded reward moved the baseline window.
  CHECK(tracker.baseline() == doctest::Approx(0.5));
}

TEST_CASE("reinforce: update is deterministic given identical inputs") {
  auto run = [](double reward) {
    Fixture f(70);
    BaselineTracker tracker;
    Rng rng(5);
    const auto decisions = agent::act(f.da, f.negatives, f.rc, agent::ActMode::kSample, rng);
    agent::reinforce_update(f.da, f.negatives, decisions, reward, tracker);
    return f.da.net.trainable().flatten_values();
  };
  CHECK(run(0.8) == run(0.8));
  CHECK_FALSE(run(0.8) == run(0.3));
}

TEST_CASE("agent model: analytic gradients match finite differences") {
  const auto rows = gradcheck::run_scope("agent", 1, false);
  REQUIRE_FALSE(rows.empty());
  for (const auto& row : rows) {
    INFO(row.name << " err=" << row.err);
    CHECK(row.pass);
  }
  CHECK(gradcheck::all_pass(rows));
}
