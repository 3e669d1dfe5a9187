#include "hfnd/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "hfnd/checkpoint.hpp"

namespace hfnd::pipeline {

const char* const kVersion = "0.1.0";

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kBase: return "base";
    case Mode::kHfnd: return "hfnd";
    case Mode::kAblationNoRevise: return "ablation-no-revise";
    case Mode::kAblationNoPretrain: return "ablation-no-pretrain";
  }
  throw std::logic_error("mode_name: bad mode");
}

std::optional<Mode> parse_mode(std::string_view name) {
  if (name == "base") return Mode::kBase;
  if (name == "hfnd") return Mode::kHfnd;
  if (name == "ablation-no-revise") return Mode::kAblationNoRevise;
  if (name == "ablation-no-pretrain") return Mode::kAblationNoPretrain;
  return std::nullopt;
}

namespace {

std::string f6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string format_epoch_report(const EpochReport& r, Mode mode) {
  std::string out = "epoch=" + std::to_string(r.epoch) + " mode=" + mode_name(mode);
  if (!r.cotrain) {
    return out + " train_loss=" + f6(r.train_loss) + " val_f1=" + f6(r.val_f1);
  }
  out += " train_kept=" + std::to_string(r.train_kept);
  out += " train_discarded=" + std::to_string(r.train_discarded);
  out += " train_revised=" + std::to_string(r.train_revised);
  out += " val_kept=" + std::to_string(r.val_kept);
  out += " val_discarded=" + std::to_string(r.val_discarded);
  out += " val_revised=" + std::to_string(r.val_revised);
  out += " cleaned_train=" + std::to_string(r.cleaned_train);
  out += " cleaned_val=" + std::to_string(r.cleaned_val);
  out += " train_loss=" + f6(r.train_loss);
  out += " reward=" + f6(r.reward);
  out += " baseline=" + f6(r.baseline);
  out += " val_f1=" + f6(r.val_f1);
  const auto& c = r.train_policy.counts;
  out += " tn_keep=" + std::to_string(c[0][0]) + " tn_discard=" + std::to_string(c[0][1]) +
         " tn_revise=" + std::to_string(c[0][2]);
  out += " fn_keep=" + std::to_string(c[1][0]) + " fn_discard=" + std::to_string(c[1][1]) +
         " fn_revise=" + std::to_string(c[1][2]);
  out += " aborted=";
  out += r.aborted ? '1' : '0';
  return out;
}

classifier::ClassifierModel make_classifier(const ExperimentConfig& cfg,
                                            const corpus::RelationInventory& inventory,
                                            std::shared_ptr<const encoder::Vocab> vocab,
                                            Rng& init_rng) {
  classifier::ClassifierModel rc(cfg.encoder_config(), inventory, std::move(vocab), init_rng);
  if (!cfg.word_vectors.empty()) {
    rc.net.enc.table.load_word_vectors(cfg.word_vectors, rc.net.enc.vocab());
  }
  rc.net.enc.table.freeze_words = cfg.freeze_word_table;
  return rc;
}

agent::AgentModel make_agent(const ExperimentConfig& cfg,
                             std::shared_ptr<const encoder::Vocab> vocab, Rng& init_rng) {
  agent::AgentModel da(cfg.encoder_config(), std::move(vocab), init_rng);
  if (!cfg.word_vectors.empty()) {
    da.net.enc.table.load_word_vectors(cfg.word_vectors, da.net.enc.vocab());
  }
  da.net.enc.table.freeze_words = cfg.freeze_word_table;
  return da;
}

namespace {

std::vector<classifier::Labeled> as_labeled(const corpus::Dataset& d) {
  std::vector<classifier::Labeled> out;
  out.reserve(d.instances.size());
  for (const auto& inst : d.instances) out.push_back({&inst, inst.relation});
  return out;
}

}  // namespace

double pretrain_classifier(const ExperimentConfig& cfg, classifier::ClassifierModel& rc,
                           const corpus::Dataset& train, Rng& rng) {
  const auto data = as_labeled(train);
  rc.net.opt.lr = cfg.lr_rc_pre;
  double last = 0.0;
  for (int e = 0; e < cfg.rc_pretrain_epochs; ++e) {
    last = classifier::train_epoch(rc, data, cfg.batch_size, rng);
  }
  return last;
}

std::unordered_map<std::string, agent::Action> generate_action_labels(
    const std::function<int(const corpus::Instance&)>& predict, const corpus::Dataset& train,
    int na_index) {
  std::unordered_map<std::string, agent::Action> out;
  out.reserve(train.instances.size());
  for (const auto& inst : train.instances) {
    const int pred = predict(inst);
    agent::Action a;
    if (pred != inst.relation) {
      a = agent::Action::kDiscard;
    } else {
      a = inst.relation == na_index ? agent::Action::kKeep : agent::Action::kRevise;
    }
    out.emplace(inst.id, a);
  }
  return out;
}

double pretrain_agent(const ExperimentConfig& cfg, agent::AgentModel& da,
                      const corpus::Dataset& train,
                      const std::unordered_map<std::string, agent::Action>& labels, Rng& rng) {
  std::vector<classifier::Labeled> data;
  data.reserve(train.instances.size());
  for (const auto& inst : train.instances) {
    const auto it = labels.find(inst.id);
    if (it == labels.end()) {
      throw std::invalid_argument("pretrain_agent: no action label for '" + inst.id + "'");
    }
    data.push_back({&inst, static_cast<int>(it->second)});
  }
  da.net.opt.lr = cfg.lr_da_pre;
  double last = 0.0;
  for (int e = 0; e < cfg.da_pretrain_epochs; ++e) {
    last = classifier::train_supervised_epoch(da.net, data, cfg.batch_size, rng);
  }
  return last;
}

std::vector<const corpus::Instance*> collect_negatives(const corpus::Dataset& d) {
  std::vector<const corpus::Instance*> out;
  for (const auto& inst : d.instances) {
    if (d.inventory.is_na(inst.relation)) out.push_back(&inst);
  }
  return out;
}

std::vector<classifier::Labeled> build_cleaned(const corpus::Dataset& d,
                                               std::span<const agent::Decision> decisions,
                                               int na_index) {
  std::vector<classifier::Labeled> out;
  out.reserve(d.instances.size());
  std::size_t at = 0;
  for (const auto& inst : d.instances) {
    if (inst.relation != na_index) {
      out.push_back({&inst, inst.relation});
      continue;
    }
    if (at >= decisions.size() || decisions[at].id != inst.id) {
      throw std::invalid_argument("build_cleaned: decisions do not cover negative '" + inst.id +
                                  "'");
    }
    const agent::Decision& dec = decisions[at++];
    switch (dec.action) {
      case agent::Action::kKeep:
        out.push_back({&inst, na_index});
        break;
      case agent::Action::kDiscard:
        break;
      case agent::Action::kRevise:
        if (dec.revised_relation < 0 || dec.revised_relation == na_index) {
          throw std::invalid_argument("build_cleaned: bad revision for '" + inst.id + "'");
        }
        out.push_back({&inst, dec.revised_relation});
        break;
    }
  }
  if (at != decisions.size()) {
    throw std::invalid_argument("build_cleaned: more decisions than negatives");
  }
  return out;
}

namespace {

void demote_revisions(std::vector<agent::Decision>& decisions) {
  for (auto& d : decisions) {
    if (d.action == agent::Action::kRevise) {
      d.action = agent::Action::kDiscard;
      d.revised_relation = -1;
    }
  }
}

void tally(const std::vector<agent::Decision>& decisions, long& kept, long& discarded,
           long& revised) {
  for (const auto& d : decisions) {
    switch (d.action) {
      case agent::Action::kKeep: ++kept; break;
      case agent::Action::kDiscard: ++discarded; break;
      case agent::Action::kRevise: ++revised; break;
    }
  }
}

double cleaned_val_f1(const classifier::ClassifierModel& rc,
                      std::span<const classifier::Labeled> cleaned, int na_index) {
  std::vector<std::pair<int, int>> gold_pred;
  gold_pred.reserve(cleaned.size());
  for (const auto& ex : cleaned) {
    gold_pred.push_back({ex.label, rc.predict(*ex.inst)});
  }
  return eval::micro_f1(gold_pred, na_index).f1;
}

}  // namespace

EpochReport cotrain_epoch(const ExperimentConfig& cfg, Mode mode,
                          classifier::ClassifierModel& rc, agent::AgentModel& da,
                          const corpus::Dataset& train, const corpus::Dataset& val,
                          const corpus::FlipLog& train_flips, agent::BaselineTracker& tracker,
                          int epoch, Rng& rng) {
  if (!uses_agent(mode)) throw std::invalid_argument("cotrain_epoch: base mode has no agent");
  const int na = rc.inventory.na_index();

  EpochReport r;
  r.epoch = epoch;
  r.cotrain = true;

  const auto train_negs = collect_negatives(train);
  const auto val_negs = collect_negatives(val);
  auto train_dec = agent::act(da, train_negs, rc, agent::ActMode::kSample, rng);
  auto val_dec = agent::act(da, val_negs, rc, agent::ActMode::kGreedy, rng);
  if (mode == Mode::kAblationNoRevise) {
    demote_revisions(train_dec);
    demote_revisions(val_dec);
  }

  tally(train_dec, r.train_kept, r.train_discarded, r.train_revised);
  tally(val_dec, r.val_kept, r.val_discarded, r.val_revised);
  r.train_policy = eval::policy_distribution(train_dec, train_flips);

  const auto cleaned_train = build_cleaned(train, train_dec, na);
  r.cleaned_train = static_cast<long>(cleaned_train.size());
  long positives = 0;
  for (const auto& ex : cleaned_train) {
    if (ex.label != na) ++positives;
  }
  if (cleaned_train.empty() || positives == 0) {
    r.aborted = true;
    r.train_decisions = std::move(train_dec);
    r.val_decisions = std::move(val_dec);
    return r;
  }

  rc.net.opt.lr = cfg.lr_rc_co;
  r.train_loss = classifier::train_epoch(rc, cleaned_train, cfg.batch_size, rng);

  const auto cleaned_val = build_cleaned(val, val_dec, na);
  r.cleaned_val = static_cast<long>(cleaned_val.size());
  r.reward = cleaned_val_f1(rc, cleaned_val, na);
  r.val_f1 = r.reward;
  r.baseline = tracker.baseline();

  da.net.opt.lr = cfg.lr_da_co;
  agent::reinforce_update(da, train_negs, train_dec, r.reward, tracker);

  r.train_decisions = std::move(train_dec);
  r.val_decisions = std::move(val_dec);
  return r;
}

RunInputs prepare_inputs(const ExperimentConfig& cfg) {
  cfg.validate();
  corpus::Dataset train, val, test;
  if (cfg.synthetic()) {
    auto synth = corpus::generate_synthetic(cfg.synth, derived_seed(cfg, SeedStream::kSynth));
    train = std::move(synth.train);
    val = std::move(synth.val);
    test = std::move(synth.test);
  } else {
    train = corpus::load_linerecords(cfg.train_path, corpus::InventoryMode::kEmbedded);
    val = corpus::load_linerecords(cfg.val_path, corpus::InventoryMode::kEmbedded);
    test = corpus::load_linerecords(cfg.test_path, corpus::InventoryMode::kEmbedded);
  }
  auto filtered = corpus::heldout_filter(train, val, test);

  RunInputs in;
  auto injected_train = corpus::inject_false_negatives(filtered.train, cfg.fn_ratio,
                                                       derived_seed(cfg, SeedStream::kInjectTrain));
  auto injected_val = corpus::inject_false_negatives(filtered.val, cfg.fn_ratio,
                                                     derived_seed(cfg, SeedStream::kInjectVal));
  in.train = std::move(injected_train.dataset);
  in.train_flips = std::move(injected_train.flips);
  in.val = std::move(injected_val.dataset);
  in.val_flips = std::move(injected_val.flips);
  in.test = std::move(test);
  in.vocab = std::make_shared<encoder::Vocab>(
      encoder::Vocab::build(in.train, cfg.vocab_min_count));
  return in;
}

namespace {

namespace fs = std::filesystem;

void write_manifest(const ExperimentConfig& cfg, Mode mode, const RunInputs& in,
                    const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "version=" << kVersion << '\n';
  out << "mode=" << mode_name(mode) << '\n';
  out << "seed=" << cfg.seed << '\n';
  out << "seed_synth=" << derived_seed(cfg, SeedStream::kSynth) << '\n';
  out << "seed_inject_train=" << derived_seed(cfg, SeedStream::kInjectTrain) << '\n';
  out << "seed_inject_val=" << derived_seed(cfg, SeedStream::kInjectVal) << '\n';
  out << "seed_classifier_init=" << derived_seed(cfg, SeedStream::kClassifierInit) << '\n';
  out << "seed_agent_init=" << derived_seed(cfg, SeedStream::kAgentInit) << '\n';
  out << "seed_training=" << derived_seed(cfg, SeedStream::kTraining) << '\n';
  out << "data=" << (cfg.synthetic() ? "synthetic" : "files") << '\n';
  out << "n_train=" << in.train.instances.size() << '\n';
  out << "n_val=" << in.val.instances.size() << '\n';
  out << "n_test=" << in.test.instances.size() << '\n';
  out << "train_flips=" << in.train_flips.entries.size() << '\n';
  out << "val_flips=" << in.val_flips.entries.size() << '\n';
  out << "vocab_size=" << in.vocab->size() << '\n';
  for (const auto& [key, value] : cfg.snapshot()) {
    out << "config." << key << '=' << value << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

void write_inventory(const corpus::RelationInventory& inv, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "#relations";
  for (int r = 0; r < inv.size(); ++r) {
    out << '\t';
    if (inv.is_na(r)) out << '*';
    out << inv.name(r);
  }
  out << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

void dump_decisions(std::ofstream& out, int epoch, const std::vector<agent::Decision>& decisions,
                    const corpus::RelationInventory& inv) {
  for (const auto& d : decisions) {
    out << epoch << '\t' << d.id << '\t' << agent::action_name(d.action) << '\t'
        << f6(d.log_prob) << '\t'
        << (d.action == agent::Action::kRevise ? inv.name(d.revised_relation) : "-") << '\n';
  }
}

eval::F1Result test_f1(const classifier::ClassifierModel& rc, const corpus::Dataset& test) {
  std::vector<std::pair<int, int>> gold_pred;
  gold_pred.reserve(test.instances.size());
  for (const auto& inst : test.instances) {
    gold_pred.push_back({inst.relation, rc.predict(inst)});
  }
  return eval::micro_f1(gold_pred, rc.inventory.na_index());
}

void write_test_predictions(const classifier::ClassifierModel& rc, const corpus::Dataset& test,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  for (const auto& inst : test.instances) {
    const nn::Vec p = rc.probs(inst);
    const auto pred = nn::argmax_lowest(p);
    out << inst.id << '\t' << rc.inventory.name(static_cast<int>(pred)) << '\t' << f6(p(pred))
        << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, Mode mode, const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  const auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

  RunInputs in = prepare_inputs(cfg);
  write_manifest(cfg, mode, in, path("manifest.txt"));
  write_inventory(in.train.inventory, path("inventory.txt"));
  in.vocab->save(path("vocab.txt"));
  corpus::save_fliplog(in.train_flips, in.train.inventory, path("flips_train.txt"));
  corpus::save_fliplog(in.val_flips, in.val.inventory, path("flips_val.txt"));

  Rng rc_rng(derived_seed(cfg, SeedStream::kClassifierInit));
  Rng da_rng(derived_seed(cfg, SeedStream::kAgentInit));
  Rng train_rng(derived_seed(cfg, SeedStream::kTraining));

  auto rc = make_classifier(cfg, in.train.inventory, in.vocab, rc_rng);

  std::ofstream reports(path("epoch_reports.txt"), std::ios::binary);
  if (!reports) throw std::runtime_error(path("epoch_reports.txt") + std::string(": cannot open"));

  RunResult result;
  result.run_dir = out_dir;

  if (mode == Mode::kBase) {
    const auto data = as_labeled(in.train);
    const auto val_data = as_labeled(in.val);
    rc.net.opt.lr = cfg.lr_rc_co;
    const int total = cfg.rc_pretrain_epochs + cfg.cotrain_epochs;
    for (int epoch = 0; epoch < total; ++epoch) {
      EpochReport r;
      r.epoch = epoch;
      r.train_loss = classifier::train_epoch(rc, data, cfg.batch_size, train_rng);
      r.val_f1 = cleaned_val_f1(rc, val_data, rc.inventory.na_index());
      reports << format_epoch_report(r, mode) << '\n';
      reports.flush();
      std::cout << "epoch " << epoch << " loss " << f6(r.train_loss) << " val_f1 " << f6(r.val_f1)
                << '\n';
      result.final_val_f1 = r.val_f1;
      result.final_epoch = r;
      result.has_final_epoch = true;
    }
  } else {
    auto da = make_agent(cfg, in.vocab, da_rng);
    if (mode != Mode::kAblationNoPretrain) {
      const double rc_loss = pretrain_classifier(cfg, rc, in.train, train_rng);
      std::cout << "classifier pretraining done, loss " << f6(rc_loss) << '\n';
      const auto labels = generate_action_labels(
          [&rc](const corpus::Instance& inst) { return rc.predict(inst); }, in.train,
          rc.inventory.na_index());
      const double da_loss = pretrain_agent(cfg, da, in.train, labels, train_rng);
      std::cout << "policy pretraining done, loss " << f6(da_loss) << '\n';
    }

    std::ofstream decisions(path("decisions.txt"), std::ios::binary);
    if (!decisions) throw std::runtime_error(path("decisions.txt") + std::string(": cannot open"));
    agent::BaselineTracker tracker;
    for (int epoch = 0; epoch < cfg.cotrain_epochs; ++epoch) {
      EpochReport r = cotrain_epoch(cfg, mode, rc, da, in.train, in.val, in.train_flips, tracker,
                                    epoch, train_rng);
      reports << format_epoch_report(r, mode) << '\n';
      reports.flush();
      dump_decisions(decisions, epoch, r.train_decisions, rc.inventory);
      std::cout << "epoch " << epoch << (r.aborted ? " aborted" : "") << " reward " << f6(r.reward)
                << " baseline " << f6(r.baseline) << '\n';
      result.final_val_f1 = r.val_f1;
      result.final_revision_accuracy = eval::revision_accuracy(r.train_decisions, in.train_flips);
      result.final_epoch = std::move(r);
      result.has_final_epoch = true;
    }
    nn::save_checkpoint(path("da.ckpt"), da.net.named_matrices());
  }

  result.test = test_f1(rc, in.test);
  write_test_predictions(rc, in.test, path("test_predictions.txt"));
  nn::save_checkpoint(path("rc.ckpt"), rc.net.named_matrices());

  std::ofstream metrics(path("final_metrics.txt"), std::ios::binary);
  if (!metrics) throw std::runtime_error(path("final_metrics.txt") + std::string(": cannot open"));
  metrics << "test_precision=" << f6(result.test.precision) << '\n';
  metrics << "test_recall=" << f6(result.test.recall) << '\n';
  metrics << "test_f1=" << f6(result.test.f1) << '\n';
  metrics << "final_val_f1=" << f6(result.final_val_f1) << '\n';
  if (result.final_revision_accuracy) {
    metrics << "final_revision_accuracy=" << f6(*result.final_revision_accuracy) << '\n';
  }
  if (uses_agent(mode) && result.has_final_epoch) {
    const auto& pc = result.final_epoch.train_policy;
    metrics << "final_tn_keep_pct=" << f6(pc.percent[0][0]) << '\n';
    metrics << "final_fn_keep_pct=" << f6(pc.percent[1][0]) << '\n';
  }
  if (!metrics) throw std::runtime_error(path("final_metrics.txt") + std::string(": write failed"));
  return result;
}

}  // namespace hfnd::pipeline
