#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hfnd/checkpoint.hpp"
#include "hfnd/eval.hpp"
#include "hfnd/gradcheck.hpp"
#include "hfnd/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hfnd;

namespace {

std::string f6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, ',')) {
    std::size_t used = 0;
    seeds.push_back(std::stoull(part, &used));
    if (used != part.size()) throw std::invalid_argument("bad seed '" + part + "'");
  }
  if (seeds.empty()) throw std::invalid_argument("empty seed list");
  return seeds;
}

int cmd_synth(const corpus::SyntheticSpec& spec, std::uint64_t seed, const std::string& out_dir) {
  const auto data = corpus::generate_synthetic(spec, seed);
  fs::create_directories(out_dir);
  const auto at = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
  corpus::save_linerecords(data.train, at("train.txt"));
  corpus::save_linerecords(data.val, at("val.txt"));
  corpus::save_linerecords(data.test, at("test.txt"));
  std::cout << at("train.txt") << " (" << data.train.instances.size() << " instances)\n"
            << at("val.txt") << " (" << data.val.instances.size() << " instances)\n"
            << at("test.txt") << " (" << data.test.instances.size() << " instances)\n";
  return 0;
}

int cmd_inject(const std::string& in_path, double ratio, std::uint64_t seed,
               const std::string& out_dir) {
  const auto d = corpus::load_linerecords(in_path, corpus::InventoryMode::kEmbedded);
  const auto result = corpus::inject_false_negatives(d, ratio, seed);
  fs::create_directories(out_dir);
  const auto at = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
  corpus::save_linerecords(result.dataset, at("injected.txt"));
  corpus::save_fliplog(result.flips, d.inventory, at("flips.txt"));
  std::cout << "flipped " << result.flips.entries.size() << " of "
            << [&] {
                 long p = 0;
                 for (const auto& inst : d.instances) {
                   if (!d.inventory.is_na(inst.relation)) ++p;
                 }
                 return p;
               }()
            << " positives\n"
            << at("injected.txt") << '\n'
            << at("flips.txt") << '\n';
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& mode_text,
              const std::string& seeds_text, bool seed_given, std::uint64_t seed_flag,
              const std::string& out_dir, const std::vector<std::string>& overrides) {
  const auto mode = pipeline::parse_mode(mode_text);
  if (!mode) throw std::invalid_argument("unknown mode '" + mode_text + "'");
  pipeline::ExperimentConfig base_cfg = pipeline::load_config(config_path);
  pipeline::apply_overrides(base_cfg, overrides);

  if (seed_given && !seeds_text.empty()) {
    throw std::invalid_argument("--seed and --seeds are mutually exclusive");
  }
  std::vector<std::uint64_t> seeds;
  if (!seeds_text.empty()) {
    seeds = parse_seed_list(seeds_text);
  } else if (seed_given) {
    seeds = {seed_flag};
  } else {
    seeds = {base_cfg.seed};
  }

  for (const std::uint64_t seed : seeds) {
    pipeline::ExperimentConfig cfg = base_cfg;
    cfg.seed = seed;
    cfg.validate();
    const std::string run_dir =
        seeds.size() == 1 ? out_dir : (fs::path(out_dir) / ("seed-" + std::to_string(seed))).string();
    try {
      const auto result = pipeline::run_experiment(cfg, *mode, run_dir);
      std::cout << "run " << run_dir << " test_f1 " << f6(result.test.f1) << '\n';
    } catch (...) {
      // Mark the partial run so downstream tooling never mistakes it for a
      // completed one.
      std::error_code ec;
      if (fs::exists(run_dir, ec)) {
        std::ofstream marker((fs::path(run_dir) / "FAILED").string());
        marker << "run did not complete\n";
      }
      throw;
    }
  }
  return 0;
}

pipeline::ExperimentConfig config_from_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw std::runtime_error(manifest_path + ": cannot open");
  pipeline::ExperimentConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("config.", 0) != 0) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    cfg.set(line.substr(7, eq - 7), line.substr(eq + 1));
  }
  return cfg;
}

int cmd_eval(const std::string& run_dir, const std::string& test_path, std::string out_dir) {
  if (out_dir.empty()) out_dir = run_dir;
  const auto run_at = [&](const char* name) { return (fs::path(run_dir) / name).string(); };
  pipeline::ExperimentConfig cfg = config_from_manifest(run_at("manifest.txt"));
  cfg.word_vectors.clear();  // weights come from the checkpoint

  const auto inventory = corpus::load_inventory(run_at("inventory.txt"));
  const auto test = corpus::load_linerecords(test_path, corpus::InventoryMode::kEmbedded);
  if (!(test.inventory == inventory)) {
    throw std::invalid_argument("test file inventory differs from the run's");
  }
  auto vocab = std::make_shared<encoder::Vocab>(encoder::Vocab::load(run_at("vocab.txt")));

  Rng rng(cfg.seed);
  auto rc = pipeline::make_classifier(cfg, inventory, vocab, rng);
  nn::load_checkpoint(run_at("rc.ckpt"), rc.net.named_matrices());

  fs::create_directories(out_dir);
  const auto out_at = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

  std::vector<std::pair<int, int>> gold_pred;
  std::vector<eval::ScoredPrediction> scored;
  long gold_positives = 0;
  std::ofstream preds(out_at("predictions.txt"), std::ios::binary);
  if (!preds) throw std::runtime_error(out_at("predictions.txt") + std::string(": cannot open"));
  for (const auto& inst : test.instances) {
    const nn::Vec p = rc.probs(inst);
    const auto pred = static_cast<int>(nn::argmax_lowest(p));
    gold_pred.push_back({inst.relation, pred});
    if (inst.relation != inventory.na_index()) ++gold_positives;
    if (pred != inventory.na_index()) {
      scored.push_back({inst.relation, pred, p(pred)});
    }
    preds << inst.id << '\t' << inventory.name(pred) << '\t' << f6(p(pred)) << '\n';
  }

  const auto f1 = eval::micro_f1(gold_pred, inventory.na_index());
  std::ofstream metrics(out_at("eval_metrics.txt"), std::ios::binary);
  metrics << "instances=" << test.instances.size() << '\n'
          << "gold_positives=" << gold_positives << '\n'
          << "precision=" << f6(f1.precision) << '\n'
          << "recall=" << f6(f1.recall) << '\n'
          << "f1=" << f6(f1.f1) << '\n';

  std::ofstream curve(out_at("pr_curve.txt"), std::ios::binary);
  if (gold_positives > 0) {
    for (const auto& pt : eval::pr_curve(scored, inventory.na_index(), gold_positives)) {
      curve << f6(pt.recall) << '\t' << f6(pt.precision) << '\n';
    }
  }
  std::cout << "precision " << f6(f1.precision) << " recall " << f6(f1.recall) << " f1 "
            << f6(f1.f1) << '\n';
  return 0;
}

int cmd_gradcheck(const std::string& scope, std::uint64_t seed, bool corrupt) {
  std::vector<std::string> scopes;
  if (scope == "all") {
    scopes = {"layers", "encoder", "classifier", "agent"};
  } else {
    scopes = {scope};
  }
  bool ok = true;
  for (const auto& s : scopes) {
    for (const auto& row : gradcheck::run_scope(s, seed, corrupt)) {
      std::printf("%-28s err %.3e tol %.0e %s\n", row.name.c_str(), row.err, row.tolerance,
                  row.pass ? "PASS" : "FAIL");
      ok = ok && row.pass;
    }
  }
  return ok ? 0 : 1;
}

int cmd_report(const std::string& run_dir) {
  const auto at = [&](const char* name) { return (fs::path(run_dir) / name).string(); };

  std::ifstream manifest(at("manifest.txt"), std::ios::binary);
  if (!manifest) throw std::runtime_error(at("manifest.txt") + std::string(": cannot open"));
  std::string line;
  std::cout << "== manifest ==\n";
  while (std::getline(manifest, line)) {
    if (line.rfind("config.", 0) != 0) std::cout << line << '\n';
  }

  std::ifstream metrics(at("final_metrics.txt"), std::ios::binary);
  if (metrics) {
    std::cout << "== final metrics ==\n";
    while (std::getline(metrics, line)) std::cout << line << '\n';
  }

  std::ifstream reports(at("epoch_reports.txt"), std::ios::binary);
  std::string last;
  while (std::getline(reports, line)) {
    if (!line.empty()) last = line;
  }
  if (!last.empty()) std::cout << "== last epoch ==\n" << last << '\n';

  // Final-epoch action mix over true and injected negatives, when the run
  // kept an agent decision dump.
  std::ifstream decisions(at("decisions.txt"), std::ios::binary);
  std::error_code ec;
  if (decisions && fs::exists(at("flips_train.txt"), ec)) {
    const auto inventory = corpus::load_inventory(at("inventory.txt"));
    const auto flips = corpus::load_fliplog(at("flips_train.txt"), inventory);
    std::vector<agent::Decision> final_epoch;
    int max_epoch = -1;
    while (std::getline(decisions, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::istringstream row(line);
      std::string epoch_s, id, action_s, logp_s, revised_s;
      if (!std::getline(row, epoch_s, '\t') || !std::getline(row, id, '\t') ||
          !std::getline(row, action_s, '\t') || !std::getline(row, logp_s, '\t') ||
          !std::getline(row, revised_s, '\t')) {
        throw std::invalid_argument(at("decisions.txt") + std::string(": malformed row"));
      }
      const int epoch = std::stoi(epoch_s);
      if (epoch > max_epoch) {
        max_epoch = epoch;
        final_epoch.clear();
      }
      if (epoch != max_epoch) continue;
      agent::Decision d;
      d.id = id;
      if (action_s == "keep") d.action = agent::Action::kKeep;
      else if (action_s == "discard") d.action = agent::Action::kDiscard;
      else if (action_s == "revise") d.action = agent::Action::kRevise;
      else throw std::invalid_argument("bad action '" + action_s + "'");
      d.log_prob = std::stod(logp_s);
      if (revised_s != "-") {
        const auto rel = inventory.index_of(revised_s);
        if (!rel) throw std::invalid_argument("bad revision '" + revised_s + "'");
        d.revised_relation = *rel;
      }
      final_epoch.push_back(std::move(d));
    }
    if (max_epoch >= 0) {
      const auto dist = eval::policy_distribution(final_epoch, flips);
      std::cout << "== final epoch action mix (epoch " << max_epoch << ") ==\n";
      std::printf("%-4s %9s %9s %9s %10s\n", "", "keep", "discard", "revise", "n");
      const char* row_name[2] = {"TN", "FN"};
      for (int r = 0; r < 2; ++r) {
        std::printf("%-4s %8.2f%% %8.2f%% %8.2f%% %10ld\n", row_name[r], dist.percent[r][0],
                    dist.percent[r][1], dist.percent[r][2], dist.population[r]);
      }
      const auto acc = eval::revision_accuracy(final_epoch, flips);
      if (acc) std::printf("revision accuracy on injected negatives: %.2f%%\n", *acc);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"false-negative denoising for distantly supervised relation extraction"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic three-split corpus");
  corpus::SyntheticSpec spec;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--n-relations", spec.n_relations, "relation count including NA");
  synth->add_option("--n-train", spec.n_train, "training instances");
  synth->add_option("--n-val", spec.n_val, "validation instances");
  synth->add_option("--n-test", spec.n_test, "test instances");
  synth->add_option("--vocab-size", spec.vocab_size, "filler token pool size");
  synth->add_option("--pattern-strength", spec.pattern_strength, "cue probability per positive");
  synth->add_option("--na-share", spec.na_share, "NA fraction per split (0 = uniform classes)");
  std::string synth_layout = "cycle";
  synth->add_option("--class-layout", synth_layout, "cycle (exact counts) or random (iid labels)");
  synth->add_option("--cue-family", spec.cue_family, "trigger tokens per relation");

  // inject
  auto* inject = app.add_subcommand("inject", "flip positives to NA at a fixed ratio");
  std::string inject_in, inject_out;
  double inject_ratio = 0.0;
  std::uint64_t inject_seed = 1;
  inject->add_option("--in", inject_in, "input line-record file")->required();
  inject->add_option("--ratio", inject_ratio, "fraction of positives to flip")->required();
  inject->add_option("--seed", inject_seed, "selection seed");
  inject->add_option("--out", inject_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "run an experiment");
  std::string train_config, train_mode = "hfnd", train_seeds, train_out;
  std::uint64_t train_seed = 0;
  std::vector<std::string> train_overrides;
  train->add_option("--config", train_config, "experiment config file")->required();
  train->add_option("--mode", train_mode, "base|hfnd|ablation-no-revise|ablation-no-pretrain");
  auto* train_seed_opt = train->add_option("--seed", train_seed, "seed for a single run");
  train->add_option("--seeds", train_seeds, "comma-separated seeds, one run each");
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--override", train_overrides, "config override key=value")
      ->take_all()
      ->allow_extra_args(false);

  // eval
  auto* evalc = app.add_subcommand("eval", "evaluate a finished run on a test file");
  std::string eval_run, eval_test, eval_out;
  evalc->add_option("--run", eval_run, "run directory")->required();
  evalc->add_option("--test", eval_test, "test line-record file")->required();
  evalc->add_option("--out", eval_out, "output directory (default: the run directory)");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::string gc_scope = "all";
  std::uint64_t gc_seed = 1;
  bool gc_corrupt = false;
  gc->add_option("--scope", gc_scope, "layers|encoder|classifier|agent|all");
  gc->add_option("--seed", gc_seed, "fixture seed");
  gc->add_flag("--corrupt", gc_corrupt, "perturb analytic gradients; checks must then fail");

  // report
  auto* report = app.add_subcommand("report", "summarize a finished run");
  std::string report_run;
  report->add_option("--run", report_run, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      if (synth_layout == "random") spec.class_layout = corpus::ClassLayout::kRandom;
      else if (synth_layout != "cycle") {
        throw std::invalid_argument("--class-layout must be cycle or random, got '" +
                                    synth_layout + "'");
      }
      return cmd_synth(spec, synth_seed, synth_out);
    }
    if (inject->parsed()) return cmd_inject(inject_in, inject_ratio, inject_seed, inject_out);
    if (train->parsed()) {
      return cmd_train(train_config, train_mode, train_seeds, train_seed_opt->count() > 0,
                       train_seed, train_out, train_overrides);
    }
    if (evalc->parsed()) return cmd_eval(eval_run, eval_test, eval_out);
    if (gc->parsed()) return cmd_gradcheck(gc_scope, gc_seed, gc_corrupt);
    if (report->parsed()) return cmd_report(report_run);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
