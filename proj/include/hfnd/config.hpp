#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hfnd/corpus.hpp"
#include "hfnd/encoder.hpp"

namespace hfnd::pipeline {

// Full description of one experiment. Every field is addressable by its key
// in a flat "key = value" config file and by --override key=value.
struct ExperimentConfig {
  encoder::PoolMode encoder_mode = encoder::PoolMode::kCnn;
  int d_w = 300;
  int d_p = 50;
  int filters = 230;
  std::vector<int> filter_widths = {2, 3, 4, 5};
  int l_max = 60;
  double dropout = 0.5;
  int batch_size = 256;

  double lr_rc_pre = 3e-3;
  double lr_da_pre = 3e-3;
  double lr_rc_co = 3e-3;
  double lr_da_co = 1e-4;

  int rc_pretrain_epochs = 5;
  int da_pretrain_epochs = 20;
  int cotrain_epochs = 30;

  double fn_ratio = 0.0;
  std::uint64_t seed = 1;

  // Empty paths select the synthetic corpus below.
  std::string train_path, val_path, test_path;
  corpus::SyntheticSpec synth;

  std::string word_vectors;  // optional pretrained word vector file
  bool freeze_word_table = false;

  // Tokens seen fewer than this many times in training map to <unk>.
  int vocab_min_count = 1;

  encoder::EncoderConfig encoder_config() const;
  bool synthetic() const { return train_path.empty(); }

  // Throws std::invalid_argument naming the first bad field.
  void validate() const;

  // Canonical (key, value) snapshot covering every field, fixed order.
  std::vector<std::pair<std::string, std::string>> snapshot() const;

  // Assigns one field from its textual form; unknown keys are errors.
  void set(const std::string& key, const std::string& value);
};

// Flat config file: one "key = value" per line, '#' starts a comment line,
// blank lines ignored. Unknown keys are errors.
ExperimentConfig load_config(const std::string& path);
void apply_overrides(ExperimentConfig& cfg,
                     const std::vector<std::string>& key_equals_value);

// Seed streams derived from ExperimentConfig::seed.
enum class SeedStream : std::uint64_t {
  kSynth = 1,
  kInjectTrain = 2,
  kInjectVal = 3,
  kClassifierInit = 4,
  kAgentInit = 5,
  kTraining = 6,
};

std::uint64_t derived_seed(const ExperimentConfig& cfg, SeedStream stream);

}  // namespace hfnd::pipeline
