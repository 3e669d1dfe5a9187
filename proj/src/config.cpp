#include "hfnd/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hfnd/rng.hpp"

namespace hfnd::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw std::invalid_argument("config: bad seed for " + key + ": '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::string part;
  std::istringstream in(v);
  while (std::getline(in, part, ',')) out.push_back(to_int(key, trim(part)));
  if (out.empty()) throw std::invalid_argument("config: empty list for " + key);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string format_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

encoder::EncoderConfig ExperimentConfig::encoder_config() const {
  encoder::EncoderConfig e;
  e.mode = encoder_mode;
  e.d_w = d_w;
  e.d_p = d_p;
  e.l_max = l_max;
  e.filters = filters;
  e.widths = filter_widths;
  e.dropout = dropout;
  return e;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (d_w < 1 || d_p < 1 || filters < 1 || l_max < 1) fail("dimensions must be positive");
  if (filter_widths.empty()) fail("filter_widths must be non-empty");
  for (const int f : filter_widths) {
    if (f < 1) fail("filter widths must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0,1)");
  if (batch_size < 1) fail("batch_size must be positive");
  if (lr_rc_pre <= 0.0 || lr_da_pre <= 0.0 || lr_rc_co <= 0.0 || lr_da_co <= 0.0) {
    fail("learning rates must be positive");
  }
  if (rc_pretrain_epochs < 0 || da_pretrain_epochs < 0 || cotrain_epochs < 0) {
    fail("epoch counts must be non-negative");
  }
  if (fn_ratio < 0.0 || fn_ratio > 1.0) fail("fn_ratio must be in [0,1]");
  if (vocab_min_count < 1) fail("vocab_min_count must be positive");
  const bool have_train = !train_path.empty();
  const bool have_val = !val_path.empty();
  const bool have_test = !test_path.empty();
  if (have_train != have_val || have_train != have_test) {
    fail("train/val/test paths must be given together");
  }
  if (!have_train) {
    if (synth.n_relations < 2) fail("synth_relations must include NA plus one relation");
    if (synth.n_train < 1 || synth.n_val < 1 || synth.n_test < 1) {
      fail("synthetic split sizes must be positive");
    }
    if (synth.vocab_size < 1) fail("synth_vocab must be positive");
    if (synth.pattern_strength < 0.0 || synth.pattern_strength > 1.0) {
      fail("synth_pattern_strength must be in [0,1]");
    }
    if (synth.na_share < 0.0 || synth.na_share >= 1.0) {
      fail("synth_na_share must be in [0,1)");
    }
    if (synth.cue_family < 1) fail("synth_cue_family must be positive");
  }
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (key == "encoder") {
    if (value == "cnn") encoder_mode = encoder::PoolMode::kCnn;
    else if (value == "pcnn") encoder_mode = encoder::PoolMode::kPcnn;
    else throw std::invalid_argument("config: encoder must be cnn or pcnn, got '" + value + "'");
  } else if (key == "d_w") d_w = to_int(key, value);
  else if (key == "d_p") d_p = to_int(key, value);
  else if (key == "filters") filters = to_int(key, value);
  else if (key == "filter_widths") filter_widths = to_int_list(key, value);
  else if (key == "l_max") l_max = to_int(key, value);
  else if (key == "dropout") dropout = to_double(key, value);
  else if (key == "batch_size") batch_size = to_int(key, value);
  else if (key == "lr_rc_pre") lr_rc_pre = to_double(key, value);
  else if (key == "lr_da_pre") lr_da_pre = to_double(key, value);
  else if (key == "lr_rc_co") lr_rc_co = to_double(key, value);
  else if (key == "lr_da_co") lr_da_co = to_double(key, value);
  else if (key == "rc_pretrain_epochs") rc_pretrain_epochs = to_int(key, value);
  else if (key == "da_pretrain_epochs") da_pretrain_epochs = to_int(key, value);
  else if (key == "cotrain_epochs") cotrain_epochs = to_int(key, value);
  else if (key == "fn_ratio") fn_ratio = to_double(key, value);
  else if (key == "seed") seed = to_u64(key, value);
  else if (key == "train_path") train_path = value;
  else if (key == "val_path") val_path = value;
  else if (key == "test_path") test_path = value;
  else if (key == "synth_relations") synth.n_relations = to_int(key, value);
  else if (key == "synth_train") synth.n_train = to_int(key, value);
  else if (key == "synth_val") synth.n_val = to_int(key, value);
  else if (key == "synth_test") synth.n_test = to_int(key, value);
  else if (key == "synth_vocab") synth.vocab_size = to_int(key, value);
  else if (key == "synth_pattern_strength") synth.pattern_strength = to_double(key, value);
  else if (key == "synth_na_share") synth.na_share = to_double(key, value);
  else if (key == "synth_cue_family") synth.cue_family = to_int(key, value);
  else if (key == "synth_class_layout") {
    if (value == "cycle") synth.class_layout = corpus::ClassLayout::kCycle;
    else if (value == "random") synth.class_layout = corpus::ClassLayout::kRandom;
    else throw std::invalid_argument("config: synth_class_layout must be cycle or random, got '" +
                                     value + "'");
  }
  else if (key == "word_vectors") word_vectors = value;
  else if (key == "freeze_word_table") freeze_word_table = to_bool(key, value);
  else if (key == "vocab_min_count") vocab_min_count = to_int(key, value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::snapshot() const {
  return {
      {"encoder", encoder::pool_mode_name(encoder_mode)},
      {"d_w", std::to_string(d_w)},
      {"d_p", std::to_string(d_p)},
      {"filters", std::to_string(filters)},
      {"filter_widths", format_list(filter_widths)},
      {"l_max", std::to_string(l_max)},
      {"dropout", format_double(dropout)},
      {"batch_size", std::to_string(batch_size)},
      {"lr_rc_pre", format_double(lr_rc_pre)},
      {"lr_da_pre", format_double(lr_da_pre)},
      {"lr_rc_co", format_double(lr_rc_co)},
      {"lr_da_co", format_double(lr_da_co)},
      {"rc_pretrain_epochs", std::to_string(rc_pretrain_epochs)},
      {"da_pretrain_epochs", std::to_string(da_pretrain_epochs)},
      {"cotrain_epochs", std::to_string(cotrain_epochs)},
      {"fn_ratio", format_double(fn_ratio)},
      {"seed", std::to_string(seed)},
      {"train_path", train_path},
      {"val_path", val_path},
      {"test_path", test_path},
      {"synth_relations", std::to_string(synth.n_relations)},
      {"synth_train", std::to_string(synth.n_train)},
      {"synth_val", std::to_string(synth.n_val)},
      {"synth_test", std::to_string(synth.n_test)},
      {"synth_vocab", std::to_string(synth.vocab_size)},
      {"synth_pattern_strength", format_double(synth.pattern_strength)},
      {"synth_na_share", format_double(synth.na_share)},
      {"synth_cue_family", std::to_string(synth.cue_family)},
      {"synth_class_layout",
       synth.class_layout == corpus::ClassLayout::kRandom ? "random" : "cycle"},
      {"word_vectors", word_vectors},
      {"freeze_word_table", freeze_word_table ? "true" : "false"},
      {"vocab_min_count", std::to_string(vocab_min_count)},
  };
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      cfg.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& key_equals_value) {
  for (const auto& kv : key_equals_value) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("override '" + kv + "': expected key=value");
    }
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
}

std::uint64_t derived_seed(const ExperimentConfig& cfg, SeedStream stream) {
  return mix_seed(cfg.seed, static_cast<std::uint64_t>(stream));
}

}  // namespace hfnd::pipeline
