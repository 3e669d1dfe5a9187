#include "hfnd/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "hfnd/rng.hpp"

namespace hfnd::corpus {

RelationInventory::RelationInventory(std::vector<std::string> names, int na_index)
    : names_(std::move(names)), na_(na_index) {
  if (names_.empty() || na_ < 0 || na_ >= static_cast<int>(names_.size())) {
    throw std::invalid_argument("RelationInventory: NA index out of range");
  }
  std::unordered_set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw std::invalid_argument("RelationInventory: empty relation name");
    if (!seen.insert(n).second) {
      throw std::invalid_argument("RelationInventory: duplicate relation name '" + n + "'");
    }
  }
}

const std::string& RelationInventory::name(int r) const {
  if (r < 0 || r >= size()) throw std::invalid_argument("RelationInventory: index out of range");
  return names_[static_cast<std::size_t>(r)];
}

std::optional<int> RelationInventory::index_of(std::string_view name) const {
  for (int i = 0; i < size(); ++i) {
    if (names_[static_cast<std::size_t>(i)] == name) return i;
  }
  return std::nullopt;
}

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  throw std::logic_error("split_name: bad split");
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  return std::nullopt;
}

void validate_instance(const Instance& inst, const RelationInventory& inventory) {
  const int n = static_cast<int>(inst.tokens.size());
  if (inst.id.empty()) throw std::invalid_argument("instance: empty id");
  if (n == 0) throw std::invalid_argument("instance " + inst.id + ": no tokens");
  for (const auto& tok : inst.tokens) {
    if (tok.empty() || tok.find_first_of(" \t\r\n") != std::string::npos) {
      throw std::invalid_argument("instance " + inst.id + ": empty or whitespace token");
    }
  }
  for (const Span* s : {&inst.head, &inst.tail}) {
    if (s->first < 0 || s->last < s->first || s->last >= n) {
      throw std::invalid_argument("instance " + inst.id + ": span out of range");
    }
  }
  if (!(inst.head.last < inst.tail.first || inst.tail.last < inst.head.first)) {
    throw std::invalid_argument("instance " + inst.id + ": overlapping entity spans");
  }
  if (inst.relation < 0 || inst.relation >= inventory.size()) {
    throw std::invalid_argument("instance " + inst.id + ": relation index out of range");
  }
}

std::string entity_surface(const Instance& inst, const Span& span) {
  std::string out;
  for (int t = span.first; t <= span.last; ++t) {
    if (t > span.first) out += ' ';
    out += inst.tokens[static_cast<std::size_t>(t)];
  }
  return out;
}

namespace {

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = line.find(sep, start);
    if (at == std::string::npos) {
      parts.push_back(line.substr(start));
      break;
    }
    parts.push_back(line.substr(start, at - start));
    start = at + 1;
  }
  return parts;
}

int parse_int(const std::string& text, const std::string& where) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument(where + ": bad integer '" + text + "'");
  }
  return value;
}

RelationInventory parse_relations_directive(const std::vector<std::string>& fields,
                                            const std::string& where) {
  std::vector<std::string> names;
  int na = -1;
  for (std::size_t i = 1; i < fields.size(); ++i) {
    std::string n = fields[i];
    if (!n.empty() && n[0] == '*') {
      if (na >= 0) throw std::invalid_argument(where + ": more than one NA relation");
      na = static_cast<int>(i - 1);
      n = n.substr(1);
    }
    names.push_back(std::move(n));
  }
  if (na < 0) throw std::invalid_argument(where + ": no relation marked '*' as NA");
  return RelationInventory(std::move(names), na);
}

}  // namespace

Dataset load_linerecords(const std::string& path, InventoryMode mode,
                         const RelationInventory* inventory) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  if (mode == InventoryMode::kExplicit && inventory == nullptr) {
    throw std::invalid_argument("load_linerecords: explicit mode needs an inventory");
  }

  Dataset d;
  bool have_inventory = false;
  if (mode == InventoryMode::kExplicit) {
    d.inventory = *inventory;
    have_inventory = true;
  }

  std::unordered_set<std::string> ids;
  std::string line;
  int lineno = 0;
  bool saw_record = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = path + ":" + std::to_string(lineno);
    if (line.empty()) throw std::invalid_argument(where + ": empty line");

    if (line[0] == '#') {
      if (saw_record) throw std::invalid_argument(where + ": directive after records");
      const auto fields = split_on(line, '\t');
      if (fields[0] == "#relations") {
        RelationInventory file_inv = parse_relations_directive(fields, where);
        if (have_inventory && !(file_inv == d.inventory)) {
          throw std::invalid_argument(where + ": relation header disagrees with supplied inventory");
        }
        d.inventory = std::move(file_inv);
        have_inventory = true;
      } else if (fields[0] == "#split") {
        if (fields.size() != 2) throw std::invalid_argument(where + ": bad #split directive");
        const auto s = parse_split(fields[1]);
        if (!s) throw std::invalid_argument(where + ": unknown split '" + fields[1] + "'");
        d.split = *s;
      } else {
        throw std::invalid_argument(where + ": unknown directive '" + fields[0] + "'");
      }
      continue;
    }

    saw_record = true;
    if (!have_inventory) {
      throw std::invalid_argument(where + ": record before a #relations header");
    }
    const auto fields = split_on(line, '\t');
    if (fields.size() != 7) {
      throw std::invalid_argument(where + ": expected 7 tab-separated fields, got " +
                                  std::to_string(fields.size()));
    }
    Instance inst;
    inst.id = fields[0];
    const auto rel = d.inventory.index_of(fields[1]);
    if (!rel) throw std::invalid_argument(where + ": unknown relation '" + fields[1] + "'");
    inst.relation = *rel;
    inst.head.first = parse_int(fields[2], where);
    inst.head.last = parse_int(fields[3], where);
    inst.tail.first = parse_int(fields[4], where);
    inst.tail.last = parse_int(fields[5], where);
    inst.tokens = split_on(fields[6], ' ');
    try {
      validate_instance(inst, d.inventory);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + ": " + e.what());
    }
    if (!ids.insert(inst.id).second) {
      throw std::invalid_argument(where + ": duplicate id '" + inst.id + "'");
    }
    d.instances.push_back(std::move(inst));
  }
  return d;
}

std::string serialize_linerecords(const Dataset& d) {
  std::string out = "#relations";
  for (int r = 0; r < d.inventory.size(); ++r) {
    out += '\t';
    if (d.inventory.is_na(r)) out += '*';
    out += d.inventory.name(r);
  }
  out += "\n#split\t" + split_name(d.split) + "\n";
  for (const Instance& inst : d.instances) {
    out += inst.id;
    out += '\t';
    out += d.inventory.name(inst.relation);
    out += '\t' + std::to_string(inst.head.first) + '\t' + std::to_string(inst.head.last);
    out += '\t' + std::to_string(inst.tail.first) + '\t' + std::to_string(inst.tail.last);
    out += '\t';
    for (std::size_t t = 0; t < inst.tokens.size(); ++t) {
      if (t > 0) out += ' ';
      out += inst.tokens[t];
    }
    out += '\n';
  }
  return out;
}

void save_linerecords(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << serialize_linerecords(d);
  if (!out) throw std::runtime_error(path + ": write failed");
}

RelationInventory load_inventory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto fields = split_on(line, '\t');
  if (fields.empty() || fields[0] != "#relations") {
    throw std::invalid_argument(path + ":1: expected a #relations line");
  }
  return parse_relations_directive(fields, path + ":1");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.n_relations < 2) throw std::invalid_argument("generate_synthetic: need NA plus one relation");
  if (spec.vocab_size < 1) throw std::invalid_argument("generate_synthetic: empty filler vocabulary");
  if (spec.n_train < 0 || spec.n_val < 0 || spec.n_test < 0) {
    throw std::invalid_argument("generate_synthetic: negative split size");
  }
  if (spec.pattern_strength < 0.0 || spec.pattern_strength > 1.0) {
    throw std::invalid_argument("generate_synthetic: pattern_strength outside [0,1]");
  }
  if (spec.na_share < 0.0 || spec.na_share >= 1.0) {
    throw std::invalid_argument("generate_synthetic: na_share outside [0,1)");
  }
  if (spec.cue_family < 1) {
    throw std::invalid_argument("generate_synthetic: cue_family must be >= 1");
  }

  std::vector<std::string> names = {"NA"};
  for (int c = 1; c < spec.n_relations; ++c) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "R%02d", c);
    names.emplace_back(buf);
  }
  const RelationInventory inventory(names, 0);

  Rng rng(seed);
  long entity_counter = 0;

  auto make_split = [&](Split split, int count) {
    Dataset d;
    d.inventory = inventory;
    d.split = split;
    d.instances.reserve(static_cast<std::size_t>(count));
    // Cycle layout: with na_share = 0 every class including NA takes one slot
    // per cycle; otherwise the leading floor(na_share * count) instances are
    // NA and the rest cycle through the positive classes. Random layout draws
    // each label independently under the same NA probability.
    const int n_na = static_cast<int>(std::floor(spec.na_share * count + 1e-9));
    const double p_na = spec.na_share == 0.0 ? 1.0 / spec.n_relations : spec.na_share;
    auto draw_relation = [&](int i) {
      if (spec.class_layout == ClassLayout::kRandom) {
        if (rng.uniform() < p_na) return 0;
        return 1 + static_cast<int>(rng.uniform_index(
                       static_cast<std::size_t>(spec.n_relations - 1)));
      }
      if (spec.na_share == 0.0) return i % spec.n_relations;
      return i < n_na ? 0 : (i - n_na) % (spec.n_relations - 1) + 1;
    };
    for (int i = 0; i < count; ++i) {
      const int relation = draw_relation(i);
      Instance inst;
      char idbuf[32];
      std::snprintf(idbuf, sizeof idbuf, "%s-%05d", split_name(split).c_str(), i);
      inst.id = idbuf;
      inst.relation = relation;

      const int pre = static_cast<int>(rng.uniform_index(3));
      const int mid = 1 + static_cast<int>(rng.uniform_index(4));
      const int post = static_cast<int>(rng.uniform_index(3));
      const bool head_first = rng.uniform() < 0.5;
      const bool cued = relation != 0 && rng.uniform() < spec.pattern_strength;
      const int cue_slot = cued ? static_cast<int>(rng.uniform_index(static_cast<std::size_t>(mid))) : -1;
      std::string cue_tok;
      if (cued) {
        cue_tok = "cue" + std::to_string(relation);
        if (spec.cue_family > 1) {
          cue_tok += "_" + std::to_string(
                              rng.uniform_index(static_cast<std::size_t>(spec.cue_family)));
        }
      }

      auto filler = [&]() { return "w" + std::to_string(rng.uniform_index(static_cast<std::size_t>(spec.vocab_size))); };
      const std::string head_tok = "eh" + std::to_string(entity_counter);
      const std::string tail_tok = "et" + std::to_string(entity_counter);
      ++entity_counter;

      for (int t = 0; t < pre; ++t) inst.tokens.push_back(filler());
      const int first_at = static_cast<int>(inst.tokens.size());
      inst.tokens.push_back(head_first ? head_tok : tail_tok);
      for (int t = 0; t < mid; ++t) {
        inst.tokens.push_back(t == cue_slot ? cue_tok : filler());
      }
      const int second_at = static_cast<int>(inst.tokens.size());
      inst.tokens.push_back(head_first ? tail_tok : head_tok);
      for (int t = 0; t < post; ++t) inst.tokens.push_back(filler());

      inst.head = head_first ? Span{first_at, first_at} : Span{second_at, second_at};
      inst.tail = head_first ? Span{second_at, second_at} : Span{first_at, first_at};
      d.instances.push_back(std::move(inst));
    }
    return d;
  };

  SyntheticData out;
  out.train = make_split(Split::kTrain, spec.n_train);
  out.val = make_split(Split::kValidation, spec.n_val);
  out.test = make_split(Split::kTest, spec.n_test);
  return out;
}

namespace {

std::string triple_key(const Instance& inst) {
  return entity_surface(inst, inst.head) + '\x1f' + entity_surface(inst, inst.tail) + '\x1f' +
         std::to_string(inst.relation);
}

Dataset drop_matching(const Dataset& d, const std::unordered_set<std::string>& test_triples) {
  Dataset out;
  out.inventory = d.inventory;
  out.split = d.split;
  for (const Instance& inst : d.instances) {
    if (test_triples.count(triple_key(inst)) == 0) out.instances.push_back(inst);
  }
  return out;
}

}  // namespace

HeldoutResult heldout_filter(const Dataset& train, const Dataset& val, const Dataset& test) {
  if (!(train.inventory == val.inventory) || !(train.inventory == test.inventory)) {
    throw std::invalid_argument("heldout_filter: splits disagree on the relation inventory");
  }
  std::unordered_set<std::string> test_triples;
  for (const Instance& inst : test.instances) test_triples.insert(triple_key(inst));
  HeldoutResult r;
  r.train = drop_matching(train, test_triples);
  r.val = drop_matching(val, test_triples);
  return r;
}

void save_fliplog(const FlipLog& log, const RelationInventory& inventory,
                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  for (const auto& [id, rel] : log.entries) {
    out << id << '\t' << inventory.name(rel) << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

FlipLog load_fliplog(const std::string& path, const RelationInventory& inventory) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  FlipLog log;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = path + ":" + std::to_string(lineno);
    if (line.empty()) throw std::invalid_argument(where + ": empty line");
    const auto fields = split_on(line, '\t');
    if (fields.size() != 2) throw std::invalid_argument(where + ": expected 'id<TAB>relation'");
    const auto rel = inventory.index_of(fields[1]);
    if (!rel) throw std::invalid_argument(where + ": unknown relation '" + fields[1] + "'");
    if (inventory.is_na(*rel)) {
      throw std::invalid_argument(where + ": flip log records an NA original");
    }
    if (!log.entries.emplace(fields[0], *rel).second) {
      throw std::invalid_argument(where + ": duplicate id '" + fields[0] + "'");
    }
  }
  return log;
}

InjectResult inject_false_negatives(const Dataset& d, double ratio, std::uint64_t seed) {
  if (d.split == Split::kTest) {
    throw std::invalid_argument("inject_false_negatives: the test split must stay untouched");
  }
  if (ratio < 0.0 || ratio > 1.0) {
    throw std::invalid_argument("inject_false_negatives: ratio outside [0,1]");
  }
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < d.instances.size(); ++i) {
    if (!d.inventory.is_na(d.instances[i].relation)) positives.push_back(i);
  }
  // The tiny epsilon absorbs representation error in ratio * P so counts
  // match the decimal-arithmetic floor.
  const auto k = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(positives.size()) + 1e-9));

  Rng rng(seed);
  rng.shuffle(positives);

  InjectResult r;
  r.dataset = d;
  for (std::size_t j = 0; j < k; ++j) {
    Instance& inst = r.dataset.instances[positives[j]];
    r.flips.entries.emplace(inst.id, inst.relation);
    inst.relation = d.inventory.na_index();
  }
  return r;
}

Dataset restore_flips(const Dataset& d, const FlipLog& log) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < d.instances.size(); ++i) index.emplace(d.instances[i].id, i);
  Dataset out = d;
  for (const auto& [id, rel] : log.entries) {
    const auto it = index.find(id);
    if (it == index.end()) {
      throw std::invalid_argument("restore_flips: id '" + id + "' not in dataset");
    }
    Instance& inst = out.instances[it->second];
    if (!d.inventory.is_na(inst.relation)) {
      throw std::invalid_argument("restore_flips: instance '" + id + "' is not NA");
    }
    if (d.inventory.is_na(rel)) {
      throw std::invalid_argument("restore_flips: logged original for '" + id + "' is NA");
    }
    inst.relation = rel;
  }
  return out;
}

}  // namespace hfnd::corpus
