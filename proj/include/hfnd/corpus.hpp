#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hfnd::corpus {

// The relation label set. Exactly one entry is the negative class NA; all
// names are unique and indices are dense 0..n-1.
class RelationInventory {
 public:
  RelationInventory() = default;
  RelationInventory(std::vector<std::string> names, int na_index);

  int size() const { return static_cast<int>(names_.size()); }
  int na_index() const { return na_; }
  bool is_na(int r) const { return r == na_; }
  int positive_count() const { return size() - 1; }
  const std::string& name(int r) const;
  std::optional<int> index_of(std::string_view name) const;

  bool operator==(const RelationInventory&) const = default;

 private:
  std::vector<std::string> names_;
  int na_ = -1;
};

// Inclusive token index range of an entity mention.
struct Span {
  int first = 0;
  int last = 0;
  bool operator==(const Span&) const = default;
};

struct Instance {
  std::string id;
  std::vector<std::string> tokens;
  Span head, tail;
  int relation = -1;

  bool operator==(const Instance&) const = default;
};

enum class Split { kTrain, kValidation, kTest };

std::string split_name(Split s);
std::optional<Split> parse_split(std::string_view name);

struct Dataset {
  RelationInventory inventory;
  std::vector<Instance> instances;
  Split split = Split::kTrain;

  bool operator==(const Dataset&) const = default;
};

// Throws std::invalid_argument describing the first violated invariant:
// empty tokens, span out of range or inverted, overlapping spans, or a
// relation index outside the inventory.
void validate_instance(const Instance& inst, const RelationInventory& inventory);

// Whitespace-joined surface form of a span, used for held-out triple keys.
std::string entity_surface(const Instance& inst, const Span& span);

// Line-record file format, one instance per line:
//   id \t relation \t head_first \t head_last \t tail_first \t tail_last \t tokens
// with tokens space-separated. Two optional leading directives:
//   #relations \t NAME...   (the NA name carries a '*' prefix)
//   #split \t train|validation|test
// The canonical serialization always writes both directives.
enum class InventoryMode { kEmbedded, kExplicit };

Dataset load_linerecords(const std::string& path, InventoryMode mode,
                         const RelationInventory* inventory = nullptr);
std::string serialize_linerecords(const Dataset& d);
void save_linerecords(const Dataset& d, const std::string& path);

// A one-line file holding only the #relations directive.
RelationInventory load_inventory(const std::string& path);

// Synthetic corpus: each positive relation has a characteristic cue token
// planted between the two entity mentions with probability pattern_strength;
// NA sentences carry no cue. Entity surface tokens are unique per instance
// across all three splits, so the held-out filter leaves them untouched.
// How relations are assigned to generated instances. kCycle walks the classes
// round-robin, giving exact per-class counts (handy for fixtures that need a
// precise positive total); kRandom draws each label independently, so class
// counts fluctuate seed to seed the way harvested corpora do.
enum class ClassLayout { kCycle, kRandom };

struct SyntheticSpec {
  int n_relations = 9;  // including NA
  int n_train = 2000;
  int n_val = 500;
  int n_test = 500;
  int vocab_size = 50;  // filler token pool
  double pattern_strength = 1.0;
  // Fraction of instances labeled NA. Distantly supervised corpora are
  // NA-heavy, so realistic stand-ins want a majority share here. 0 selects
  // the uniform layout where NA is one class among n_relations.
  double na_share = 0.0;
  ClassLayout class_layout = ClassLayout::kCycle;
  // Trigger tokens per relation; each positive sentence draws one member.
  // Families > 1 mimic relations with several surface phrasings and keep any
  // single token from dominating a relation's decision boundary.
  int cue_family = 1;
};

struct SyntheticData {
  Dataset train, val, test;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Removes from train and validation every instance whose
// (head surface, tail surface, relation) triple occurs in the test set.
struct HeldoutResult {
  Dataset train, val;
};

HeldoutResult heldout_filter(const Dataset& train, const Dataset& val, const Dataset& test);

// Record of injected false negatives: instance id -> original positive
// relation. Ordered by id so serialization is canonical.
struct FlipLog {
  std::map<std::string, int> entries;

  bool operator==(const FlipLog&) const = default;
};

void save_fliplog(const FlipLog& log, const RelationInventory& inventory,
                  const std::string& path);
FlipLog load_fliplog(const std::string& path, const RelationInventory& inventory);

// Relabels exactly floor(ratio * P) uniformly chosen positive instances to
// NA, where P is the number of positives. Never touches the test split.
struct InjectResult {
  Dataset dataset;
  FlipLog flips;
};

InjectResult inject_false_negatives(const Dataset& d, double ratio, std::uint64_t seed);

// Restores flipped instances to their logged original relations.
Dataset restore_flips(const Dataset& d, const FlipLog& log);

}  // namespace hfnd::corpus
