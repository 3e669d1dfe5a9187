#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hfnd/corpus.hpp"

using namespace hfnd;
using corpus::Dataset;
using corpus::Instance;
using corpus::RelationInventory;
using corpus::Span;
using corpus::Split;

namespace {

std::string temp_path(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "hfnd-test-corpus";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

RelationInventory small_inventory() { return RelationInventory({"NA", "born_in", "works_at"}, 0); }

Instance make_inst(std::string id, std::vector<std::string> tokens, Span head, Span tail,
                   int rel) {
  Instance inst;
  inst.id = std::move(id);
  inst.tokens = std::move(tokens);
  inst.head = head;
  inst.tail = tail;
  inst.relation = rel;
  return inst;
}

Dataset small_dataset() {
  Dataset d;
  d.inventory = small_inventory();
  d.split = Split::kTrain;
  d.instances.push_back(make_inst("a1", {"alice", "was", "born", "in", "paris"}, {0, 0}, {4, 4}, 1));
  d.instances.push_back(make_inst("a2", {"bob", "works", "at", "acme", "corp"}, {0, 0}, {3, 4}, 2));
  d.instances.push_back(make_inst("a3", {"carol", "met", "dave"}, {0, 0}, {2, 2}, 0));
  return d;
}

long count_relation(const Dataset& d, int r) {
  return std::count_if(d.instances.begin(), d.instances.end(),
                       [r](const Instance& i) { return i.relation == r; });
}

}  // namespace

TEST_CASE("relation inventory: construction and lookups") {
  const auto inv = small_inventory();
  CHECK(inv.size() == 3);
  CHECK(inv.na_index() == 0);
  CHECK(inv.positive_count() == 2);
  CHECK(inv.is_na(0));
  CHECK_FALSE(inv.is_na(1));
  CHECK(inv.name(2) == "works_at");
  CHECK(inv.index_of("born_in") == 1);
  CHECK_FALSE(inv.index_of("nope").has_value());
  CHECK_THROWS_AS(inv.name(3), std::invalid_argument);

  CHECK_THROWS_AS(RelationInventory({}, 0), std::invalid_argument);
  CHECK_THROWS_AS(RelationInventory({"NA", "r"}, 2), std::invalid_argument);
  CHECK_THROWS_AS(RelationInventory({"NA", "r"}, -1), std::invalid_argument);
  CHECK_THROWS_AS(RelationInventory({"NA", "NA"}, 0), std::invalid_argument);
  CHECK_THROWS_AS(RelationInventory({"NA", ""}, 0), std::invalid_argument);
}

TEST_CASE("validate_instance: every invariant is enforced") {
  const auto inv = small_inventory();
  auto good = make_inst("ok", {"a", "b", "c"}, {0, 0}, {2, 2}, 1);
  CHECK_NOTHROW(corpus::validate_instance(good, inv));

  auto bad = good;
  bad.id = "";
  CHECK_THROWS_AS(corpus::validate_instance(bad, inv), std::invalid_argument);

  bad = good;
  bad.tokens.clear();
  CHECK_THROWS_AS(corpus::validate_instance(bad, inv), std::invalid_argument);

  bad = good;
  bad.tokens[1] = "has space";
  CHECK_THROWS_AS(corpus::validate_instance(bad, inv), std::invalid_argument);
  bad.tokens[1] = "";
  CHECK_THROWS_AS(corpus::validate_instance(bad, inv), std::invalid_argument);

  bad = good;
  bad.head = {-1, 0};
  CHECK_THROWS_AS(corpus::validate_instance(bad, inv), std::invalid_argument);
  bad.head = {0, 3};
  CHECK_THROWS_AS(corpus::validate_instance(bad, inv), std::invalid_argument);
  bad.head = {2, 1};
  CHECK_THROWS_AS(corpus::validate_instance(bad, inv), std::invalid_argument);

  bad = good;  // overlapping spans
  bad.head = {0, 1};
  bad.tail = {1, 2};
  CHECK_THROWS_AS(corpus::validate_instance(bad, inv), std::invalid_argument);

  bad = good;
  bad.relation = 3;
  CHECK_THROWS_AS(corpus::validate_instance(bad, inv), std::invalid_argument);
  bad.relation = -1;
  CHECK_THROWS_AS(corpus::validate_instance(bad, inv), std::invalid_argument);
}

TEST_CASE("entity_surface joins span tokens with spaces") {
  const auto inst = make_inst("s", {"the", "new", "york", "times", "reported"}, {1, 3}, {4, 4}, 0);
  CHECK(corpus::entity_surface(inst, inst.head) == "new york times");
  CHECK(corpus::entity_surface(inst, inst.tail) == "reported");
}

TEST_CASE("line records: canonical serialization is frozen") {
  const auto d = small_dataset();
  const std::string expected =
      "#relations\t*NA\tborn_in\tworks_at\n"
      "#split\ttrain\n"
      "a1\tborn_in\t0\t0\t4\t4\talice was born in paris\n"
      "a2\tworks_at\t0\t0\t3\t4\tbob works at acme corp\n"
      "a3\tNA\t0\t0\t2\t2\tcarol met dave\n";
  CHECK(corpus::serialize_linerecords(d) == expected);
}

TEST_CASE("line records: save/load roundtrip preserves the dataset") {
  const auto d = small_dataset();
  const auto path = temp_path("roundtrip.txt");
  corpus::save_linerecords(d, path);
  const auto back = corpus::load_linerecords(path, corpus::InventoryMode::kEmbedded);
  CHECK(back == d);

  // Serialization of the reloaded dataset is byte-stable.
  CHECK(corpus::serialize_linerecords(back) == corpus::serialize_linerecords(d));
}

TEST_CASE("line records: loader error cases") {
  const auto load = [](const std::string& content) {
    const auto path = temp_path("bad.txt");
    write_file(path, content);
    return corpus::load_linerecords(path, corpus::InventoryMode::kEmbedded);
  };
  const std::string header = "#relations\t*NA\tr1\n";

  CHECK_THROWS_AS(load("x\tr1\t0\t0\t2\t2\ta b c\n"), std::invalid_argument);  // no header
  CHECK_THROWS_AS(load(header + "x\tr9\t0\t0\t2\t2\ta b c\n"), std::invalid_argument);  // bad rel
  CHECK_THROWS_AS(load(header + "x\tr1\t0\t0\t2\t2\n"), std::invalid_argument);  // 6 fields
  CHECK_THROWS_AS(load(header + "x\tr1\t0\t0\t2\t2\ta b c\textra\n"), std::invalid_argument);
  CHECK_THROWS_AS(load(header + "x\tr1\tzero\t0\t2\t2\ta b c\n"), std::invalid_argument);
  CHECK_THROWS_AS(load(header + "\n"), std::invalid_argument);  // empty line
  CHECK_THROWS_AS(load("#relations\tNA\tr1\nx\tr1\t0\t0\t2\t2\ta b c\n"),
                  std::invalid_argument);  // no '*' NA marker
  CHECK_THROWS_AS(load("#relations\t*NA\t*r1\n"), std::invalid_argument);  // two NA markers
  CHECK_THROWS_AS(load(header + "x\tr1\t0\t0\t2\t2\ta b c\n#split\ttrain\n"),
                  std::invalid_argument);  // directive after records
  CHECK_THROWS_AS(load(header + "#split\tweird\n"), std::invalid_argument);
  CHECK_THROWS_AS(load(header + "#split\ttrain\textra\n"), std::invalid_argument);
  CHECK_THROWS_AS(load(header + "#whatisthis\tx\n"), std::invalid_argument);
  CHECK_THROWS_AS(load(header + "x\tr1\t0\t0\t2\t2\ta b c\nx\tr1\t0\t0\t2\t2\ta b c\n"),
                  std::invalid_argument);  // duplicate id

  CHECK_THROWS_AS(corpus::load_linerecords(temp_path("no-such-file.txt"),
                                           corpus::InventoryMode::kEmbedded),
                  std::runtime_error);
}

TEST_CASE("line records: directives before records are accepted, CRLF tolerated") {
  const auto path = temp_path("directives.txt");
  write_file(path,
             "#relations\t*NA\tr1\r\n"
             "#split\tvalidation\r\n"
             "x\tr1\t0\t0\t2\t2\ta b c\r\n");
  const auto d = corpus::load_linerecords(path, corpus::InventoryMode::kEmbedded);
  CHECK(d.split == Split::kValidation);
  CHECK(d.instances.size() == 1);
  CHECK(d.instances[0].tokens == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("line records: explicit inventory mode") {
  const auto inv = RelationInventory({"NA", "r1"}, 0);
  const auto path = temp_path("explicit.txt");

  // No header in the file: the supplied inventory rules.
  write_file(path, "x\tr1\t0\t0\t2\t2\ta b c\n");
  const auto d = corpus::load_linerecords(path, corpus::InventoryMode::kExplicit, &inv);
  CHECK(d.inventory == inv);
  CHECK(d.instances.size() == 1);

  // A matching header is fine; a conflicting one is an error.
  write_file(path, "#relations\t*NA\tr1\nx\tr1\t0\t0\t2\t2\ta b c\n");
  CHECK_NOTHROW(corpus::load_linerecords(path, corpus::InventoryMode::kExplicit, &inv));
  write_file(path, "#relations\t*NA\tr2\nx\tr2\t0\t0\t2\t2\ta b c\n");
  CHECK_THROWS_AS(corpus::load_linerecords(path, corpus::InventoryMode::kExplicit, &inv),
                  std::invalid_argument);

  CHECK_THROWS_AS(corpus::load_linerecords(path, corpus::InventoryMode::kExplicit, nullptr),
                  std::invalid_argument);
}

TEST_CASE("load_inventory reads a bare #relations line") {
  const auto path = temp_path("inventory.txt");
  write_file(path, "#relations\tr1\t*none\tr2\n");
  const auto inv = corpus::load_inventory(path);
  CHECK(inv.size() == 3);
  CHECK(inv.na_index() == 1);
  CHECK(inv.name(1) == "none");

  write_file(path, "nonsense\n");
  CHECK_THROWS_AS(corpus::load_inventory(path), std::invalid_argument);
  write_file(path, "");
  CHECK_THROWS_AS(corpus::load_inventory(path), std::invalid_argument);
}

TEST_CASE("split names roundtrip") {
  for (const auto s : {Split::kTrain, Split::kValidation, Split::kTest}) {
    CHECK(corpus::parse_split(corpus::split_name(s)) == s);
  }
  CHECK_FALSE(corpus::parse_split("dev").has_value());
}

TEST_CASE("synthetic corpus: determinism and split identity") {
  corpus::SyntheticSpec spec;
  spec.n_relations = 4;
  spec.n_train = 40;
  spec.n_val = 12;
  spec.n_test = 12;

  const auto a = corpus::generate_synthetic(spec, 99);
  const auto b = corpus::generate_synthetic(spec, 99);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);

  const auto c = corpus::generate_synthetic(spec, 100);
  CHECK_FALSE(a.train == c.train);

  CHECK(a.train.split == Split::kTrain);
  CHECK(a.val.split == Split::kValidation);
  CHECK(a.test.split == Split::kTest);
  CHECK(a.train.instances.size() == 40);
  CHECK(a.val.instances.size() == 12);
  CHECK(a.test.instances.size() == 12);
  CHECK(a.train.instances[0].id == "train-00000");
  CHECK(a.val.instances[3].id == "validation-00003");

  // Every instance passes the shared validator.
  for (const auto* d : {&a.train, &a.val, &a.test}) {
    for (const auto& inst : d->instances) {
      CHECK_NOTHROW(corpus::validate_instance(inst, d->inventory));
    }
  }
}

TEST_CASE("synthetic corpus: cycle layout gives exact class counts") {
  corpus::SyntheticSpec spec;
  spec.n_relations = 9;
  spec.n_train = 18;
  spec.n_val = 9;
  spec.n_test = 9;
  const auto data = corpus::generate_synthetic(spec, 5);
  for (int r = 0; r < 9; ++r) {
    CHECK(count_relation(data.train, r) == 2);
    CHECK(count_relation(data.val, r) == 1);
  }
}

TEST_CASE("synthetic corpus: cycle layout honors na_share") {
  corpus::SyntheticSpec spec;
  spec.n_relations = 3;
  spec.n_train = 10;
  spec.n_val = 4;
  spec.n_test = 4;
  spec.na_share = 0.5;
  const auto data = corpus::generate_synthetic(spec, 5);
  // floor(0.5 * 10) = 5 NA, then positives cycle: R01,R02,R01,R02,R01.
  CHECK(count_relation(data.train, 0) == 5);
  CHECK(count_relation(data.train, 1) == 3);
  CHECK(count_relation(data.train, 2) == 2);
  // The NA block leads, by construction.
  for (int i = 0; i < 5; ++i) CHECK(data.train.instances[static_cast<std::size_t>(i)].relation == 0);
}

TEST_CASE("synthetic corpus: random layout fluctuates but stays in range") {
  corpus::SyntheticSpec spec;
  spec.n_relations = 5;
  spec.n_train = 200;
  spec.n_val = 10;
  spec.n_test = 10;
  spec.class_layout = corpus::ClassLayout::kRandom;

  // Identical seeds agree; class counts differ across seeds (the point of
  // the layout) while every label stays valid.
  const auto a = corpus::generate_synthetic(spec, 1);
  const auto b = corpus::generate_synthetic(spec, 1);
  CHECK(a.train == b.train);

  std::vector<long> counts_a, counts_c;
  const auto c = corpus::generate_synthetic(spec, 2);
  for (int r = 0; r < 5; ++r) {
    counts_a.push_back(count_relation(a.train, r));
    counts_c.push_back(count_relation(c.train, r));
  }
  CHECK(counts_a != counts_c);
  for (const auto& inst : a.train.instances) {
    CHECK(inst.relation >= 0);
    CHECK(inst.relation < 5);
  }
}

TEST_CASE("synthetic corpus: cue tokens mark positives between the entities") {
  corpus::SyntheticSpec spec;
  spec.n_relations = 4;
  spec.n_train = 60;
  spec.n_val = 8;
  spec.n_test = 8;
  spec.pattern_strength = 1.0;
  const auto data = corpus::generate_synthetic(spec, 17);

  for (const auto& inst : data.train.instances) {
    const std::string cue = "cue" + std::to_string(inst.relation);
    const int lo = std::min(inst.head.first, inst.tail.first);
    const int hi = std::max(inst.head.first, inst.tail.first);
    bool found = false;
    for (int t = 0; t < static_cast<int>(inst.tokens.size()); ++t) {
      if (inst.tokens[static_cast<std::size_t>(t)].rfind("cue", 0) == 0) {
        // Only the own-relation cue appears, strictly between the entities.
        CHECK(inst.tokens[static_cast<std::size_t>(t)] == cue);
        CHECK(t > lo);
        CHECK(t < hi);
        found = true;
      }
    }
    CHECK(found == (inst.relation != 0));
  }

  spec.pattern_strength = 0.0;
  const auto plain = corpus::generate_synthetic(spec, 17);
  for (const auto& inst : plain.train.instances) {
    for (const auto& tok : inst.tokens) CHECK(tok.rfind("cue", 0) != 0);
  }
}

TEST_CASE("synthetic corpus: cue families draw member suffixes") {
  corpus::SyntheticSpec spec;
  spec.n_relations = 3;
  spec.n_train = 90;
  spec.n_val = 3;
  spec.n_test = 3;
  spec.cue_family = 3;
  const auto data = corpus::generate_synthetic(spec, 23);
  std::set<std::string> seen;
  for (const auto& inst : data.train.instances) {
    for (const auto& tok : inst.tokens) {
      if (tok.rfind("cue", 0) == 0) {
        // cue<relation>_<member>, member < 3
        const auto us = tok.find('_');
        REQUIRE(us != std::string::npos);
        const int member = std::stoi(tok.substr(us + 1));
        CHECK(member >= 0);
        CHECK(member < 3);
        CHECK(tok.substr(0, us) == "cue" + std::to_string(inst.relation));
        seen.insert(tok);
      }
    }
  }
  // With 90 draws over 2 relations x 3 members, every member should appear.
  CHECK(seen.size() == 6);
}

TEST_CASE("synthetic corpus: entity surfaces are globally unique") {
  corpus::SyntheticSpec spec;
  spec.n_relations = 3;
  spec.n_train = 30;
  spec.n_val = 10;
  spec.n_test = 10;
  const auto data = corpus::generate_synthetic(spec, 31);
  std::set<std::string> surfaces;
  for (const auto* d : {&data.train, &data.val, &data.test}) {
    for (const auto& inst : d->instances) {
      CHECK(surfaces.insert(corpus::entity_surface(inst, inst.head)).second);
      CHECK(surfaces.insert(corpus::entity_surface(inst, inst.tail)).second);
    }
  }
}

TEST_CASE("synthetic corpus: specification validation") {
  corpus::SyntheticSpec spec;
  spec.n_relations = 1;
  CHECK_THROWS_AS(corpus::generate_synthetic(spec, 1), std::invalid_argument);
  spec = {};
  spec.vocab_size = 0;
  CHECK_THROWS_AS(corpus::generate_synthetic(spec, 1), std::invalid_argument);
  spec = {};
  spec.n_train = -1;
  CHECK_THROWS_AS(corpus::generate_synthetic(spec, 1), std::invalid_argument);
  spec = {};
  spec.pattern_strength = 1.5;
  CHECK_THROWS_AS(corpus::generate_synthetic(spec, 1), std::invalid_argument);
  spec = {};
  spec.na_share = 1.0;
  CHECK_THROWS_AS(corpus::generate_synthetic(spec, 1), std::invalid_argument);
  spec = {};
  spec.na_share = -0.1;
  CHECK_THROWS_AS(corpus::generate_synthetic(spec, 1), std::invalid_argument);
  spec = {};
  spec.cue_family = 0;
  CHECK_THROWS_AS(corpus::generate_synthetic(spec, 1), std::invalid_argument);
}

TEST_CASE("heldout filter drops train/val triples that appear in test") {
  const auto inv = small_inventory();
  Dataset train, val, test;
  train.inventory = val.inventory = test.inventory = inv;
  train.split = Split::kTrain;
  val.split = Split::kValidation;
  test.split = Split::kTest;

  // Same surfaces and relation as a test instance -> dropped.
  train.instances.push_back(make_inst("t1", {"alice", "visited", "paris"}, {0, 0}, {2, 2}, 1));
  // Same surfaces, different relation -> kept.
  train.instances.push_back(make_inst("t2", {"alice", "visited", "paris"}, {0, 0}, {2, 2}, 2));
  // Unrelated -> kept.
  train.instances.push_back(make_inst("t3", {"bob", "knows", "carol"}, {0, 0}, {2, 2}, 1));
  val.instances.push_back(make_inst("v1", {"alice", "in", "paris"}, {0, 0}, {2, 2}, 1));
  val.instances.push_back(make_inst("v2", {"dave", "in", "oslo"}, {0, 0}, {2, 2}, 1));
  test.instances.push_back(make_inst("x1", {"alice", "near", "paris"}, {0, 0}, {2, 2}, 1));

  const auto r = corpus::heldout_filter(train, val, test);
  REQUIRE(r.train.instances.size() == 2);
  CHECK(r.train.instances[0].id == "t2");
  CHECK(r.train.instances[1].id == "t3");
  REQUIRE(r.val.instances.size() == 1);
  CHECK(r.val.instances[0].id == "v2");
  CHECK(r.train.split == Split::kTrain);
  CHECK(r.val.split == Split::kValidation);

  // Filtering again changes nothing.
  const auto again = corpus::heldout_filter(r.train, r.val, test);
  CHECK(again.train == r.train);
  CHECK(again.val == r.val);

  Dataset other = test;
  other.inventory = RelationInventory({"NA", "different"}, 0);
  other.instances.clear();
  CHECK_THROWS_AS(corpus::heldout_filter(train, val, other), std::invalid_argument);
}

TEST_CASE("heldout filter is a no-op on the synthetic corpus") {
  corpus::SyntheticSpec spec;
  spec.n_relations = 4;
  spec.n_train = 30;
  spec.n_val = 10;
  spec.n_test = 10;
  const auto data = corpus::generate_synthetic(spec, 7);
  const auto r = corpus::heldout_filter(data.train, data.val, data.test);
  CHECK(r.train == data.train);
  CHECK(r.val == data.val);
}

TEST_CASE("flip log: save/load roundtrip and canonical id order") {
  const auto inv = small_inventory();
  corpus::FlipLog log;
  log.entries = {{"zz", 1}, {"aa", 2}, {"mm", 1}};
  const auto path = temp_path("flips.txt");
  corpus::save_fliplog(log, inv, path);

  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text == "aa\tworks_at\nmm\tborn_in\nzz\tborn_in\n");

  const auto back = corpus::load_fliplog(path, inv);
  CHECK(back == log);
}

TEST_CASE("flip log: loader rejects malformed content") {
  const auto inv = small_inventory();
  const auto path = temp_path("badflips.txt");
  write_file(path, "a\tborn_in\textra\n");
  CHECK_THROWS_AS(corpus::load_fliplog(path, inv), std::invalid_argument);
  write_file(path, "a\tmystery\n");
  CHECK_THROWS_AS(corpus::load_fliplog(path, inv), std::invalid_argument);
  write_file(path, "a\tNA\n");  // NA can never be a flip's original label
  CHECK_THROWS_AS(corpus::load_fliplog(path, inv), std::invalid_argument);
  write_file(path, "a\tborn_in\na\tborn_in\n");
  CHECK_THROWS_AS(corpus::load_fliplog(path, inv), std::invalid_argument);
  write_file(path, "\n");
  CHECK_THROWS_AS(corpus::load_fliplog(path, inv), std::invalid_argument);
  CHECK_THROWS_AS(corpus::load_fliplog(temp_path("absent.txt"), inv), std::runtime_error);
}

TEST_CASE("false-negative injection: exact floor counts across ratios") {
  corpus::SyntheticSpec spec;
  spec.n_relations = 5;
  spec.n_train = 120;  // cycle layout: 24 NA, 96 positives
  spec.n_val = 5;
  spec.n_test = 5;
  const auto data = corpus::generate_synthetic(spec, 11);
  long positives = 0;
  for (const auto& inst : data.train.instances) {
    if (inst.relation != 0) ++positives;
  }
  REQUIRE(positives == 96);

  for (const double ratio : {0.0, 0.1, 0.25, 1.0 / 3.0, 0.5, 0.99, 1.0}) {
    const auto r = corpus::inject_false_negatives(data.train, ratio, 3);
    const auto expected = static_cast<std::size_t>(std::floor(ratio * 96.0 + 1e-9));
    CHECK(r.flips.entries.size() == expected);

    long now_na = 0;
    for (const auto& inst : r.dataset.instances) {
      if (inst.relation == 0) ++now_na;
    }
    CHECK(now_na == 24 + static_cast<long>(expected));

    // Every logged entry names an instance that is now NA and was the
    // logged positive before.
    std::map<std::string, const Instance*> originals;
    for (const auto& inst : data.train.instances) originals.emplace(inst.id, &inst);
    for (const auto& [id, orig_rel] : r.flips.entries) {
      CHECK(originals.at(id)->relation == orig_rel);
      CHECK(orig_rel != 0);
    }
  }
}

TEST_CASE("false-negative injection: untouched fields, determinism, restore") {
  corpus::SyntheticSpec spec;
  spec.n_relations = 4;
  spec.n_train = 40;
  spec.n_val = 4;
  spec.n_test = 4;
  const auto data = corpus::generate_synthetic(spec, 13);

  const auto a = corpus::inject_false_negatives(data.train, 0.4, 5);
  const auto b = corpus::inject_false_negatives(data.train, 0.4, 5);
  CHECK(a.dataset == b.dataset);
  CHECK(a.flips == b.flips);

  const auto c = corpus::inject_false_negatives(data.train, 0.4, 6);
  CHECK_FALSE(a.flips == c.flips);

  // Only relation labels changed, and only for flipped ids.
  REQUIRE(a.dataset.instances.size() == data.train.instances.size());
  for (std::size_t i = 0; i < a.dataset.instances.size(); ++i) {
    const auto& before = data.train.instances[i];
    const auto& after = a.dataset.instances[i];
    CHECK(after.id == before.id);
    CHECK(after.tokens == before.tokens);
    CHECK(after.head == before.head);
    CHECK(after.tail == before.tail);
    if (a.flips.entries.count(after.id)) {
      CHECK(after.relation == 0);
    } else {
      CHECK(after.relation == before.relation);
    }
  }

  // Restoration reproduces the original dataset exactly.
  CHECK(corpus::restore_flips(a.dataset, a.flips) == data.train);
}

TEST_CASE("false-negative injection: refusals") {
  corpus::SyntheticSpec spec;
  spec.n_relations = 3;
  spec.n_train = 9;
  spec.n_val = 3;
  spec.n_test = 9;
  const auto data = corpus::generate_synthetic(spec, 3);
  CHECK_THROWS_AS(corpus::inject_false_negatives(data.test, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(corpus::inject_false_negatives(data.train, -0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(corpus::inject_false_negatives(data.train, 1.1, 1), std::invalid_argument);
}

TEST_CASE("restore_flips: error cases") {
  const auto inv = small_inventory();
  Dataset d;
  d.inventory = inv;
  d.split = Split::kTrain;
  d.instances.push_back(make_inst("a", {"x", "y", "z"}, {0, 0}, {2, 2}, 0));
  d.instances.push_back(make_inst("b", {"x", "y", "z"}, {0, 0}, {2, 2}, 1));

  corpus::FlipLog log;
  log.entries = {{"missing", 1}};
  CHECK_THROWS_AS(corpus::restore_flips(d, log), std::invalid_argument);

  log.entries = {{"b", 1}};  // instance b is not NA
  CHECK_THROWS_AS(corpus::restore_flips(d, log), std::invalid_argument);

  log.entries = {{"a", 0}};  // logged original is NA
  CHECK_THROWS_AS(corpus::restore_flips(d, log), std::invalid_argument);

  log.entries = {{"a", 2}};
  const auto restored = corpus::restore_flips(d, log);
  CHECK(restored.instances[0].relation == 2);
}
