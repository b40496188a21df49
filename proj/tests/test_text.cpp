#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "support/synth.hpp"
#include "text.hpp"

using namespace kgen;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

}  // namespace

TEST_CASE("tokenize splits clitics and maps placeholders") {
  const auto tokens = tokenize("PersonX makes John's coffee");
  CHECK(tokens == std::vector<std::string>{"PersonX", "makes", "john", "'s", "coffee"});
}

TEST_CASE("tokenize empty input") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \t\n").empty());
}

TEST_CASE("tokenize maps blanks") {
  const auto tokens = tokenize("PersonX drinks ___ everyday");
  CHECK(tokens == std::vector<std::string>{"PersonX", "drinks", "___", "everyday"});
}

TEST_CASE("tokenize handles casing and punctuation") {
  CHECK(tokenize("PERSONX hugs PersonY!") ==
        std::vector<std::string>{"PersonX", "hugs", "PersonY", "!"});
  CHECK(tokenize("don't stop") == std::vector<std::string>{"don", "'t", "stop"});
  CHECK(tokenize("ice-cream") == std::vector<std::string>{"ice", "-", "cream"});
  CHECK(tokenize("PersonX's dog") ==
        std::vector<std::string>{"PersonX", "'s", "dog"});
}

TEST_CASE("tokenize is idempotent on joined output") {
  const std::vector<std::string> samples = {
      "PersonX makes John's coffee.",
      "PersonX drinks ___ everyday",
      "She said: \"don't go!\"",
      "a-b_c 'quoted' x's 4th time",
      "PERSONY  gets   thanked, twice",
  };
  for (const std::string& s : samples) {
    const auto once = tokenize(s);
    const auto twice = tokenize(detokenize(once));
    CHECK(once == twice);
  }
}

TEST_CASE("detokenize preserves non-placeholder alphanumeric content") {
  const std::string text = "PersonX buys 3 cakes for John";
  const std::string joined = detokenize(tokenize(text));
  for (const std::string& word : {"buys", "3", "cakes", "john"})
    CHECK(joined.find(word) != std::string::npos);
}

TEST_CASE("reserved vocabulary ids are fixed") {
  Vocabulary vocab;
  CHECK(vocab.size() == kNumReserved);
  CHECK(vocab.id_or_unk("<pad>") == kPad);
  CHECK(vocab.id_or_unk("<unk>") == kUnk);
  CHECK(vocab.id_or_unk("<bos>") == kBos);
  CHECK(vocab.id_or_unk("<eos>") == kEos);
  CHECK(vocab.id_or_unk("PersonX") == kPersonX);
  CHECK(vocab.id_or_unk("PersonY") == kPersonY);
  CHECK(vocab.id_or_unk("___") == kBlank);
  CHECK(vocab.id_or_unk("never-seen") == kUnk);
}

namespace {

EventExample example_from(const std::string& event, const std::string& target) {
  EventExample ex;
  ex.event_raw = event;
  ex.event_tokens = tokenize(event);
  ex.relation = {"xIntent", 0};
  ex.target_raw = target;
  ex.target_tokens = tokenize(target);
  return ex;
}

}  // namespace

TEST_CASE("build_vocab thresholds and orders") {
  std::vector<EventExample> corpus = {example_from("a a b", "")};
  {
    Vocabulary v = build_vocab(corpus, 2);
    CHECK(v.size() == kNumReserved + 1);
    CHECK(v.contains("a"));
    CHECK_FALSE(v.contains("b"));
  }
  {
    Vocabulary v = build_vocab(corpus, 1);
    CHECK(v.size() == kNumReserved + 2);
    CHECK(v.id_or_unk("a") == kNumReserved);      // higher frequency first
    CHECK(v.id_or_unk("b") == kNumReserved + 1);
  }
  {
    Vocabulary v = build_vocab({}, 1);
    CHECK(v.size() == kNumReserved);
  }
}

TEST_CASE("build_vocab breaks frequency ties lexicographically") {
  std::vector<EventExample> corpus = {example_from("pear apple pear apple", "")};
  Vocabulary v = build_vocab(corpus, 1);
  CHECK(v.id_or_unk("apple") == kNumReserved);
  CHECK(v.id_or_unk("pear") == kNumReserved + 1);
}

TEST_CASE("extract_ngrams excludes placeholders") {
  const auto grams = extract_ngrams({"PersonX", "makes", "coffee"}, 2);
  CHECK(grams == std::set<std::string>{"makes", "coffee", "makes coffee"});
}

TEST_CASE("extract_ngrams short input and enumeration") {
  CHECK(extract_ngrams({"a"}, 3) == std::set<std::string>{"a"});
  CHECK(extract_ngrams({"a", "b", "c"}, 2) ==
        std::set<std::string>{"a", "b", "c", "a b", "b c"});
}

TEST_CASE("placeholders break n-gram contiguity") {
  const auto grams = extract_ngrams({"makes", "PersonX", "coffee"}, 2);
  CHECK(grams.count("makes coffee") == 0);
  CHECK(grams.count("makes") == 1);
  CHECK(grams.count("coffee") == 1);
}

TEST_CASE("generic TSV load") {
  const fs::path dir = synth::fresh_temp_dir("tsv");
  write_file(dir / "d.tsv",
             "PersonX makes coffee\txIntent\tto be helpful\n"
             "PersonX makes coffee\txReact\tnone\n");
  const Dataset ds = load_dataset((dir / "d.tsv").string(), DatasetMode::generic);
  CHECK(ds.examples.size() == 2);
  CHECK(ds.relations.size() == 2);
  CHECK(ds.examples[1].target_tokens == std::vector<std::string>{"none"});
  const DatasetStats stats = dataset_stats(ds);
  CHECK(stats.relations == 2);
  CHECK(stats.events == 1);
  CHECK(stats.triplets == 2);
}

TEST_CASE("malformed TSV line is reported with its number") {
  const fs::path dir = synth::fresh_temp_dir("tsv_bad");
  write_file(dir / "d.tsv", "good\txIntent\tok\nbad line without tabs\n");
  try {
    load_dataset((dir / "d.tsv").string(), DatasetMode::generic);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("two loads of the same file are element-wise equal") {
  const fs::path dir = synth::fresh_temp_dir("tsv_det");
  write_file(dir / "d.tsv",
             "PersonX naps\txIntent\tto rest\nPersonX naps\toReact\tnone\n");
  const Dataset a = load_dataset((dir / "d.tsv").string(), DatasetMode::generic);
  const Dataset b = load_dataset((dir / "d.tsv").string(), DatasetMode::generic);
  REQUIRE(a.examples.size() == b.examples.size());
  for (std::size_t i = 0; i < a.examples.size(); ++i) {
    CHECK(a.examples[i].event_tokens == b.examples[i].event_tokens);
    CHECK(a.examples[i].relation.name == b.examples[i].relation.name);
    CHECK(a.examples[i].target_tokens == b.examples[i].target_tokens);
  }
}

TEST_CASE("event2mind CSV layout") {
  const fs::path dir = synth::fresh_temp_dir("e2m");
  write_file(dir / "e.csv",
             "Source,Event,Xintent,Xemotion,Otheremotion,Xsent,Osent\n"
             "rocstory,PersonX makes coffee,\"[\"\"to be helpful\"\"]\","
             "\"[\"\"happy\"\", \"\"useful\"\"]\",\"[\"\"none\"\"]\",3,2\n"
             "rocstory,\"PersonX naps, quietly\",[],\"[\"\"rested\"\"]\",[],1,\n");
  const Dataset ds = load_dataset((dir / "e.csv").string(), DatasetMode::event2mind);
  CHECK(ds.relations.size() == 3);
  // 1 intent + 2 react + 1 oreact + 1 react = 5 triplets over 2 events.
  CHECK(ds.examples.size() == 5);
  const DatasetStats stats = dataset_stats(ds);
  CHECK(stats.relations == 3);
  CHECK(stats.events == 2);
  CHECK(stats.triplets == 5);
  CHECK(ds.examples[0].relation.name == "xIntent");
  CHECK(ds.examples[1].relation.name == "xReact");
  CHECK(ds.examples[3].relation.name == "oReact");
  // The quoted event keeps its comma.
  bool found = false;
  for (const auto& ex : ds.examples)
    if (ex.event_raw == "PersonX naps, quietly") found = true;
  CHECK(found);
}

TEST_CASE("atomic CSV layout") {
  const fs::path dir = synth::fresh_temp_dir("atomic");
  write_file(dir / "a.csv",
             "event,oEffect,oReact,oWant,xAttr,xEffect,xIntent,xNeed,xReact,xWant,"
             "prefix,split\n"
             "PersonX repays PersonY,[],\"[\"\"grateful\"\"]\",[],"
             "\"[\"\"honest\"\"]\",[],\"[\"\"to be fair\"\"]\",\"[\"\"none\"\"]\","
             "\"[\"\"relieved\"\"]\",[],\"['repays']\",trn\n");
  const Dataset ds = load_dataset((dir / "a.csv").string(), DatasetMode::atomic);
  CHECK(ds.relations.size() == 9);
  CHECK(ds.examples.size() == 5);
  const DatasetStats stats = dataset_stats(ds);
  CHECK(stats.events == 1);
  CHECK(stats.triplets == 5);
}

TEST_CASE("unknown relation in TSV") {
  const fs::path dir = synth::fresh_temp_dir("tsv_rel");
  write_file(dir / "d.tsv", "e\txIntent\tt\n");
  const Dataset ds = load_dataset((dir / "d.tsv").string(), DatasetMode::generic);
  CHECK_THROWS_AS(ds.relations.by_name("xBogus"), DataError);
}

TEST_CASE("gold JSONL round trip") {
  const fs::path dir = synth::fresh_temp_dir("gold");
  const std::vector<GoldRecord> records = {
      {"PersonX makes coffee", "xIntent", {"to be helpful", "to wake up"}},
      {"PersonX naps", "xReact", {"rested"}},
  };
  write_gold_jsonl((dir / "g.jsonl").string(), records);
  const auto loaded = load_gold_jsonl((dir / "g.jsonl").string());
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].event == records[0].event);
  CHECK(loaded[0].gold == records[0].gold);
  CHECK(loaded[1].relation == "xReact");
}

TEST_CASE("gold records grouped from a dataset") {
  const fs::path dir = synth::fresh_temp_dir("goldgrp");
  write_file(dir / "d.tsv",
             "e one\txIntent\tt1\n"
             "e one\txIntent\tt2\n"
             "e one\txIntent\tt1\n"
             "e two\txIntent\tt3\n");
  const Dataset ds = load_dataset((dir / "d.tsv").string(), DatasetMode::generic);
  const auto gold = gold_records_from_dataset(ds);
  REQUIRE(gold.size() == 2);
  CHECK(gold[0].gold == std::vector<std::string>{"t1", "t2"});  // deduplicated
  CHECK(gold[1].gold == std::vector<std::string>{"t3"});
}

TEST_CASE("embedding file with and without header") {
  const fs::path dir = synth::fresh_temp_dir("emb");
  write_file(dir / "plain.txt", "coffee 0.5 -1.25 3\nteapot 1 2 3.5\n");
  {
    const auto table = load_embedding_file((dir / "plain.txt").string());
    REQUIRE(table.size() == 2);
    CHECK(table.at("coffee") == std::vector<double>{0.5, -1.25, 3});
  }
  write_file(dir / "header.txt", "2 3\ncoffee 0.5 -1.25 3\nteapot 1 2 3.5\n");
  {
    const auto table = load_embedding_file((dir / "header.txt").string());
    REQUIRE(table.size() == 2);
    CHECK(table.at("teapot") == std::vector<double>{1, 2, 3.5});
  }
  write_file(dir / "bad.txt", "coffee 1 2\nteapot 1\n");
  CHECK_THROWS_AS(load_embedding_file((dir / "bad.txt").string()), DataError);
}
