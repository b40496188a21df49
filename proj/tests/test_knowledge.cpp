#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "commands.hpp"
#include "support/synth.hpp"

using namespace kgen;
namespace fs = std::filesystem;

namespace {

const SharedData& shared() {
  static SharedData data =
      SharedData::load((synth::source_dir() / "data").string());
  return data;
}

KnowledgeTriple triple(const std::string& s, const std::string& rel,
                       const std::string& o, double w = 1.0) {
  return {tokenize(s), rel, tokenize(o), w};
}

EventExample event_of(const std::string& text, const std::string& relation,
                      int index = 0) {
  EventExample ex;
  ex.event_raw = text;
  ex.event_tokens = tokenize(text);
  ex.relation = {relation, index};
  return ex;
}

KnowledgeEntry entry(const std::string& key, const std::string& value,
                     KnowledgeSource source, double score) {
  return {tokenize(key), tokenize(value), source, score};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// Independent re-check: does the triple share an n-gram with the event?
bool shares_ngram_brute(const EventExample& ev, const KnowledgeTriple& t,
                        std::size_t max_n) {
  const auto ev_grams = extract_ngrams(ev.event_tokens, max_n);
  for (const auto* side : {&t.subject, &t.object}) {
    const auto side_grams = extract_ngrams(*side, max_n);
    for (const auto& g : side_grams)
      if (ev_grams.count(g)) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("retrieve_triples unigram containment") {
  TripleStore store = TripleStore::from_triples({
      triple("coffee", "AtLocation", "kitchen"),
  });
  const auto hits = retrieve_triples(event_of("PersonX makes coffee", "xIntent"),
                                     store, 3);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].match_len == 1);
}

TEST_CASE("retrieve_triples no overlap") {
  TripleStore store = TripleStore::from_triples({triple("tea", "isA", "drink")});
  CHECK(retrieve_triples(event_of("PersonX makes coffee", "xIntent"), store, 3)
            .empty());
}

TEST_CASE("bigram match outranks unigram match") {
  TripleStore store = TripleStore::from_triples({
      triple("gift", "RelatedTo", "box"),
      triple("gift", "UsedFor", "celebrating a birthday gift"),
  });
  const EventExample ev = event_of("PersonX buys a birthday gift", "xIntent");
  const auto hits = retrieve_triples(ev, store, 3);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].triple->relation == "UsedFor");
  CHECK(hits[0].match_len >= 2);
  CHECK(hits[1].match_len == 1);

  // Brute-force cross-check over the 2-triple store: scores must equal the
  // longest shared n-gram found by enumeration.
  for (const auto& hit : hits) {
    std::size_t best = 0;
    const auto ev_grams = extract_ngrams(ev.event_tokens, 3);
    for (const auto* side : {&hit.triple->subject, &hit.triple->object}) {
      for (const auto& g : extract_ngrams(*side, 3)) {
        if (ev_grams.count(g))
          best = std::max(best,
                          1 + static_cast<std::size_t>(
                                  std::count(g.begin(), g.end(), ' ')));
      }
    }
    CHECK(hit.match_len == best);
  }
}

TEST_CASE("retrieve_triples scores are non-increasing and genuine") {
  TripleStore store = TripleStore::from_triples({
      triple("coffee", "AtLocation", "kitchen", 0.5),
      triple("makes coffee", "HasSubevent", "boiling water", 2.0),
      triple("coffee cup", "UsedFor", "drinking coffee", 1.0),
      triple("water", "RelatedTo", "rain", 3.0),
  });
  const EventExample ev = event_of("PersonX makes coffee", "xIntent");
  const auto hits = retrieve_triples(ev, store, 3);
  for (std::size_t i = 1; i < hits.size(); ++i)
    CHECK(hits[i - 1].match_len >= hits[i].match_len);
  for (const auto& hit : hits) CHECK(shares_ngram_brute(ev, *hit.triple, 3));
}

TEST_CASE("ties between equal matches break by weight") {
  TripleStore store = TripleStore::from_triples({
      triple("coffee", "RelatedTo", "morning", 0.5),
      triple("coffee", "AtLocation", "kitchen", 2.5),
  });
  const auto hits = retrieve_triples(event_of("PersonX makes coffee", "xIntent"),
                                     store, 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].triple->weight == 2.5);
}

TEST_CASE("build_queries follows the key-phrase table") {
  const auto queries = build_queries(event_of("PersonX makes coffee", "xIntent"),
                                     shared().key_phrases, shared().stop_words);
  CHECK(queries == std::vector<std::string>{
                       "makes coffee motivated by", "makes coffee has subevent",
                       "makes coffee intentions", "makes coffee why"});
}

TEST_CASE("build_queries xAttr phrases") {
  const auto queries = build_queries(event_of("PersonX sings", "xAttr"),
                                     shared().key_phrases, shared().stop_words);
  REQUIRE(queries.size() == 3);
  CHECK(queries[0] == "sings has property");
  CHECK(queries[1] == "sings attribute");
  CHECK(queries[2] == "sings who");
}

TEST_CASE("build_queries drops stop words and placeholders") {
  const auto queries =
      build_queries(event_of("PersonX makes the coffee for PersonY", "xIntent"),
                    shared().key_phrases, shared().stop_words);
  for (const auto& q : queries) {
    CHECK(q.find("PersonX") == std::string::npos);
    CHECK(q.find("the ") != 0);
    CHECK(q.find(" the ") == std::string::npos);
    CHECK(q.find(" for ") == std::string::npos);
  }
  CHECK(queries.size() ==
        shared().key_phrases.phrases("xIntent").size());
}

TEST_CASE("build_queries degenerate event") {
  CHECK_THROWS_AS(build_queries(event_of("PersonX", "xIntent"),
                                shared().key_phrases, shared().stop_words),
                  DataError);
}

TEST_CASE("build_queries unknown relation") {
  CHECK_THROWS_AS(build_queries(event_of("PersonX sings", "zzz"),
                                shared().key_phrases, shared().stop_words),
                  DataError);
}

TEST_CASE("content-word filter") {
  const fs::path dir = synth::fresh_temp_dir("lex");
  write_file(dir / "lex.tsv",
             "the\tdet\nhot\tadj\ncoffee\tnoun\nis\tverb\nready\tadj\n");
  const PosLexicon lex = PosLexicon::load((dir / "lex.tsv").string());
  CHECK(filter_content_words({"the", "hot", "coffee", "is", "ready"}, lex) ==
        std::vector<std::string>{"hot", "coffee", "is", "ready"});
  CHECK(filter_content_words({}, lex).empty());
  CHECK(filter_content_words({"zorblax", "the"}, lex) ==
        std::vector<std::string>{"zorblax"});
}

TEST_CASE("select_memory_entries keeps the top scores") {
  std::vector<KnowledgeEntry> candidates;
  for (int i = 0; i < 40; ++i)
    candidates.push_back(entry("key " + std::to_string(i), "value",
                               KnowledgeSource::web, static_cast<double>(i)));
  const auto selected = select_memory_entries(candidates, 30);
  REQUIRE(selected.size() == 30);

  // The selected score multiset must equal the exhaustive-sort top 30.
  std::vector<double> all;
  for (const auto& c : candidates) all.push_back(c.score);
  std::sort(all.rbegin(), all.rend());
  all.resize(30);
  std::vector<double> got;
  for (const auto& e : selected) got.push_back(e.score);
  std::sort(got.rbegin(), got.rend());
  CHECK(got == all);
}

TEST_CASE("select_memory_entries under the limit") {
  std::vector<KnowledgeEntry> candidates;
  for (int i = 0; i < 5; ++i)
    candidates.push_back(entry("k" + std::to_string(i), "v", KnowledgeSource::web,
                               static_cast<double>(i)));
  const auto selected = select_memory_entries(candidates, 30);
  REQUIRE(selected.size() == 5);
  CHECK(selected.front().score == 4.0);
  CHECK(selected.back().score == 0.0);
}

TEST_CASE("select_memory_entries tie rules") {
  const auto a = entry("zebra", "v", KnowledgeSource::web, 1.0);
  const auto b = entry("apple", "v", KnowledgeSource::conceptnet, 1.0);
  const auto c = entry("mango", "v", KnowledgeSource::conceptnet, 1.0);
  const auto selected = select_memory_entries({a, b, c}, 3);
  CHECK(selected[0].source == KnowledgeSource::conceptnet);
  CHECK(selected[0].key_tokens == std::vector<std::string>{"apple"});
  CHECK(selected[1].key_tokens == std::vector<std::string>{"mango"});
  CHECK(selected[2].source == KnowledgeSource::web);
}

TEST_CASE("coverage hits and misses") {
  const auto gold_hit = tokenize("to be helpful");
  const auto gold_miss = tokenize("to be sleepy");
  std::vector<KnowledgeEntry> entries = {
      entry("key", "helpful kind", KnowledgeSource::web, 1.0)};

  RelationId rel{"xIntent", 0};
  std::vector<CoverageRecord> records = {
      {rel, {gold_hit}, &entries},
      {rel, {gold_miss}, &entries},
  };
  const CoverageReport report = coverage(records, shared().stop_words);
  CHECK(report.per_relation.at("xIntent").hits == 1);
  CHECK(report.per_relation.at("xIntent").total == 2);
  CHECK(report.per_relation.at("xIntent").hit_rate() == doctest::Approx(50.0));
  CHECK(report.mean_entries_per_event == doctest::Approx(1.0));
}

TEST_CASE("coverage 4-example fixture matches hand count") {
  std::vector<KnowledgeEntry> with = {
      entry("key", "praise reward", KnowledgeSource::conceptnet, 1.0)};
  std::vector<KnowledgeEntry> without = {
      entry("key", "unrelated words", KnowledgeSource::conceptnet, 1.0)};
  RelationId rel{"xIntent", 0};
  std::vector<CoverageRecord> records = {
      {rel, {tokenize("to get praise")}, &with},
      {rel, {tokenize("to get a reward")}, &with},
      {rel, {tokenize("to nap")}, &without},
      {rel, {tokenize("to eat")}, &without},
  };
  const CoverageReport report = coverage(records, shared().stop_words);
  CHECK(report.per_relation.at("xIntent").hit_rate() == doctest::Approx(50.0));
}

TEST_CASE("coverage is monotone under entry addition") {
  Rng rng(11);
  RelationId rel{"xIntent", 0};
  const std::vector<std::string> words = {"apple", "banana", "mango", "pear",
                                          "plum",  "grape",  "melon", "fig"};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<KnowledgeEntry>> base(10), extended;
    std::vector<std::vector<std::vector<std::string>>> golds(10);
    for (int i = 0; i < 10; ++i) {
      golds[i] = {{words[rng.below(words.size())], words[rng.below(words.size())]}};
      if (rng.below(2))
        base[i].push_back(entry("k", words[rng.below(words.size())],
                                KnowledgeSource::web, 1.0));
    }
    extended = base;
    for (int i = 0; i < 10; ++i)
      extended[i].push_back(entry("k2", words[rng.below(words.size())],
                                  KnowledgeSource::web, 0.5));

    std::vector<CoverageRecord> before, after;
    for (int i = 0; i < 10; ++i) {
      before.push_back({rel, golds[i], &base[i]});
      after.push_back({rel, golds[i], &extended[i]});
    }
    const double rate_before =
        coverage(before, shared().stop_words).per_relation.at("xIntent").hit_rate();
    const double rate_after =
        coverage(after, shared().stop_words).per_relation.at("xIntent").hit_rate();
    CHECK(rate_after >= rate_before);
  }
}

TEST_CASE("snippet loader validates ranks") {
  const fs::path dir = synth::fresh_temp_dir("snip");
  write_file(dir / "s.jsonl",
             R"({"event":"e","query":"q","rank":1,"text":"alpha beta"})" "\n"
             R"({"event":"e","query":"q","rank":2,"text":"gamma"})" "\n");
  const auto snippets = load_snippets((dir / "s.jsonl").string());
  REQUIRE(snippets.size() == 2);
  CHECK(snippets[0].text == std::vector<std::string>{"alpha", "beta"});

  write_file(dir / "dup.jsonl",
             R"({"event":"e","query":"q","rank":1,"text":"a"})" "\n"
             R"({"event":"e","query":"q","rank":1,"text":"b"})" "\n");
  CHECK_THROWS_AS(load_snippets((dir / "dup.jsonl").string()), DataError);
}

TEST_CASE("knowledge index caps memory entries and orders web by rank") {
  const fs::path dir = synth::fresh_temp_dir("kidx");
  std::string snippets;
  for (int r = 1; r <= 8; ++r)
    snippets += R"({"event":"PersonX visits the museum","query":"museum visit why",)"
                R"("rank":)" + std::to_string(r) +
                R"(,"text":"exhibit )" + std::to_string(r) + R"("})" "\n";
  write_file(dir / "s.jsonl", snippets);
  write_file(dir / "t.tsv", "museum\tAtLocation\tcity\t1.0\n");

  const TripleStore store = TripleStore::load((dir / "t.tsv").string());
  const auto snips = load_snippets((dir / "s.jsonl").string());

  KnowledgeConfig kc;
  kc.use_conceptnet = true;
  kc.use_web = true;
  kc.snippets_per_event = 4;
  kc.memory_limit = 3;
  const KnowledgeIndex index = KnowledgeIndex::build(
      {{"PersonX visits the museum", tokenize("PersonX visits the museum")}},
      &store, &snips, shared().lexicon, kc);

  const auto& selected = index.entries_for("PersonX visits the museum");
  REQUIRE(selected.size() == 3);
  // Triple match (score 1) outranks web (1/rank), then ranks 1 and 2.
  CHECK(selected[0].source == KnowledgeSource::conceptnet);
  CHECK(selected[1].score == doctest::Approx(1.0));  // rank 1 web entry
  CHECK(selected[1].source == KnowledgeSource::web);
  CHECK(selected[2].score == doctest::Approx(0.5));

  // Uncapped view respects the snippet cut (4 of 8) plus the triple.
  CHECK(index.raw_entries_for("PersonX visits the museum").size() == 5);
  CHECK(index.entries_for("unseen event").empty());
}
