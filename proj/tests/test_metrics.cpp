#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "metrics.hpp"
#include "rng.hpp"

using namespace kgen;

TEST_CASE("normalize_text rules") {
  CHECK(normalize_text("To be helpful.") == "be helpful");
  CHECK(normalize_text("  NONE ") == "none");
  CHECK(normalize_text("gets  thanked") == "gets thanked");
  CHECK(normalize_text("to, to!") == "to");   // only the leading "to " drops
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("Well-rested") == "well rested");
}

namespace {

EvalRecord record(const std::string& relation, std::vector<std::string> gold,
                  std::vector<std::string> generated) {
  EvalRecord rec;
  rec.event = "e";
  rec.relation = relation;
  for (auto& g : gold) rec.gold.insert(normalize_text(g));
  for (auto& g : generated) rec.generated.push_back(normalize_text(g));
  return rec;
}

}  // namespace

TEST_CASE("recall counts gold coverage") {
  const auto r = record("xIntent", {"a", "b", "c"}, {"a", "c", "x"});
  const auto per = recall_at_k({r}, 10);
  CHECK(per.at("xIntent").value == doctest::Approx(100.0 * 2.0 / 3.0));
}

TEST_CASE("recall is one when gold is covered") {
  const auto r = record("xIntent", {"a", "b"}, {"b", "a", "z"});
  CHECK(recall_at_k({r}, 10).at("xIntent").value == doctest::Approx(100.0));
}

TEST_CASE("recall fixture of four records averages to 62.5") {
  const std::vector<EvalRecord> records = {
      record("xIntent", {"a"}, {"a"}),                 // 1
      record("xIntent", {"a", "b"}, {"a"}),            // 0.5
      record("xIntent", {"a"}, {"z"}),                 // 0
      record("xIntent", {"c", "d"}, {"c", "d", "e"}),  // 1
  };
  CHECK(recall_at_k(records, 10).at("xIntent").value == doctest::Approx(62.5));
}

TEST_CASE("recall skips empty gold sets with a counter") {
  const std::vector<EvalRecord> records = {
      record("xIntent", {}, {"a"}),
      record("xIntent", {"a"}, {"a"}),
  };
  const auto per = recall_at_k(records, 10);
  CHECK(per.at("xIntent").records == 1);
  CHECK(per.at("xIntent").skipped == 1);
  CHECK(per.at("xIntent").value == doctest::Approx(100.0));
}

TEST_CASE("recall is monotone in k") {
  Rng rng(3);
  const std::vector<std::string> pool = {"a", "b", "c", "d", "e",
                                         "f", "g", "h", "i", "j"};
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<EvalRecord> records;
    for (int r = 0; r < 6; ++r) {
      EvalRecord rec;
      rec.event = "e";
      rec.relation = "rel";
      for (int g = 0; g < 3; ++g) rec.gold.insert(pool[rng.below(pool.size())]);
      std::vector<std::string> cands = pool;
      rng.shuffle(cands);
      cands.resize(10);
      rec.generated = cands;
      records.push_back(std::move(rec));
    }
    CHECK(recall_at_k(records, 10).at("rel").value + 1e-12 >=
          recall_at_k(records, 5).at("rel").value);
  }
}

TEST_CASE("bleu2 perfect match scores one") {
  CHECK(bleu2_sentence("be helpful", {"be helpful"}) == doctest::Approx(1.0));
  CHECK(bleu2_sentence("none", {"none"}) == doctest::Approx(1.0));
}

TEST_CASE("bleu2 empty candidate scores zero") {
  CHECK(bleu2_sentence("", {"be helpful"}) == 0.0);
}

TEST_CASE("bleu2 hand-computed regression value") {
  // unigram p = 2/3, smoothed bigram p = (0+1)/(2+1), brevity penalty 1:
  // score = sqrt(2/3 * 1/3) = sqrt(2)/3.
  const double expect = std::sqrt(2.0) / 3.0;
  CHECK(bleu2_sentence("be very helpful", {"be helpful"}) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("bleu2 brevity penalty on short candidates") {
  // candidate length 1 vs reference length 3: BP = exp(1 - 3).
  // p1 = 1, p2 = (0+1)/(0+1) = 1.
  CHECK(bleu2_sentence("be", {"be very helpful"}) ==
        doctest::Approx(std::exp(1.0 - 3.0)).epsilon(1e-12));
}

TEST_CASE("bleu2 clips against the best reference") {
  // "a a" against {"a"}: unigram matches clip at 1 -> p1 = 1/2,
  // bigram p2 = (0+1)/(1+1); same length as the closest reference? c=2,
  // closest ref length 1 -> BP = 1 (candidate longer).
  const double expect = std::sqrt(0.5 * 0.5);
  CHECK(bleu2_sentence("a a", {"a"}) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("metrics stay in range and are permutation independent") {
  Rng rng(9);
  const std::vector<std::string> pool = {"go home", "eat food", "be kind",
                                         "sleep well", "none"};
  std::vector<EvalRecord> records;
  for (int r = 0; r < 12; ++r) {
    EvalRecord rec;
    rec.event = "e" + std::to_string(r);
    rec.relation = r % 2 == 0 ? "xIntent" : "xReact";
    rec.gold.insert(pool[rng.below(pool.size())]);
    std::vector<std::string> cands = pool;
    rng.shuffle(cands);
    rec.generated = cands;
    records.push_back(std::move(rec));
  }

  const EvalReport report = evaluate_records(records, 10);
  for (const auto& [_, mv] : report.recall) {
    CHECK(mv.value >= 0.0);
    CHECK(mv.value <= 100.0);
  }
  for (const auto& [_, mv] : report.bleu2) {
    CHECK(mv.value >= 0.0);
    CHECK(mv.value <= 100.0);
  }

  std::vector<EvalRecord> shuffled = records;
  rng.shuffle(shuffled);
  const EvalReport again = evaluate_records(shuffled, 10);
  for (const auto& [rel, mv] : report.recall)
    CHECK(again.recall.at(rel).value == doctest::Approx(mv.value).epsilon(1e-12));
  for (const auto& [rel, mv] : report.bleu2)
    CHECK(again.bleu2.at(rel).value == doctest::Approx(mv.value).epsilon(1e-12));
}

TEST_CASE("duplicating every record leaves both metrics unchanged") {
  const std::vector<EvalRecord> records = {
      record("xIntent", {"be kind"}, {"be kind", "go home"}),
      record("xIntent", {"eat food", "go home"}, {"go home"}),
      record("xReact", {"happy"}, {"sad"}),
  };
  std::vector<EvalRecord> doubled = records;
  doubled.insert(doubled.end(), records.begin(), records.end());

  const EvalReport a = evaluate_records(records, 10);
  const EvalReport b = evaluate_records(doubled, 10);
  for (const auto& [rel, mv] : a.recall)
    CHECK(b.recall.at(rel).value == doctest::Approx(mv.value).epsilon(1e-12));
  for (const auto& [rel, mv] : a.bleu2)
    CHECK(b.bleu2.at(rel).value == doctest::Approx(mv.value).epsilon(1e-12));
}

TEST_CASE("report json carries per-relation rows and averages") {
  const std::vector<EvalRecord> records = {
      record("xIntent", {"be kind"}, {"be kind"}),
      record("xReact", {"happy"}, {"sad"}),
  };
  const EvalReport report = evaluate_records(records, 10);
  const std::string json = eval_report_json(report);
  CHECK(json.find("xIntent") != std::string::npos);
  CHECK(json.find("xReact") != std::string::npos);
  CHECK(json.find("macro") != std::string::npos);
  CHECK(json.find("micro") != std::string::npos);
  CHECK(report.macro_recall() == doctest::Approx(50.0));
}
