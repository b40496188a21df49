#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "errors.hpp"

namespace kgen {

// Lowercase, punctuation stripped, a single leading "to " removed, whitespace
// collapsed. All metric matching happens on normalized strings.
std::string normalize_text(const std::string& s);

struct EvalRecord {
  std::string event;
  std::string relation;
  std::set<std::string> gold;            // normalized
  std::vector<std::string> generated;    // normalized, deduplicated, <= k
};

struct MetricValue {
  double value = 0.0;       // percentage, 0..100
  std::size_t records = 0;  // records that contributed
  std::size_t skipped = 0;  // records skipped (empty gold set)
};

// Per record: |gold intersect top-k generated| / |gold|; mean over records,
// times 100, reported per relation. Records with empty gold sets are skipped
// and counted.
std::map<std::string, MetricValue> recall_at_k(const std::vector<EvalRecord>& records,
                                               std::size_t k = 10);

// Smoothed sentence-level BLEU-2 of one candidate against a reference set:
// unigram precision clipped against the references, add-one smoothing on the
// bigram counts, brevity penalty against the closest reference length.
double bleu2_sentence(const std::string& candidate,
                      const std::vector<std::string>& references);

// Per record: mean BLEU-2 of its top-k candidates against the full gold set;
// mean over records, times 100, per relation.
std::map<std::string, MetricValue> bleu2_at_k(const std::vector<EvalRecord>& records,
                                              std::size_t k = 10);

struct EvalReport {
  std::size_t k = 10;
  std::map<std::string, MetricValue> recall;
  std::map<std::string, MetricValue> bleu2;

  double macro_recall() const;
  double macro_bleu2() const;
  double micro_recall() const;
  double micro_bleu2() const;
};

EvalReport evaluate_records(const std::vector<EvalRecord>& records, std::size_t k = 10);

std::string eval_report_json(const EvalReport& report);
void write_eval_report(const std::string& path, const EvalReport& report);

}  // namespace kgen
