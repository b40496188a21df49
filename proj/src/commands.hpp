#pragma once

#include <string>
#include <vector>

#include "config.hpp"
#include "knowledge.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "trainer.hpp"

namespace kgen {

// Shipped data files resolved against config.data_dir.
struct SharedData {
  StopWords stop_words;
  PosLexicon lexicon;
  KeyPhraseTable key_phrases;

  static SharedData load(const std::string& data_dir);
};

KnowledgeConfig knowledge_config(const RunConfig& config);

// Per-event entries for every distinct event of the given datasets.
KnowledgeIndex build_knowledge_index(const RunConfig& config,
                                     const SharedData& shared,
                                     const std::vector<const Dataset*>& datasets);

// Trains per config.mode, writes <out>/checkpoint.bin, <out>/train_log.jsonl
// and <out>/config.resolved.txt. Returns the checkpoint path.
std::string cmd_train(const RunConfig& config);

// Beam-searches every (event, relation) of the test set against a checkpoint
// and writes <out>/eval_report.json. Gold sets come from the test file itself
// or from config.gold_path when given.
EvalReport cmd_evaluate(const RunConfig& config);

struct GenerateResult {
  std::string event;
  std::string relation;
  std::vector<std::pair<double, std::string>> candidates;  // score, text
};

// Top-k candidates for one event/relation pair (or every pair of a TSV file
// given via config.test_path).
std::vector<GenerateResult> cmd_generate(const RunConfig& config,
                                         const std::string& event,
                                         const std::string& relation);

struct SourceCoverage {
  std::string source;  // conceptnet | web | both
  CoverageReport report;
};

// Hit rates per relation and per knowledge source over a dataset, using
// uncapped retrieval. Writes <out>/coverage.json.
std::vector<SourceCoverage> cmd_coverage(const RunConfig& config);

// Relation/event/triplet counts for a dataset file. Writes <out>/stats.json.
DatasetStats cmd_stats(const RunConfig& config, const std::string& path,
                       const std::string& mode_name);

struct AblationRow {
  std::size_t snippet_count = 0;
  double macro_recall = 0.0;
};

// Trains and evaluates once per snippet count with a shared seed; writes
// <out>/ablation.tsv.
std::vector<AblationRow> cmd_ablate(const RunConfig& config,
                                    const std::vector<std::size_t>& counts);

// The beam-search half of evaluation, reusable against an in-memory
// checkpoint; records are returned in test-set order.
std::vector<EvalRecord> generate_eval_records(Checkpoint& ckpt,
                                              const RunConfig& config,
                                              const SharedData& shared,
                                              const Dataset& test,
                                              const KnowledgeIndex& knowledge);

}  // namespace kgen
