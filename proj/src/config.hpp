#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "text.hpp"

namespace kgen {

// Fully resolved run configuration. Precedence: command-line flags > config
// file > defaults. Defaults follow the reference training setup: dropout 0.2,
// hidden size 100, memory cap 30, learning rate 1e-4 (event2mind; 2e-4 for
// atomic), inner step 0.001, meta weight 0.01, batch size 64.
struct RunConfig {
  // Data
  std::string dataset_mode = "event2mind";
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::string gold_path;
  std::string triples_path;
  std::string snippets_path;
  std::string embeddings_path;
  std::string data_dir = "data";   // stop words, POS lexicon, key phrases
  std::string out_dir = "out";
  std::string checkpoint_path;

  // Training
  std::string mode = "single";     // single | multi | maml
  std::string knowledge = "none";  // none | conceptnet | web | both
  std::optional<double> lr;        // resolved per dataset mode when unset
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double alpha = 0.001;
  double beta = 0.01;
  bool second_order = false;
  bool outer_sgd = false;
  std::uint64_t seed = 1;
  std::string relation;            // restrict single-task training

  // Model
  std::size_t word_dim = 100;
  std::size_t relation_dim = 100;
  std::size_t hidden = 100;
  double dropout = 0.2;
  bool feed_prev_state = false;
  std::size_t min_count = 1;

  // Knowledge
  std::size_t max_ngram = 3;
  std::size_t memory_limit = 30;
  std::size_t snippets_per_event = 10;

  // Decoding / evaluation
  std::size_t beam_width = 10;
  std::size_t k = 10;
  std::size_t max_len = 20;

  DatasetMode parsed_mode() const { return parse_dataset_mode(dataset_mode); }
  double resolved_lr() const;

  // Apply one key=value assignment; throws ConfigError on unknown keys or
  // unparseable values.
  void set(const std::string& key, const std::string& value);

  // Every field as key=value lines, alphabetical, for reproducibility dumps.
  std::string resolved_text() const;
};

RunConfig load_config_file(const std::string& path, RunConfig base = {});

void write_resolved_config(const std::string& out_dir, const RunConfig& config);

}  // namespace kgen
