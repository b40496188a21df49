#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"

namespace kgen {

enum class DatasetMode { event2mind, atomic, generic };

DatasetMode parse_dataset_mode(const std::string& name);
std::string dataset_mode_name(DatasetMode mode);

struct RelationId {
  std::string name;
  int index = -1;

  bool operator==(const RelationId& o) const {
    return index == o.index && name == o.name;
  }
};

// Fixed name<->index bijection for a dataset's commonsense dimensions.
// event2mind has 3, atomic has 9; generic discovers its set from the data
// (sorted lexicographically for a stable indexing).
class RelationSet {
 public:
  static RelationSet for_mode(DatasetMode mode);
  static RelationSet generic(std::vector<std::string> names);

  DatasetMode mode() const { return mode_; }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  RelationId at(int index) const;
  RelationId by_name(const std::string& name) const;  // throws DataError
  bool contains(const std::string& name) const;

 private:
  DatasetMode mode_ = DatasetMode::generic;
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

// Reserved vocabulary slots, in this exact id order.
enum ReservedToken : int {
  kPad = 0,
  kUnk = 1,
  kBos = 2,
  kEos = 3,
  kPersonX = 4,
  kPersonY = 5,
  kBlank = 6,
  kNumReserved = 7,
};

extern const char* const kReservedSurface[kNumReserved];

bool is_placeholder_token(const std::string& token);  // PersonX / PersonY
bool is_blank_token(const std::string& token);        // ___

// Lowercases, separates punctuation, keeps clitics ('s, 't, ...) attached to
// their apostrophe, maps PersonX/PersonY (any casing) to the placeholder
// surface forms and runs of underscores to the blank token. Idempotent on its
// own joined output.
std::vector<std::string> tokenize(const std::string& text);
std::string detokenize(const std::vector<std::string>& tokens);

struct EventExample {
  std::string event_raw;
  std::vector<std::string> event_tokens;
  RelationId relation;
  std::string target_raw;
  std::vector<std::string> target_tokens;
};

class Vocabulary {
 public:
  Vocabulary();

  int add(const std::string& token);  // id of token, inserting if new
  int id_or_unk(const std::string& token) const;
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return id_to_token_.size(); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// All reserved tokens plus every corpus token with frequency >= min_count,
// ordered by frequency desc then lexicographic.
Vocabulary build_vocab(const std::vector<EventExample>& examples,
                       std::size_t min_count);

// Contiguous n-grams for n = 1..max_n, joined with single spaces.
// Placeholders and the blank token never appear inside an n-gram; they act
// as segment boundaries.
std::set<std::string> extract_ngrams(const std::vector<std::string>& tokens,
                                     std::size_t max_n);

struct Dataset {
  DatasetMode mode = DatasetMode::generic;
  RelationSet relations;
  std::vector<EventExample> examples;

  std::size_t relation_count() const { return relations.size(); }
  std::size_t event_count() const;    // distinct raw event strings
  std::size_t triplet_count() const { return examples.size(); }
};

// Loads a dataset. generic expects the TSV interchange layout
// (event<TAB>relation<TAB>target); event2mind / atomic parse the public CSV
// distributions of those corpora. "none" targets are kept as the literal
// token. Malformed lines raise DataError naming the line number.
Dataset load_dataset(const std::string& path, DatasetMode mode);

// Gold references for evaluation: one JSON object per line with fields
// event (string), relation (string), gold (array of strings).
struct GoldRecord {
  std::string event;
  std::string relation;
  std::vector<std::string> gold;
};

std::vector<GoldRecord> load_gold_jsonl(const std::string& path);
void write_gold_jsonl(const std::string& path,
                      const std::vector<GoldRecord>& records);

// Groups a dataset's examples into per-(event, relation) gold sets using raw
// target strings.
std::vector<GoldRecord> gold_records_from_dataset(const Dataset& dataset);

struct DatasetStats {
  std::size_t relations = 0;
  std::size_t events = 0;
  std::size_t triplets = 0;
};

DatasetStats dataset_stats(const Dataset& dataset);

// Static word-embedding text file: one token per line followed by D floats,
// with an optional "V D" header line. Returns token -> vector.
std::unordered_map<std::string, std::vector<double>> load_embedding_file(
    const std::string& path);

}  // namespace kgen
