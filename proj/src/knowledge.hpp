#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "text.hpp"

namespace kgen {

struct KnowledgeTriple {
  std::vector<std::string> subject;
  std::string relation;
  std::vector<std::string> object;
  double weight = 1.0;
};

struct Snippet {
  std::string event_key;
  std::string query;
  std::vector<std::string> text;
  int rank = 1;
};

enum class KnowledgeSource { conceptnet, web };

struct KnowledgeEntry {
  std::vector<std::string> key_tokens;
  std::vector<std::string> value_tokens;
  KnowledgeSource source = KnowledgeSource::conceptnet;
  double score = 0.0;
};

// relation -> ordered key phrases used to turn an event into search queries.
class KeyPhraseTable {
 public:
  static KeyPhraseTable load(const std::string& path);

  const std::vector<std::string>& phrases(const std::string& relation) const;
  bool contains(const std::string& relation) const;

 private:
  std::map<std::string, std::vector<std::string>> table_;
};

class StopWords {
 public:
  static StopWords load(const std::string& path);

  bool contains(const std::string& token) const { return words_.count(token) > 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

enum class PosClass { noun, verb, adj, adv, other };

// token -> coarse part-of-speech class, from the shipped lexicon file.
class PosLexicon {
 public:
  static PosLexicon load(const std::string& path);

  // Content filtering keeps nouns, adjectives, verbs, and any token the
  // lexicon does not know (rare entities must survive).
  bool keeps(const std::string& token) const;
  std::size_t size() const { return classes_.size(); }

 private:
  std::unordered_map<std::string, PosClass> classes_;
};

// Triple store with a unigram index over subjects and objects.
class TripleStore {
 public:
  static TripleStore load(const std::string& path);
  static TripleStore from_triples(std::vector<KnowledgeTriple> triples);

  std::size_t size() const { return triples_.size(); }
  const KnowledgeTriple& triple(std::size_t i) const { return triples_[i]; }

  // Candidate triple indices sharing at least one unigram with the tokens.
  std::vector<std::size_t> candidates(const std::vector<std::string>& tokens) const;

 private:
  std::vector<KnowledgeTriple> triples_;
  std::unordered_map<std::string, std::vector<std::size_t>> unigram_index_;
};

struct ScoredTriple {
  const KnowledgeTriple* triple;
  std::size_t match_len;  // tokens in the longest shared n-gram
};

// Every returned triple shares an n-gram (n <= max_n) with the event; ordered
// by match length desc, then triple weight desc, then store order.
std::vector<ScoredTriple> retrieve_triples(const EventExample& event,
                                           const TripleStore& store,
                                           std::size_t max_n);

// One query per key phrase: the event's content words (placeholders, blanks
// and stop words removed) joined by spaces, a space, then the phrase.
// Throws DataError when the relation has no phrases or no content is left.
std::vector<std::string> build_queries(const EventExample& event,
                                       const KeyPhraseTable& table,
                                       const StopWords& stop_words);

std::vector<std::string> filter_content_words(
    const std::vector<std::string>& tokens, const PosLexicon& lexicon);

// Top `limit` entries by score desc, then source (conceptnet before web),
// then key string; stable for full ties.
std::vector<KnowledgeEntry> select_memory_entries(
    std::vector<KnowledgeEntry> candidates, std::size_t limit);

// Snippet JSONL: one object per line with event, query, rank, text.
std::vector<Snippet> load_snippets(const std::string& path);

struct KnowledgeConfig {
  bool use_conceptnet = false;
  bool use_web = false;
  std::size_t max_ngram = 3;
  std::size_t memory_limit = 30;
  std::size_t snippets_per_event = 10;
  std::size_t value_token_cap = 20;  // web values truncated to this many tokens
};

// Precomputed per-event knowledge entries for a run. Retrieval is pure; the
// index is immutable after build.
class KnowledgeIndex {
 public:
  KnowledgeIndex() = default;

  // events: distinct raw event strings with their tokens.
  static KnowledgeIndex build(
      const std::vector<std::pair<std::string, std::vector<std::string>>>& events,
      const TripleStore* triples, const std::vector<Snippet>* snippets,
      const PosLexicon& lexicon, const KnowledgeConfig& config);

  const std::vector<KnowledgeEntry>& entries_for(const std::string& event_raw) const;
  // Uncapped per-source retrieval counts, for coverage reporting.
  const std::vector<KnowledgeEntry>& raw_entries_for(const std::string& event_raw) const;

 private:
  std::map<std::string, std::vector<KnowledgeEntry>> selected_;
  std::map<std::string, std::vector<KnowledgeEntry>> raw_;
  std::vector<KnowledgeEntry> empty_;
};

struct CoverageRecord {
  RelationId relation;
  std::vector<std::vector<std::string>> gold_targets;  // token sequences
  const std::vector<KnowledgeEntry>* entries;
};

struct RelationCoverage {
  std::size_t hits = 0;
  std::size_t total = 0;
  double hit_rate() const { return total == 0 ? 0.0 : 100.0 * hits / total; }
};

struct CoverageReport {
  std::map<std::string, RelationCoverage> per_relation;
  double mean_entries_per_event = 0.0;
};

// An example is a hit when any content token (stop words excluded) of any
// gold target appears among its entries' value tokens.
CoverageReport coverage(const std::vector<CoverageRecord>& records,
                        const StopWords& stop_words);

}  // namespace kgen
