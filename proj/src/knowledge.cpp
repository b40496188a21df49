#include "knowledge.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace kgen {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Data files

KeyPhraseTable KeyPhraseTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open key-phrase file: " + path);
  KeyPhraseTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t colon = t.find(':');
    if (colon == std::string::npos)
      throw DataError("line " + std::to_string(line_no) +
                      ": expected 'relation: phrase, phrase, ...'");
    const std::string relation = trim(t.substr(0, colon));
    std::vector<std::string> phrases;
    std::istringstream rest(t.substr(colon + 1));
    std::string phrase;
    while (std::getline(rest, phrase, ',')) {
      const std::string p = trim(phrase);
      if (!p.empty()) phrases.push_back(p);
    }
    if (relation.empty() || phrases.empty())
      throw DataError("line " + std::to_string(line_no) + ": empty relation or phrases");
    table.table_[relation] = std::move(phrases);
  }
  return table;
}

const std::vector<std::string>& KeyPhraseTable::phrases(
    const std::string& relation) const {
  auto it = table_.find(relation);
  if (it == table_.end())
    throw DataError("no key phrases for relation: " + relation);
  return it->second;
}

bool KeyPhraseTable::contains(const std::string& relation) const {
  return table_.count(relation) > 0;
}

StopWords StopWords::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open stop-word file: " + path);
  StopWords sw;
  std::string word;
  while (in >> word) sw.words_.insert(word);
  return sw;
}

PosLexicon PosLexicon::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open POS lexicon: " + path);
  PosLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("line " + std::to_string(line_no) + ": expected token<TAB>pos");
    const std::string token = trim(line.substr(0, tab));
    const std::string pos = trim(line.substr(tab + 1));
    PosClass cls;
    if (pos == "noun") cls = PosClass::noun;
    else if (pos == "verb") cls = PosClass::verb;
    else if (pos == "adj") cls = PosClass::adj;
    else if (pos == "adv") cls = PosClass::adv;
    else cls = PosClass::other;
    lex.classes_[token] = cls;
  }
  return lex;
}

bool PosLexicon::keeps(const std::string& token) const {
  auto it = classes_.find(token);
  if (it == classes_.end()) return true;  // unknown tokens are retained
  return it->second == PosClass::noun || it->second == PosClass::verb ||
         it->second == PosClass::adj;
}

// ---------------------------------------------------------------------------
// Triple store

TripleStore TripleStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open triple store: " + path);
  std::vector<KnowledgeTriple> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 4)
      throw DataError("line " + std::to_string(line_no) +
                      ": expected subject<TAB>relation<TAB>object<TAB>weight");
    KnowledgeTriple triple;
    triple.subject = tokenize(fields[0]);
    triple.relation = trim(fields[1]);
    triple.object = tokenize(fields[2]);
    try {
      triple.weight = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw DataError("line " + std::to_string(line_no) + ": bad weight: " + fields[3]);
    }
    if (triple.subject.empty() || triple.object.empty())
      throw DataError("line " + std::to_string(line_no) + ": empty subject or object");
    if (triple.weight < 0)
      throw DataError("line " + std::to_string(line_no) + ": negative weight");
    triples.push_back(std::move(triple));
  }
  return from_triples(std::move(triples));
}

TripleStore TripleStore::from_triples(std::vector<KnowledgeTriple> triples) {
  TripleStore store;
  store.triples_ = std::move(triples);
  for (std::size_t i = 0; i < store.triples_.size(); ++i) {
    std::set<std::string> seen;
    for (const std::string& t : store.triples_[i].subject) seen.insert(t);
    for (const std::string& t : store.triples_[i].object) seen.insert(t);
    for (const std::string& t : seen) store.unigram_index_[t].push_back(i);
  }
  return store;
}

std::vector<std::size_t> TripleStore::candidates(
    const std::vector<std::string>& tokens) const {
  std::set<std::size_t> hits;
  for (const std::string& t : tokens) {
    if (is_placeholder_token(t) || is_blank_token(t)) continue;
    auto it = unigram_index_.find(t);
    if (it == unigram_index_.end()) continue;
    hits.insert(it->second.begin(), it->second.end());
  }
  return {hits.begin(), hits.end()};
}

std::vector<ScoredTriple> retrieve_triples(const EventExample& event,
                                           const TripleStore& store,
                                           std::size_t max_n) {
  if (max_n < 1) throw ConfigError("retrieve_triples: max_n must be >= 1");
  const std::set<std::string> grams = extract_ngrams(event.event_tokens, max_n);

  struct Ranked { std::size_t index; std::size_t match_len; };
  std::vector<Ranked> ranked;
  for (std::size_t ti : store.candidates(event.event_tokens)) {
    const KnowledgeTriple& triple = store.triple(ti);
    std::size_t best = 0;
    for (const auto* side : {&triple.subject, &triple.object}) {
      const std::set<std::string> side_grams = extract_ngrams(*side, max_n);
      for (const std::string& g : side_grams) {
        if (grams.count(g)) {
          const std::size_t len =
              1 + static_cast<std::size_t>(std::count(g.begin(), g.end(), ' '));
          best = std::max(best, len);
        }
      }
    }
    if (best > 0) ranked.push_back({ti, best});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [&store](const Ranked& a, const Ranked& b) {
    if (a.match_len != b.match_len) return a.match_len > b.match_len;
    return store.triple(a.index).weight > store.triple(b.index).weight;
  });
  std::vector<ScoredTriple> out;
  out.reserve(ranked.size());
  for (const Ranked& r : ranked) out.push_back({&store.triple(r.index), r.match_len});
  return out;
}

std::vector<std::string> build_queries(const EventExample& event,
                                       const KeyPhraseTable& table,
                                       const StopWords& stop_words) {
  if (!table.contains(event.relation.name))
    throw DataError("no key phrases for relation: " + event.relation.name);
  std::vector<std::string> content;
  for (const std::string& t : event.event_tokens) {
    if (is_placeholder_token(t) || is_blank_token(t)) continue;
    if (stop_words.contains(t)) continue;
    content.push_back(t);
  }
  if (content.empty())
    throw DataError("event has no content words: " + event.event_raw);
  const std::string base = join(content);
  std::vector<std::string> queries;
  for (const std::string& phrase : table.phrases(event.relation.name))
    queries.push_back(base + " " + phrase);
  return queries;
}

std::vector<std::string> filter_content_words(
    const std::vector<std::string>& tokens, const PosLexicon& lexicon) {
  std::vector<std::string> out;
  for (const std::string& t : tokens)
    if (lexicon.keeps(t)) out.push_back(t);
  return out;
}

std::vector<KnowledgeEntry> select_memory_entries(
    std::vector<KnowledgeEntry> candidates, std::size_t limit) {
  if (limit < 1) throw ConfigError("select_memory_entries: limit must be >= 1");
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const KnowledgeEntry& a, const KnowledgeEntry& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.source != b.source)
                       return a.source == KnowledgeSource::conceptnet;
                     return join(a.key_tokens) < join(b.key_tokens);
                   });
  if (candidates.size() > limit) candidates.resize(limit);
  return candidates;
}

std::vector<Snippet> load_snippets(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open snippet file: " + path);
  std::vector<Snippet> out;
  std::set<std::tuple<std::string, std::string, int>> seen_ranks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": bad JSON: " + e.what());
    }
    if (!obj.contains("event") || !obj.contains("query") || !obj.contains("rank") ||
        !obj.contains("text"))
      throw DataError("line " + std::to_string(line_no) +
                      ": snippet needs event/query/rank/text fields");
    Snippet s;
    s.event_key = obj["event"].get<std::string>();
    s.query = obj["query"].get<std::string>();
    s.rank = obj["rank"].get<int>();
    s.text = tokenize(obj["text"].get<std::string>());
    if (s.rank < 1)
      throw DataError("line " + std::to_string(line_no) + ": rank must be >= 1");
    const auto key = std::make_tuple(s.event_key, s.query, s.rank);
    if (!seen_ranks.insert(key).second)
      throw DataError("line " + std::to_string(line_no) +
                      ": duplicate rank for (event, query)");
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-event index

KnowledgeIndex KnowledgeIndex::build(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& events,
    const TripleStore* triples, const std::vector<Snippet>* snippets,
    const PosLexicon& lexicon, const KnowledgeConfig& config) {
  KnowledgeIndex index;

  // Snippets grouped per event, rank ascending.
  std::map<std::string, std::vector<const Snippet*>> by_event;
  if (config.use_web && snippets) {
    for (const Snippet& s : *snippets) by_event[s.event_key].push_back(&s);
    for (auto& [_, list] : by_event)
      std::stable_sort(list.begin(), list.end(),
                       [](const Snippet* a, const Snippet* b) { return a->rank < b->rank; });
  }

  for (const auto& [event_raw, event_tokens] : events) {
    if (index.raw_.count(event_raw)) continue;
    std::vector<KnowledgeEntry> candidates;

    if (config.use_conceptnet && triples) {
      EventExample probe;
      probe.event_raw = event_raw;
      probe.event_tokens = event_tokens;
      for (const ScoredTriple& st : retrieve_triples(probe, *triples, config.max_ngram)) {
        KnowledgeEntry entry;
        entry.key_tokens = st.triple->subject;
        for (const std::string& t : tokenize(st.triple->relation))
          entry.key_tokens.push_back(t);
        entry.value_tokens = st.triple->object;
        entry.source = KnowledgeSource::conceptnet;
        entry.score = static_cast<double>(st.match_len);
        candidates.push_back(std::move(entry));
      }
    }

    if (config.use_web) {
      auto it = by_event.find(event_raw);
      if (it != by_event.end()) {
        std::size_t used = 0;
        for (const Snippet* s : it->second) {
          if (used >= config.snippets_per_event) break;
          ++used;
          KnowledgeEntry entry;
          entry.key_tokens = tokenize(s->query);
          entry.value_tokens = filter_content_words(s->text, lexicon);
          if (entry.value_tokens.size() > config.value_token_cap)
            entry.value_tokens.resize(config.value_token_cap);
          if (entry.key_tokens.empty() || entry.value_tokens.empty()) continue;
          entry.source = KnowledgeSource::web;
          entry.score = 1.0 / static_cast<double>(s->rank);
          candidates.push_back(std::move(entry));
        }
      }
    }

    // Drop exact duplicates, keeping the first (highest-ranked) copy.
    std::vector<KnowledgeEntry> unique;
    std::set<std::string> seen;
    for (KnowledgeEntry& e : candidates) {
      std::string sig = join(e.key_tokens) + "\x01" + join(e.value_tokens) + "\x01" +
                        (e.source == KnowledgeSource::conceptnet ? "c" : "w");
      if (seen.insert(std::move(sig)).second) unique.push_back(std::move(e));
    }

    index.selected_[event_raw] = select_memory_entries(unique, config.memory_limit);
    index.raw_[event_raw] = std::move(unique);
  }
  return index;
}

const std::vector<KnowledgeEntry>& KnowledgeIndex::entries_for(
    const std::string& event_raw) const {
  auto it = selected_.find(event_raw);
  return it == selected_.end() ? empty_ : it->second;
}

const std::vector<KnowledgeEntry>& KnowledgeIndex::raw_entries_for(
    const std::string& event_raw) const {
  auto it = raw_.find(event_raw);
  return it == raw_.end() ? empty_ : it->second;
}

// ---------------------------------------------------------------------------
// Coverage

CoverageReport coverage(const std::vector<CoverageRecord>& records,
                        const StopWords& stop_words) {
  CoverageReport report;
  std::size_t entry_total = 0;
  for (const CoverageRecord& rec : records) {
    RelationCoverage& rc = report.per_relation[rec.relation.name];
    rc.total += 1;
    entry_total += rec.entries ? rec.entries->size() : 0;

    std::set<std::string> available;
    if (rec.entries) {
      for (const KnowledgeEntry& e : *rec.entries)
        for (const std::string& t : e.value_tokens) available.insert(t);
    }
    bool hit = false;
    for (const auto& gold : rec.gold_targets) {
      for (const std::string& t : gold) {
        if (is_placeholder_token(t) || is_blank_token(t)) continue;
        if (stop_words.contains(t)) continue;
        if (available.count(t)) { hit = true; break; }
      }
      if (hit) break;
    }
    if (hit) rc.hits += 1;
  }
  if (!records.empty())
    report.mean_entries_per_event =
        static_cast<double>(entry_total) / static_cast<double>(records.size());
  return report;
}

}  // namespace kgen
