#include "text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace kgen {

namespace {

using nlohmann::json;

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;  // keep multi-byte UTF-8 intact
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

const char* kClitics[] = {"s", "t", "m", "d", "ll", "re", "ve"};

bool is_clitic(const std::string& run) {
  const std::string low = lower(run);
  for (const char* c : kClitics)
    if (low == c) return true;
  return false;
}

void emit_word(std::vector<std::string>& out, const std::string& run) {
  const std::string low = lower(run);
  if (low == "personx") out.push_back(kReservedSurface[kPersonX]);
  else if (low == "persony") out.push_back(kReservedSurface[kPersonY]);
  else out.push_back(low);
}

}  // namespace

const char* const kReservedSurface[kNumReserved] = {
    "<pad>", "<unk>", "<bos>", "<eos>", "PersonX", "PersonY", "___"};

bool is_placeholder_token(const std::string& token) {
  return token == kReservedSurface[kPersonX] || token == kReservedSurface[kPersonY];
}

bool is_blank_token(const std::string& token) {
  return token == kReservedSurface[kBlank];
}

DatasetMode parse_dataset_mode(const std::string& name) {
  if (name == "event2mind") return DatasetMode::event2mind;
  if (name == "atomic") return DatasetMode::atomic;
  if (name == "generic") return DatasetMode::generic;
  throw ConfigError("unknown dataset mode: " + name);
}

std::string dataset_mode_name(DatasetMode mode) {
  switch (mode) {
    case DatasetMode::event2mind: return "event2mind";
    case DatasetMode::atomic: return "atomic";
    case DatasetMode::generic: return "generic";
  }
  return "generic";
}

RelationSet RelationSet::for_mode(DatasetMode mode) {
  RelationSet set;
  set.mode_ = mode;
  switch (mode) {
    case DatasetMode::event2mind:
      set.names_ = {"xIntent", "xReact", "oReact"};
      break;
    case DatasetMode::atomic:
      set.names_ = {"xIntent", "xNeed", "xAttr", "xEffect", "xWant",
                    "xReact",  "oEffect", "oWant", "oReact"};
      break;
    case DatasetMode::generic:
      break;
  }
  for (std::size_t i = 0; i < set.names_.size(); ++i)
    set.index_[set.names_[i]] = static_cast<int>(i);
  return set;
}

RelationSet RelationSet::generic(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  RelationSet set;
  set.mode_ = DatasetMode::generic;
  set.names_ = std::move(names);
  for (std::size_t i = 0; i < set.names_.size(); ++i)
    set.index_[set.names_[i]] = static_cast<int>(i);
  return set;
}

RelationId RelationSet::at(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= names_.size())
    throw DataError("relation index " + std::to_string(index) + " out of range");
  return {names_[index], index};
}

RelationId RelationSet::by_name(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("unknown relation name: " + name);
  return {name, it->second};
}

bool RelationSet::contains(const std::string& name) const {
  return index_.count(name) > 0;
}

// ---------------------------------------------------------------------------
// Tokenization

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      std::size_t j = i;
      while (j < n && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
      emit_word(out, text.substr(i, j - i));
      i = j;
      continue;
    }
    if (c == '_') {
      std::size_t j = i;
      while (j < n && text[j] == '_') ++j;
      if (j - i >= 2) out.push_back(kReservedSurface[kBlank]);
      else out.push_back("_");
      i = j;
      continue;
    }
    if (c == '\'') {
      // Clitic suffixes stay attached to the apostrophe: john's -> john 's.
      std::size_t j = i + 1;
      while (j < n && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
      const std::string run = text.substr(i + 1, j - i - 1);
      if (!run.empty() && is_clitic(run)) {
        out.push_back("'" + lower(run));
        i = j;
        continue;
      }
      out.push_back("'");
      ++i;
      continue;
    }
    out.push_back(std::string(1, text[i]));
    ++i;
  }
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (int i = 0; i < kNumReserved; ++i) add(kReservedSurface[i]);
}

int Vocabulary::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  const int id = static_cast<int>(id_to_token_.size());
  token_to_id_[token] = id;
  id_to_token_.push_back(token);
  return id;
}

int Vocabulary::id_or_unk(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) > 0;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw DataError("vocab id " + std::to_string(id) + " out of range");
  return id_to_token_[id];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(id_or_unk(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(token(id));
  return out;
}

Vocabulary build_vocab(const std::vector<EventExample>& examples,
                       std::size_t min_count) {
  if (min_count < 1) throw ConfigError("build_vocab: min_count must be >= 1");
  std::unordered_map<std::string, std::size_t> counts;
  auto tally = [&counts](const std::vector<std::string>& tokens) {
    for (const std::string& t : tokens) {
      bool reserved = false;
      for (int i = 0; i < kNumReserved; ++i)
        if (t == kReservedSurface[i]) { reserved = true; break; }
      if (!reserved) ++counts[t];
    }
  };
  for (const EventExample& ex : examples) {
    tally(ex.event_tokens);
    tally(ex.target_tokens);
  }
  std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  for (const auto& [token, count] : ordered)
    if (count >= min_count) vocab.add(token);
  return vocab;
}

std::set<std::string> extract_ngrams(const std::vector<std::string>& tokens,
                                     std::size_t max_n) {
  if (max_n < 1) throw ConfigError("extract_ngrams: max_n must be >= 1");
  std::set<std::string> out;
  // Segments between placeholders / blanks.
  std::vector<std::vector<std::string>> segments(1);
  for (const std::string& t : tokens) {
    if (is_placeholder_token(t) || is_blank_token(t)) {
      if (!segments.back().empty()) segments.emplace_back();
    } else {
      segments.back().push_back(t);
    }
  }
  for (const auto& seg : segments) {
    for (std::size_t n = 1; n <= max_n; ++n) {
      if (seg.size() < n) break;
      for (std::size_t i = 0; i + n <= seg.size(); ++i) {
        std::string gram = seg[i];
        for (std::size_t j = 1; j < n; ++j) gram += " " + seg[i + j];
        out.insert(std::move(gram));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset loading

namespace {

// RFC-4180-ish CSV: quoted fields may contain commas, quotes ("" escape) and
// newlines. Returns one record per call; false at EOF.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields,
                     std::size_t& line_no) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int ch;
  while ((ch = in.get()) != EOF) {
    any = true;
    const char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') { field += '"'; in.get(); }
        else in_quotes = false;
      } else {
        if (c == '\n') ++line_no;
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c == '\n') {
      ++line_no;
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(field);
      return true;
    } else {
      field += c;
    }
  }
  if (!any) return false;
  if (!field.empty() && field.back() == '\r') field.pop_back();
  fields.push_back(field);
  return true;
}

// A cell holding either a JSON-style list of strings or a bare string.
std::vector<std::string> parse_target_cell(const std::string& cell,
                                           std::size_t line_no) {
  const std::string t = trim(cell);
  if (t.empty() || t == "[]") return {};
  std::vector<std::string> out;
  if (t.front() == '[') {
    json parsed;
    try {
      parsed = json::parse(t);
    } catch (const json::exception&) {
      // Some distributions use Python-style single quotes.
      std::string fixed = t;
      std::replace(fixed.begin(), fixed.end(), '\'', '"');
      try {
        parsed = json::parse(fixed);
      } catch (const json::exception& e) {
        throw DataError("line " + std::to_string(line_no) +
                        ": unparseable target list: " + t);
      }
    }
    if (!parsed.is_array())
      throw DataError("line " + std::to_string(line_no) +
                      ": target cell is not a list: " + t);
    for (const auto& item : parsed) {
      const std::string s = trim(item.is_string() ? item.get<std::string>()
                                                  : item.dump());
      if (!s.empty()) out.push_back(s);
    }
    return out;
  }
  out.push_back(t);
  return out;
}

EventExample make_example(const std::string& event, const RelationId& relation,
                          const std::string& target, std::size_t line_no) {
  EventExample ex;
  ex.event_raw = event;
  ex.event_tokens = tokenize(event);
  if (ex.event_tokens.empty())
    throw DataError("line " + std::to_string(line_no) + ": empty event phrase");
  ex.relation = relation;
  ex.target_raw = target;
  ex.target_tokens = tokenize(target);
  return ex;
}

Dataset load_generic_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file: " + path);
  std::vector<std::string> names;
  struct Row { std::string event, relation, target; std::size_t line; };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? std::string::npos
                                                   : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw DataError("line " + std::to_string(line_no) +
                      ": expected event<TAB>relation<TAB>target");
    Row row;
    row.event = line.substr(0, t1);
    row.relation = line.substr(t1 + 1, t2 - t1 - 1);
    row.target = line.substr(t2 + 1);
    row.line = line_no;
    if (row.event.empty())
      throw DataError("line " + std::to_string(line_no) + ": empty event field");
    if (row.relation.empty())
      throw DataError("line " + std::to_string(line_no) + ": empty relation field");
    names.push_back(row.relation);
    rows.push_back(std::move(row));
  }
  Dataset ds;
  ds.mode = DatasetMode::generic;
  ds.relations = RelationSet::generic(std::move(names));
  for (const Row& row : rows) {
    ds.examples.push_back(make_example(row.event, ds.relations.by_name(row.relation),
                                       row.target, row.line));
  }
  return ds;
}

std::size_t column_of(const std::vector<std::string>& header,
                      const std::string& name, const std::string& path) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (lower(trim(header[i])) == lower(name)) return i;
  }
  throw DataError(path + ": missing column '" + name + "'");
}

Dataset load_public_csv(const std::string& path, DatasetMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file: " + path);

  // Column -> relation mapping for each public layout.
  std::vector<std::pair<std::string, std::string>> column_relations;
  std::string event_column;
  if (mode == DatasetMode::event2mind) {
    event_column = "Event";
    column_relations = {{"Xintent", "xIntent"},
                        {"Xemotion", "xReact"},
                        {"Otheremotion", "oReact"}};
  } else {
    event_column = "event";
    column_relations = {{"oEffect", "oEffect"}, {"oReact", "oReact"},
                        {"oWant", "oWant"},     {"xAttr", "xAttr"},
                        {"xEffect", "xEffect"}, {"xIntent", "xIntent"},
                        {"xNeed", "xNeed"},     {"xReact", "xReact"},
                        {"xWant", "xWant"}};
  }

  std::size_t line_no = 1;
  std::vector<std::string> header;
  if (!read_csv_record(in, header, line_no))
    throw DataError(path + ": empty file");
  const std::size_t event_ix = column_of(header, event_column, path);
  std::vector<std::pair<std::size_t, std::string>> rel_columns;
  for (const auto& [col, rel] : column_relations)
    rel_columns.emplace_back(column_of(header, col, path), rel);

  Dataset ds;
  ds.mode = mode;
  ds.relations = RelationSet::for_mode(mode);

  std::vector<std::string> fields;
  while (read_csv_record(in, fields, line_no)) {
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    if (fields.size() <= event_ix)
      throw DataError("line " + std::to_string(line_no) + ": too few columns");
    const std::string event = trim(fields[event_ix]);
    if (event.empty())
      throw DataError("line " + std::to_string(line_no) + ": empty event");
    for (const auto& [ix, rel] : rel_columns) {
      if (fields.size() <= ix)
        throw DataError("line " + std::to_string(line_no) + ": too few columns");
      for (const std::string& target : parse_target_cell(fields[ix], line_no)) {
        ds.examples.push_back(
            make_example(event, ds.relations.by_name(rel), target, line_no));
      }
    }
  }
  return ds;
}

}  // namespace

Dataset load_dataset(const std::string& path, DatasetMode mode) {
  if (mode == DatasetMode::generic) return load_generic_tsv(path);
  return load_public_csv(path, mode);
}

std::size_t Dataset::event_count() const {
  std::set<std::string> events;
  for (const EventExample& ex : examples) events.insert(ex.event_raw);
  return events.size();
}

DatasetStats dataset_stats(const Dataset& dataset) {
  DatasetStats stats;
  stats.relations = dataset.relation_count();
  stats.events = dataset.event_count();
  stats.triplets = dataset.triplet_count();
  return stats;
}

std::vector<GoldRecord> load_gold_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open gold file: " + path);
  std::vector<GoldRecord> out;
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
    if (!obj.contains("event") || !obj.contains("relation") || !obj.contains("gold"))
      throw DataError("line " + std::to_string(line_no) +
                      ": gold record needs event/relation/gold fields");
    GoldRecord rec;
    rec.event = obj["event"].get<std::string>();
    rec.relation = obj["relation"].get<std::string>();
    for (const auto& g : obj["gold"]) rec.gold.push_back(g.get<std::string>());
    out.push_back(std::move(rec));
  }
  return out;
}

void write_gold_jsonl(const std::string& path,
                      const std::vector<GoldRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write gold file: " + path);
  for (const GoldRecord& rec : records) {
    json obj;
    obj["event"] = rec.event;
    obj["relation"] = rec.relation;
    obj["gold"] = rec.gold;
    out << obj.dump() << "\n";
  }
}

std::vector<GoldRecord> gold_records_from_dataset(const Dataset& dataset) {
  // Keyed by (event, relation) in first-appearance order.
  std::vector<GoldRecord> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const EventExample& ex : dataset.examples) {
    const auto key = std::make_pair(ex.event_raw, ex.relation.name);
    auto it = index.find(key);
    if (it == index.end()) {
      index[key] = out.size();
      out.push_back({ex.event_raw, ex.relation.name, {ex.target_raw}});
    } else {
      auto& gold = out[it->second].gold;
      if (std::find(gold.begin(), gold.end(), ex.target_raw) == gold.end())
        gold.push_back(ex.target_raw);
    }
  }
  return out;
}

std::unordered_map<std::string, std::vector<double>> load_embedding_file(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file: " + path);
  std::unordered_map<std::string, std::vector<double>> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<double> vec;
    double v;
    while (ls >> v) vec.push_back(v);
    if (first) {
      first = false;
      // Optional "V D" header: token parses as an integer and one value follows.
      char* end = nullptr;
      const long first_num = std::strtol(token.c_str(), &end, 10);
      if (end && *end == '\0' && vec.size() == 1 && first_num > 0) {
        dim = static_cast<std::size_t>(vec[0]);
        continue;
      }
    }
    if (vec.empty())
      throw DataError("line " + std::to_string(line_no) + ": no embedding values");
    if (dim == 0) dim = vec.size();
    if (vec.size() != dim)
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(dim) + " values, got " +
                      std::to_string(vec.size()));
    out[token] = std::move(vec);
  }
  return out;
}

}  // namespace kgen
