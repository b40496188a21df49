#include "config.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace kgen {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config " + key + ": bad number '" + value + "'");
  }
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size() || v < 0) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config " + key + ": bad integer '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("config " + key + ": bad boolean '" + value + "'");
}

}  // namespace

double RunConfig::resolved_lr() const {
  if (lr.has_value()) return *lr;
  return parsed_mode() == DatasetMode::atomic ? 2e-4 : 1e-4;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "dataset_mode") { parse_dataset_mode(value); dataset_mode = value; return; }
  if (key == "train") { train_path = value; return; }
  if (key == "dev") { dev_path = value; return; }
  if (key == "test") { test_path = value; return; }
  if (key == "gold") { gold_path = value; return; }
  if (key == "triples") { triples_path = value; return; }
  if (key == "snippets") { snippets_path = value; return; }
  if (key == "embeddings") { embeddings_path = value; return; }
  if (key == "data_dir") { data_dir = value; return; }
  if (key == "out_dir") { out_dir = value; return; }
  if (key == "checkpoint") { checkpoint_path = value; return; }
  if (key == "mode") {
    if (value != "single" && value != "multi" && value != "maml")
      throw ConfigError("config mode: expected single|multi|maml, got '" + value + "'");
    mode = value;
    return;
  }
  if (key == "knowledge") {
    if (value != "none" && value != "conceptnet" && value != "web" && value != "both")
      throw ConfigError("config knowledge: expected none|conceptnet|web|both, got '" +
                        value + "'");
    knowledge = value;
    return;
  }
  if (key == "lr") { lr = parse_double(key, value); return; }
  if (key == "epochs") { epochs = parse_size(key, value); return; }
  if (key == "batch_size") { batch_size = parse_size(key, value); return; }
  if (key == "alpha") { alpha = parse_double(key, value); return; }
  if (key == "beta") { beta = parse_double(key, value); return; }
  if (key == "second_order") { second_order = parse_bool(key, value); return; }
  if (key == "outer_sgd") { outer_sgd = parse_bool(key, value); return; }
  if (key == "seed") { seed = parse_size(key, value); return; }
  if (key == "relation") { relation = value; return; }
  if (key == "word_dim") { word_dim = parse_size(key, value); return; }
  if (key == "relation_dim") { relation_dim = parse_size(key, value); return; }
  if (key == "hidden") { hidden = parse_size(key, value); return; }
  if (key == "dropout") { dropout = parse_double(key, value); return; }
  if (key == "feed_prev_state") { feed_prev_state = parse_bool(key, value); return; }
  if (key == "min_count") { min_count = parse_size(key, value); return; }
  if (key == "max_ngram") { max_ngram = parse_size(key, value); return; }
  if (key == "memory_limit") { memory_limit = parse_size(key, value); return; }
  if (key == "snippets_per_event") { snippets_per_event = parse_size(key, value); return; }
  if (key == "beam_width") { beam_width = parse_size(key, value); return; }
  if (key == "k") { k = parse_size(key, value); return; }
  if (key == "max_len") { max_len = parse_size(key, value); return; }
  throw ConfigError("unknown config key: " + key);
}

std::string RunConfig::resolved_text() const {
  std::ostringstream os;
  os << "alpha=" << alpha << "\n";
  os << "batch_size=" << batch_size << "\n";
  os << "beam_width=" << beam_width << "\n";
  os << "beta=" << beta << "\n";
  os << "checkpoint=" << checkpoint_path << "\n";
  os << "data_dir=" << data_dir << "\n";
  os << "dataset_mode=" << dataset_mode << "\n";
  os << "dev=" << dev_path << "\n";
  os << "dropout=" << dropout << "\n";
  os << "embeddings=" << embeddings_path << "\n";
  os << "epochs=" << epochs << "\n";
  os << "feed_prev_state=" << (feed_prev_state ? "true" : "false") << "\n";
  os << "gold=" << gold_path << "\n";
  os << "hidden=" << hidden << "\n";
  os << "k=" << k << "\n";
  os << "knowledge=" << knowledge << "\n";
  os << "lr=" << resolved_lr() << "\n";
  os << "max_len=" << max_len << "\n";
  os << "max_ngram=" << max_ngram << "\n";
  os << "memory_limit=" << memory_limit << "\n";
  os << "min_count=" << min_count << "\n";
  os << "mode=" << mode << "\n";
  os << "out_dir=" << out_dir << "\n";
  os << "outer_sgd=" << (outer_sgd ? "true" : "false") << "\n";
  os << "relation=" << relation << "\n";
  os << "relation_dim=" << relation_dim << "\n";
  os << "second_order=" << (second_order ? "true" : "false") << "\n";
  os << "seed=" << seed << "\n";
  os << "snippets=" << snippets_path << "\n";
  os << "snippets_per_event=" << snippets_per_event << "\n";
  os << "test=" << test_path << "\n";
  os << "train=" << train_path << "\n";
  os << "triples=" << triples_path << "\n";
  os << "word_dim=" << word_dim << "\n";
  return os.str();
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    base.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return base;
}

void write_resolved_config(const std::string& out_dir, const RunConfig& config) {
  std::filesystem::create_directories(out_dir);
  std::ofstream out(std::filesystem::path(out_dir) / "config.resolved.txt");
  if (!out) throw DataError("cannot write resolved config under " + out_dir);
  out << config.resolved_text();
}

}  // namespace kgen
