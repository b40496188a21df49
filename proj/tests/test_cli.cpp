#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "support/synth.hpp"

using namespace kgen;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// A tiny corpus: quick to train, enough structure for smoke checks.
synth::CorpusSpec tiny_spec(std::uint64_t seed) {
  synth::CorpusSpec spec;
  spec.normal_templates = 8;
  spec.knowledge_templates = 2;
  spec.instances_per_template = 4;
  spec.classes = 8;
  spec.test_normal_events = 8;
  spec.test_knowledge_events = 2;
  spec.seed = seed;
  return spec;
}

RunConfig tiny_config(const synth::CorpusFiles& files, const fs::path& out,
                      std::uint64_t seed) {
  RunConfig config = synth::corpus_run_config(files, out);
  config.word_dim = 10;
  config.relation_dim = 4;
  config.hidden = 8;
  config.epochs = 2;
  config.min_count = 1;
  config.seed = seed;
  return config;
}

}  // namespace

TEST_CASE("run config defaults follow the reference setup") {
  RunConfig config;
  CHECK(config.dropout == 0.2);
  CHECK(config.hidden == 100);
  CHECK(config.memory_limit == 30);
  CHECK(config.alpha == 0.001);
  CHECK(config.beta == 0.01);
  CHECK(config.batch_size == 64);
  CHECK(config.beam_width == 10);
  CHECK(config.k == 10);
  config.dataset_mode = "event2mind";
  CHECK(config.resolved_lr() == 0.0001);
  config.dataset_mode = "atomic";
  CHECK(config.resolved_lr() == 0.0002);
  config.lr = 0.05;
  CHECK(config.resolved_lr() == 0.05);
}

TEST_CASE("config file parsing and validation") {
  const fs::path dir = synth::fresh_temp_dir("cfg");
  write_file(dir / "run.cfg",
             "# comment\nmode=maml\nbeta=0.25\nepochs=3\nknowledge=both\n");
  const RunConfig config = load_config_file((dir / "run.cfg").string());
  CHECK(config.mode == "maml");
  CHECK(config.beta == 0.25);
  CHECK(config.epochs == 3);
  CHECK(config.knowledge == "both");

  RunConfig bad;
  CHECK_THROWS_AS(bad.set("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(bad.set("epochs", "many"), ConfigError);
  CHECK_THROWS_AS(bad.set("mode", "triple"), ConfigError);
}

TEST_CASE("train writes checkpoint, log and resolved config") {
  const fs::path dir = synth::fresh_temp_dir("train");
  const auto files = synth::write_corpus(dir / "corpus", tiny_spec(3));
  RunConfig config = tiny_config(files, dir / "out", 3);
  config.mode = "single";
  config.knowledge = "none";
  config.epochs = 4;

  const std::string ckpt_path = cmd_train(config);
  CHECK(fs::exists(ckpt_path));
  CHECK(fs::exists(dir / "out" / "train_log.jsonl"));
  CHECK(fs::exists(dir / "out" / "config.resolved.txt"));

  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  CHECK(ckpt.mode == "single");
  CHECK(ckpt.params.size() == 3);  // one parameter set per relation

  // Dev loss decreases across epochs for each relation.
  const std::string log = slurp(dir / "out" / "train_log.jsonl");
  CHECK(log.find("\"mode\":\"single\"") != std::string::npos);
}

TEST_CASE("multi-task training yields one shared checkpoint for all relations") {
  const fs::path dir = synth::fresh_temp_dir("multi");
  const auto files = synth::write_corpus(dir / "corpus", tiny_spec(4));
  RunConfig config = tiny_config(files, dir / "out", 4);
  config.mode = "multi";
  config.knowledge = "none";

  Checkpoint ckpt = load_checkpoint(cmd_train(config));
  REQUIRE(ckpt.params.size() == 1);
  CHECK(ckpt.params[0].first == "shared");
  for (const std::string& rel : ckpt.relations.names())
    CHECK(&ckpt.params_for(rel) == &ckpt.params[0].second);
}

TEST_CASE("maml training on a single-relation dataset is rejected") {
  const fs::path dir = synth::fresh_temp_dir("maml1");
  write_file(dir / "one.tsv", "e a\txIntent\tt\ne b\txIntent\tt\n");
  RunConfig config;
  config.dataset_mode = "generic";
  config.train_path = (dir / "one.tsv").string();
  config.out_dir = (dir / "out").string();
  config.data_dir = (synth::source_dir() / "data").string();
  config.mode = "maml";
  config.epochs = 1;
  CHECK_THROWS_AS(cmd_train(config), DataError);
}

TEST_CASE("knowledge=both populates capped memory entries from both sources") {
  const fs::path dir = synth::fresh_temp_dir("both");
  const auto files = synth::write_corpus(dir / "corpus", tiny_spec(5));
  RunConfig config = tiny_config(files, dir / "out", 5);
  config.knowledge = "both";
  config.memory_limit = 4;
  config.snippets_per_event = 3;

  const SharedData shared = SharedData::load(config.data_dir);
  const Dataset train = load_dataset(config.train_path, DatasetMode::generic);
  const KnowledgeIndex index = build_knowledge_index(config, shared, {&train});

  bool any_conceptnet = false, any_web = false, any_entries = false;
  for (const EventExample& ex : train.examples) {
    const auto& entries = index.entries_for(ex.event_raw);
    CHECK(entries.size() <= 4);
    if (!entries.empty()) any_entries = true;
    for (const auto& e : entries) {
      if (e.source == KnowledgeSource::conceptnet) any_conceptnet = true;
      if (e.source == KnowledgeSource::web) any_web = true;
      CHECK(e.value_tokens.size() <= 20);
    }
  }
  CHECK(any_entries);
  CHECK(any_conceptnet);
  CHECK(any_web);
}

TEST_CASE("evaluate produces one report row per relation") {
  const fs::path dir = synth::fresh_temp_dir("eval");
  const auto files = synth::write_corpus(dir / "corpus", tiny_spec(6));
  RunConfig config = tiny_config(files, dir / "out", 6);
  config.mode = "multi";
  config.knowledge = "none";
  config.checkpoint_path = cmd_train(config);
  config.out_dir = (dir / "out_eval").string();

  const EvalReport report = cmd_evaluate(config);
  const Dataset test = load_dataset(config.test_path, DatasetMode::generic);
  CHECK(report.recall.size() == test.relations.size());
  for (const std::string& rel : test.relations.names())
    CHECK(report.recall.count(rel) == 1);
  CHECK(fs::exists(dir / "out_eval" / "eval_report.json"));
}

TEST_CASE("evaluate rejects an empty test set") {
  const fs::path dir = synth::fresh_temp_dir("evalempty");
  const auto files = synth::write_corpus(dir / "corpus", tiny_spec(7));
  RunConfig config = tiny_config(files, dir / "out", 7);
  config.mode = "multi";
  config.knowledge = "none";
  config.checkpoint_path = cmd_train(config);
  write_file(dir / "empty.tsv", "");
  config.test_path = (dir / "empty.tsv").string();
  CHECK_THROWS_AS(cmd_evaluate(config), DataError);
}

TEST_CASE("evaluate rejects relations unknown to the checkpoint") {
  const fs::path dir = synth::fresh_temp_dir("evalrel");
  const auto files = synth::write_corpus(dir / "corpus", tiny_spec(8));
  RunConfig config = tiny_config(files, dir / "out", 8);
  config.mode = "multi";
  config.knowledge = "none";
  config.checkpoint_path = cmd_train(config);
  write_file(dir / "alien.tsv", "e a\tzOther\tt\n");
  config.test_path = (dir / "alien.tsv").string();
  CHECK_THROWS_AS(cmd_evaluate(config), DataError);
}

TEST_CASE("generate returns scored candidates") {
  const fs::path dir = synth::fresh_temp_dir("gen");
  const auto files = synth::write_corpus(dir / "corpus", tiny_spec(9));
  RunConfig config = tiny_config(files, dir / "out", 9);
  config.mode = "multi";
  config.knowledge = "none";
  config.checkpoint_path = cmd_train(config);

  const auto results =
      cmd_generate(config, "PersonX buys the red coffee v0", "xIntent");
  REQUIRE(results.size() == 1);
  CHECK(!results[0].candidates.empty());
  CHECK(results[0].candidates.size() <= config.k);
  for (std::size_t i = 1; i < results[0].candidates.size(); ++i)
    CHECK(results[0].candidates[i - 1].first >= results[0].candidates[i].first);
}

TEST_CASE("stats reports relation, event and triplet counts") {
  const fs::path dir = synth::fresh_temp_dir("stats");
  write_file(dir / "d.tsv",
             "e one\txIntent\tt1\n"
             "e one\txReact\tt2\n"
             "e two\txIntent\tt3\n");
  RunConfig config;
  config.out_dir = (dir / "out").string();
  const DatasetStats stats = cmd_stats(config, (dir / "d.tsv").string(), "generic");
  CHECK(stats.relations == 2);
  CHECK(stats.events == 2);
  CHECK(stats.triplets == 3);
  CHECK(fs::exists(dir / "out" / "stats.json"));
}

TEST_CASE("coverage matches a brute-force recount") {
  const fs::path dir = synth::fresh_temp_dir("cov");
  const auto files = synth::write_corpus(dir / "corpus", tiny_spec(10));
  RunConfig config = tiny_config(files, dir / "out", 10);
  config.knowledge = "both";

  const auto reports = cmd_coverage(config);
  REQUIRE(reports.size() == 3);  // conceptnet, web, both

  // Brute force for the "both" source.
  const SharedData shared = SharedData::load(config.data_dir);
  const Dataset data = load_dataset(config.train_path, DatasetMode::generic);
  const KnowledgeIndex index = build_knowledge_index(config, shared, {&data});

  std::map<std::string, std::pair<std::size_t, std::size_t>> expect;
  std::map<std::pair<std::string, std::string>, std::vector<const EventExample*>>
      grouped;
  for (const EventExample& ex : data.examples)
    grouped[{ex.event_raw, ex.relation.name}].push_back(&ex);
  for (const auto& [key, exs] : grouped) {
    auto& [hits, total] = expect[key.second];
    ++total;
    std::set<std::string> available;
    for (const auto& e : index.raw_entries_for(key.first))
      for (const auto& t : e.value_tokens) available.insert(t);
    bool hit = false;
    for (const EventExample* ex : exs)
      for (const auto& tok : ex->target_tokens)
        if (!shared.stop_words.contains(tok) && !is_placeholder_token(tok) &&
            !is_blank_token(tok) && available.count(tok))
          hit = true;
    if (hit) ++hits;
  }

  const CoverageReport& both = reports[2].report;
  for (const auto& [rel, counts] : expect) {
    CHECK(both.per_relation.at(rel).hits == counts.first);
    CHECK(both.per_relation.at(rel).total == counts.second);
  }
}

TEST_CASE("ablate row arity and count-zero equivalence with conceptnet-only") {
  const fs::path dir = synth::fresh_temp_dir("ablate");
  const auto files = synth::write_corpus(dir / "corpus", tiny_spec(11));
  RunConfig config = tiny_config(files, dir / "out_ablate", 11);
  config.mode = "single";
  config.relation = "xIntent";
  config.knowledge = "both";
  config.epochs = 2;

  const auto rows = cmd_ablate(config, {0, 2});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].snippet_count == 0);
  CHECK(rows[1].snippet_count == 2);
  CHECK(fs::exists(dir / "out_ablate" / "ablation.tsv"));

  // snippets_per_event = 0 must reproduce a conceptnet-only run bit for bit.
  RunConfig conceptnet_only = config;
  conceptnet_only.knowledge = "conceptnet";
  conceptnet_only.out_dir = (dir / "out_cn").string();
  conceptnet_only.checkpoint_path = (dir / "out_cn" / "checkpoint.bin").string();
  cmd_train(conceptnet_only);

  const std::string a = slurp(dir / "out_ablate" / "snippets_0" / "checkpoint.bin");
  const std::string b = slurp(dir / "out_cn" / "checkpoint.bin");
  CHECK(a == b);
}

TEST_CASE("identical config and seed reproduce checkpoints and reports bit-exactly") {
  const fs::path dir = synth::fresh_temp_dir("repro");
  const auto files = synth::write_corpus(dir / "corpus", tiny_spec(12));

  auto run = [&](const std::string& tag) {
    RunConfig config = tiny_config(files, dir / ("out_" + tag), 12);
    config.mode = "multi";
    config.knowledge = "both";
    config.checkpoint_path = cmd_train(config);
    config.out_dir = (dir / ("eval_" + tag)).string();
    cmd_evaluate(config);
    return std::make_pair(slurp(config.checkpoint_path),
                          slurp(dir / ("eval_" + tag) / "eval_report.json"));
  };
  const auto [ckpt_a, report_a] = run("a");
  const auto [ckpt_b, report_b] = run("b");
  CHECK(ckpt_a == ckpt_b);
  CHECK(report_a == report_b);
}
