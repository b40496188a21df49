#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

namespace kgen {

namespace fs = std::filesystem;

SharedData SharedData::load(const std::string& data_dir) {
  const fs::path dir(data_dir);
  SharedData shared{
      StopWords::load((dir / "stopwords.txt").string()),
      PosLexicon::load((dir / "pos_lexicon.tsv").string()),
      KeyPhraseTable::load((dir / "key_phrases.txt").string()),
  };
  return shared;
}

KnowledgeConfig knowledge_config(const RunConfig& config) {
  KnowledgeConfig kc;
  kc.use_conceptnet = config.knowledge == "conceptnet" || config.knowledge == "both";
  kc.use_web = config.knowledge == "web" || config.knowledge == "both";
  kc.max_ngram = config.max_ngram;
  kc.memory_limit = config.memory_limit;
  kc.snippets_per_event = config.snippets_per_event;
  return kc;
}

KnowledgeIndex build_knowledge_index(const RunConfig& config,
                                     const SharedData& shared,
                                     const std::vector<const Dataset*>& datasets) {
  const KnowledgeConfig kc = knowledge_config(config);
  if (!kc.use_conceptnet && !kc.use_web) return {};

  TripleStore triples;
  std::vector<Snippet> snippets;
  if (kc.use_conceptnet) {
    if (config.triples_path.empty())
      throw ConfigError("knowledge=" + config.knowledge + " needs a triples path");
    triples = TripleStore::load(config.triples_path);
  }
  if (kc.use_web) {
    if (config.snippets_path.empty())
      throw ConfigError("knowledge=" + config.knowledge + " needs a snippets path");
    snippets = load_snippets(config.snippets_path);
  }

  std::vector<std::pair<std::string, std::vector<std::string>>> events;
  std::set<std::string> seen;
  for (const Dataset* ds : datasets) {
    if (!ds) continue;
    for (const EventExample& ex : ds->examples)
      if (seen.insert(ex.event_raw).second)
        events.emplace_back(ex.event_raw, ex.event_tokens);
  }
  return KnowledgeIndex::build(events, kc.use_conceptnet ? &triples : nullptr,
                               kc.use_web ? &snippets : nullptr, shared.lexicon, kc);
}

namespace {

// Loss over a batch: mean of per-example teacher-forced losses, each with its
// own memory bank. Dropout follows the tape: a recording pass is a training
// pass, loss evaluation without a tape runs in eval mode.
BatchLossFn make_seq2seq_loss(const ModelDims& dims, const Vocabulary& vocab,
                              const KnowledgeIndex& knowledge, Rng* dropout_rng) {
  return [&dims = dims, &vocab, &knowledge, dropout_rng](
             ParamSet& params, const TaskBatch& batch) -> Tensor {
    if (batch.examples.empty()) throw DataError("empty batch");
    const bool training = Tape::active() != nullptr;
    ModelParams view = ModelParams::bind(params, dims);
    Tensor total = Tensor::scalar(0.0);
    for (const EventExample* ex : batch.examples) {
      const MemoryBank bank =
          build_memory_bank(knowledge.entries_for(ex->event_raw), view, vocab);
      total = ops::add(total,
                       sequence_loss(*ex, view, bank, vocab, training, dropout_rng));
    }
    return ops::scale(total, 1.0 / static_cast<double>(batch.examples.size()));
  };
}

ModelDims dims_from_config(const RunConfig& config, std::size_t vocab_size,
                           std::size_t relation_count) {
  ModelDims dims;
  dims.vocab = vocab_size;
  dims.relations = relation_count;
  dims.word_dim = config.word_dim;
  dims.relation_dim = config.relation_dim;
  dims.hidden = config.hidden;
  dims.dropout = config.dropout;
  dims.feed_prev_state = config.feed_prev_state;
  return dims;
}

Dataset load_required(const std::string& path, DatasetMode mode, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path is required");
  return load_dataset(path, mode);
}

}  // namespace

std::string cmd_train(const RunConfig& config) {
  const DatasetMode mode = config.parsed_mode();
  const Dataset train = load_required(config.train_path, mode, "train");
  if (train.examples.empty()) throw DataError("training set is empty");

  std::optional<Dataset> dev;
  if (!config.dev_path.empty()) dev = load_dataset(config.dev_path, mode);

  const SharedData shared = SharedData::load(config.data_dir);
  std::vector<const Dataset*> sources = {&train};
  if (dev) sources.push_back(&*dev);
  const KnowledgeIndex knowledge = build_knowledge_index(config, shared, sources);

  Vocabulary vocab = build_vocab(train.examples, config.min_count);
  const ModelDims dims =
      dims_from_config(config, vocab.size(), train.relations.size());

  fs::create_directories(config.out_dir);
  write_resolved_config(config.out_dir, config);

  Checkpoint ckpt;
  ckpt.mode = config.mode;
  ckpt.dims = dims;
  ckpt.dataset_mode = mode;
  ckpt.vocab = vocab;
  ckpt.relations = train.relations;

  std::vector<EpochRecord> history;
  Rng dropout_rng(config.seed ^ 0xd1b54a32d192ed03ull);
  const BatchLossFn train_loss =
      make_seq2seq_loss(ckpt.dims, ckpt.vocab, knowledge, &dropout_rng);

  auto init_params = [&](std::uint64_t salt) {
    Rng rng(config.seed ^ salt);
    ParamSet params = ModelParams::create(dims, rng);
    if (!config.embeddings_path.empty())
      apply_embedding_file(params, dims, ckpt.vocab, config.embeddings_path);
    return params;
  };

  if (config.mode == "single") {
    std::vector<std::string> targets;
    if (!config.relation.empty()) {
      train.relations.by_name(config.relation);  // validates
      targets = {config.relation};
    } else {
      targets = train.relations.names();
    }
    TrainConfig tc;
    tc.lr = config.resolved_lr();
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    for (const std::string& name : targets) {
      const RelationId rel = train.relations.by_name(name);
      tc.seed = config.seed ^ (0xbf58476d1ce4e5b9ull * (rel.index + 1));
      ParamSet params = init_params(static_cast<std::uint64_t>(rel.index) + 1);
      TrainResult res = train_single_task(rel, train, train_loss, params, tc,
                                          dev ? &*dev : nullptr);
      for (EpochRecord& r : res.history) history.push_back(std::move(r));
      ckpt.params.emplace_back(name, std::move(params));
    }
  } else if (config.mode == "multi" || config.mode == "maml") {
    ParamSet params = init_params(0);
    TrainResult res;
    if (config.mode == "multi") {
      TrainConfig tc;
      tc.lr = config.resolved_lr();
      tc.epochs = config.epochs;
      tc.batch_size = config.batch_size;
      tc.seed = config.seed;
      res = train_multitask(train, train_loss, params, tc, dev ? &*dev : nullptr);
    } else {
      MamlConfig mc;
      mc.lr = config.resolved_lr();
      mc.epochs = config.epochs;
      mc.batch_size = config.batch_size;
      mc.seed = config.seed;
      mc.alpha = config.alpha;
      mc.beta = config.beta;
      mc.first_order = !config.second_order;
      mc.outer_sgd = config.outer_sgd;
      res = train_maml(train, train_loss, params, mc, dev ? &*dev : nullptr);
    }
    history = std::move(res.history);
    ckpt.params.emplace_back("shared", std::move(params));
  } else {
    throw ConfigError("unknown training mode: " + config.mode);
  }

  const std::string ckpt_path =
      config.checkpoint_path.empty()
          ? (fs::path(config.out_dir) / "checkpoint.bin").string()
          : config.checkpoint_path;
  save_checkpoint(ckpt_path, ckpt);
  write_train_log_jsonl((fs::path(config.out_dir) / "train_log.jsonl").string(),
                        history);
  return ckpt_path;
}

std::vector<EvalRecord> generate_eval_records(Checkpoint& ckpt,
                                              const RunConfig& config,
                                              const SharedData& shared,
                                              const Dataset& test,
                                              const KnowledgeIndex& knowledge) {
  (void)shared;
  std::vector<GoldRecord> gold = config.gold_path.empty()
                                     ? gold_records_from_dataset(test)
                                     : load_gold_jsonl(config.gold_path);
  std::vector<EvalRecord> records;
  records.reserve(gold.size());
  for (const GoldRecord& g : gold) {
    if (!ckpt.relations.contains(g.relation))
      throw DataError("relation '" + g.relation +
                      "' in the test data is unknown to the checkpoint");
    const RelationId rel = ckpt.relations.by_name(g.relation);
    ParamSet& set = ckpt.params_for(g.relation);
    ModelParams view = ModelParams::bind(set, ckpt.dims);

    const std::vector<std::string> event_tokens = tokenize(g.event);
    if (event_tokens.empty()) throw DataError("empty event in test data: " + g.event);
    const MemoryBank bank =
        build_memory_bank(knowledge.entries_for(g.event), view, ckpt.vocab);

    const std::vector<Hypothesis> hyps =
        beam_search(ckpt.vocab.encode(event_tokens), rel, view, bank,
                    std::max(config.beam_width, config.k), config.max_len, config.k);

    EvalRecord rec;
    rec.event = g.event;
    rec.relation = g.relation;
    for (const std::string& s : g.gold) rec.gold.insert(normalize_text(s));
    std::set<std::string> seen;
    for (const Hypothesis& h : hyps) {
      const std::string text = normalize_text(hypothesis_text(h, ckpt.vocab));
      if (seen.insert(text).second) rec.generated.push_back(text);
      if (rec.generated.size() >= config.k) break;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

EvalReport cmd_evaluate(const RunConfig& config) {
  if (config.checkpoint_path.empty())
    throw ConfigError("evaluate needs a checkpoint path");
  Checkpoint ckpt = load_checkpoint(config.checkpoint_path);

  const Dataset test = load_required(config.test_path, ckpt.dataset_mode, "test");
  if (test.examples.empty()) throw DataError("test set is empty");

  const SharedData shared = SharedData::load(config.data_dir);
  const KnowledgeIndex knowledge = build_knowledge_index(config, shared, {&test});

  const std::vector<EvalRecord> records =
      generate_eval_records(ckpt, config, shared, test, knowledge);
  const EvalReport report = evaluate_records(records, config.k);

  fs::create_directories(config.out_dir);
  write_resolved_config(config.out_dir, config);
  write_eval_report((fs::path(config.out_dir) / "eval_report.json").string(), report);
  return report;
}

std::vector<GenerateResult> cmd_generate(const RunConfig& config,
                                         const std::string& event,
                                         const std::string& relation) {
  if (config.checkpoint_path.empty())
    throw ConfigError("generate needs a checkpoint path");
  Checkpoint ckpt = load_checkpoint(config.checkpoint_path);
  const SharedData shared = SharedData::load(config.data_dir);

  struct Pair { std::string event, relation; };
  std::vector<Pair> pairs;
  if (!event.empty()) {
    if (relation.empty()) throw ConfigError("generate needs --relation with --event");
    pairs.push_back({event, relation});
  } else {
    if (config.test_path.empty())
      throw ConfigError("generate needs --event/--relation or an input file");
    const Dataset inputs = load_dataset(config.test_path, ckpt.dataset_mode);
    std::set<std::pair<std::string, std::string>> seen;
    for (const EventExample& ex : inputs.examples)
      if (seen.insert({ex.event_raw, ex.relation.name}).second)
        pairs.push_back({ex.event_raw, ex.relation.name});
  }

  // Knowledge entries for exactly the events we generate for.
  Dataset probe;
  probe.mode = ckpt.dataset_mode;
  probe.relations = ckpt.relations;
  for (const Pair& p : pairs) {
    EventExample ex;
    ex.event_raw = p.event;
    ex.event_tokens = tokenize(p.event);
    ex.relation = ckpt.relations.by_name(p.relation);
    ex.target_raw = "none";
    ex.target_tokens = {"none"};
    probe.examples.push_back(std::move(ex));
  }
  const KnowledgeIndex knowledge = build_knowledge_index(config, shared, {&probe});

  std::vector<GenerateResult> results;
  for (const Pair& p : pairs) {
    const RelationId rel = ckpt.relations.by_name(p.relation);
    ParamSet& set = ckpt.params_for(p.relation);
    ModelParams view = ModelParams::bind(set, ckpt.dims);
    const std::vector<std::string> tokens = tokenize(p.event);
    if (tokens.empty()) throw DataError("empty event: " + p.event);
    const MemoryBank bank =
        build_memory_bank(knowledge.entries_for(p.event), view, ckpt.vocab);
    const std::vector<Hypothesis> hyps =
        beam_search(ckpt.vocab.encode(tokens), rel, view, bank,
                    std::max(config.beam_width, config.k), config.max_len, config.k);
    GenerateResult res;
    res.event = p.event;
    res.relation = p.relation;
    for (const Hypothesis& h : hyps)
      res.candidates.emplace_back(h.score, hypothesis_text(h, ckpt.vocab));
    results.push_back(std::move(res));
  }
  return results;
}

std::vector<SourceCoverage> cmd_coverage(const RunConfig& config) {
  const DatasetMode mode = config.parsed_mode();
  const std::string path =
      !config.test_path.empty() ? config.test_path : config.train_path;
  const Dataset data = load_required(path, mode, "coverage input");
  const SharedData shared = SharedData::load(config.data_dir);

  // Gold targets grouped per (event, relation).
  struct Group {
    RelationId relation;
    std::string event;
    std::vector<std::vector<std::string>> targets;
  };
  std::vector<Group> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const EventExample& ex : data.examples) {
    const auto key = std::make_pair(ex.event_raw, ex.relation.name);
    auto it = index.find(key);
    if (it == index.end()) {
      index[key] = groups.size();
      groups.push_back({ex.relation, ex.event_raw, {ex.target_tokens}});
    } else {
      groups[it->second].targets.push_back(ex.target_tokens);
    }
  }

  std::vector<std::string> sources;
  if (config.knowledge == "both") sources = {"conceptnet", "web", "both"};
  else if (config.knowledge == "none") throw ConfigError("coverage needs knowledge sources");
  else sources = {config.knowledge};

  std::vector<SourceCoverage> out;
  for (const std::string& source : sources) {
    RunConfig sub = config;
    sub.knowledge = source;
    const KnowledgeIndex knowledge = build_knowledge_index(sub, shared, {&data});
    std::vector<CoverageRecord> records;
    records.reserve(groups.size());
    for (const Group& g : groups) {
      records.push_back(
          {g.relation, g.targets, &knowledge.raw_entries_for(g.event)});
    }
    out.push_back({source, coverage(records, shared.stop_words)});
  }

  fs::create_directories(config.out_dir);
  write_resolved_config(config.out_dir, config);
  nlohmann::json doc = nlohmann::json::object();
  for (const SourceCoverage& sc : out) {
    nlohmann::json block;
    block["mean_entries_per_event"] = sc.report.mean_entries_per_event;
    nlohmann::json rels = nlohmann::json::object();
    for (const auto& [rel, cov] : sc.report.per_relation) {
      rels[rel] = {{"hits", cov.hits},
                   {"total", cov.total},
                   {"hit_rate", cov.hit_rate()}};
    }
    block["relations"] = rels;
    doc[sc.source] = block;
  }
  std::ofstream f(fs::path(config.out_dir) / "coverage.json");
  f << doc.dump(2) << "\n";
  return out;
}

DatasetStats cmd_stats(const RunConfig& config, const std::string& path,
                       const std::string& mode_name) {
  const Dataset data = load_dataset(path, parse_dataset_mode(mode_name));
  const DatasetStats stats = dataset_stats(data);

  fs::create_directories(config.out_dir);
  nlohmann::json doc = {{"dataset_mode", mode_name},
                        {"path", path},
                        {"relations", stats.relations},
                        {"events", stats.events},
                        {"triplets", stats.triplets}};
  std::ofstream f(fs::path(config.out_dir) / "stats.json");
  f << doc.dump(2) << "\n";
  return stats;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& config,
                                    const std::vector<std::size_t>& counts) {
  if (counts.empty()) throw ConfigError("ablate needs at least one snippet count");
  if (config.test_path.empty()) throw ConfigError("ablate needs a test path");

  // Warn when the snippet file cannot honor the largest requested count.
  if (!config.snippets_path.empty()) {
    const std::vector<Snippet> snippets = load_snippets(config.snippets_path);
    std::map<std::string, std::size_t> per_event;
    for (const Snippet& s : snippets) ++per_event[s.event_key];
    std::size_t available = 0;
    for (const auto& [_, n] : per_event) available = std::max(available, n);
    const std::size_t wanted = *std::max_element(counts.begin(), counts.end());
    if (wanted > available)
      std::cerr << "warning: requested " << wanted
                << " snippets per event but the file holds at most " << available
                << "; counts are truncated\n";
  }

  std::vector<AblationRow> rows;
  for (std::size_t count : counts) {
    RunConfig sub = config;
    sub.snippets_per_event = count;
    sub.out_dir = (fs::path(config.out_dir) /
                   ("snippets_" + std::to_string(count))).string();
    sub.checkpoint_path = (fs::path(sub.out_dir) / "checkpoint.bin").string();
    cmd_train(sub);
    const EvalReport report = cmd_evaluate(sub);
    rows.push_back({count, report.macro_recall()});
  }

  fs::create_directories(config.out_dir);
  write_resolved_config(config.out_dir, config);
  std::ofstream f(fs::path(config.out_dir) / "ablation.tsv");
  f << "snippets_per_event\trecall_at_" << config.k << "\n";
  for (const AblationRow& row : rows)
    f << row.snippet_count << "\t" << row.macro_recall << "\n";
  return rows;
}

}  // namespace kgen
