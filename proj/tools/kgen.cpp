// kgen: knowledge-grounded inferential text generation.
//
// Subcommands: train, generate, evaluate, coverage, stats, ablate.
// Exit codes: 0 success, 1 usage/config error, 2 data error.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config.hpp"

namespace {

using kgen::RunConfig;

void add_common_options(CLI::App* cmd, RunConfig& config, std::string& config_file,
                        std::vector<std::string>& overrides) {
  cmd->add_option("--config", config_file, "key=value config file");
  cmd->add_option("--set", overrides, "config overrides as key=value")
      ->take_all();
  cmd->add_option("--dataset-mode", config.dataset_mode,
                  "event2mind | atomic | generic");
  cmd->add_option("--train", config.train_path, "training data file");
  cmd->add_option("--dev", config.dev_path, "development data file");
  cmd->add_option("--test", config.test_path, "test data file");
  cmd->add_option("--gold", config.gold_path, "gold-set JSONL for evaluation");
  cmd->add_option("--triples", config.triples_path, "knowledge triple TSV");
  cmd->add_option("--snippets", config.snippets_path, "search snippet JSONL");
  cmd->add_option("--embeddings", config.embeddings_path,
                  "static word-embedding text file");
  cmd->add_option("--data-dir", config.data_dir,
                  "directory with stopwords.txt, pos_lexicon.tsv, key_phrases.txt");
  cmd->add_option("--out", config.out_dir, "output directory");
  cmd->add_option("--checkpoint", config.checkpoint_path, "checkpoint path");
  cmd->add_option("--mode", config.mode, "single | multi | maml");
  cmd->add_option("--knowledge", config.knowledge, "none | conceptnet | web | both");
  cmd->add_option("--seed", config.seed, "random seed");
  cmd->add_option("--epochs", config.epochs, "training epochs");
  cmd->add_option("--batch-size", config.batch_size, "batch size");
  cmd->add_option_function<double>(
      "--lr", [&config](const double& v) { config.lr = v; }, "learning rate");
  cmd->add_option("--alpha", config.alpha, "inner step size");
  cmd->add_option("--beta", config.beta, "meta-test weight");
  cmd->add_flag("--second-order", config.second_order,
                "differentiate through the inner step");
  cmd->add_flag("--outer-sgd", config.outer_sgd, "plain SGD outer updates");
  cmd->add_option("--relation", config.relation, "restrict single-task training");
  cmd->add_option("--word-dim", config.word_dim, "word embedding size");
  cmd->add_option("--relation-dim", config.relation_dim, "relation embedding size");
  cmd->add_option("--hidden", config.hidden, "encoder hidden size per direction");
  cmd->add_option("--dropout", config.dropout, "embedding dropout rate");
  cmd->add_flag("--feed-prev-state", config.feed_prev_state,
                "also feed the previous decoder state as GRU input");
  cmd->add_option("--min-count", config.min_count, "vocabulary frequency cutoff");
  cmd->add_option("--max-ngram", config.max_ngram, "n-gram length for retrieval");
  cmd->add_option("--memory-limit", config.memory_limit, "memory entries per event");
  cmd->add_option("--snippets-per-event", config.snippets_per_event,
                  "web snippets to keep per event");
  cmd->add_option("--beam-width", config.beam_width, "beam width");
  cmd->add_option("--k", config.k, "candidates kept per example");
  cmd->add_option("--max-len", config.max_len, "maximum generated length");
}

// flags > file > defaults: parse flags into a scratch config to learn the
// file path, then layer the file under the flags by re-parsing.
RunConfig resolve_config(CLI::App* cmd, const std::string& config_file,
                         const std::vector<std::string>& overrides,
                         const RunConfig& flag_values) {
  RunConfig resolved;
  if (!config_file.empty()) resolved = kgen::load_config_file(config_file);

  // Re-apply every flag the user actually passed on top of the file.
  auto apply = [&](const char* flag, auto member) {
    if (cmd->count(flag) > 0) resolved.*member = flag_values.*member;
  };
  apply("--dataset-mode", &RunConfig::dataset_mode);
  apply("--train", &RunConfig::train_path);
  apply("--dev", &RunConfig::dev_path);
  apply("--test", &RunConfig::test_path);
  apply("--gold", &RunConfig::gold_path);
  apply("--triples", &RunConfig::triples_path);
  apply("--snippets", &RunConfig::snippets_path);
  apply("--embeddings", &RunConfig::embeddings_path);
  apply("--data-dir", &RunConfig::data_dir);
  apply("--out", &RunConfig::out_dir);
  apply("--checkpoint", &RunConfig::checkpoint_path);
  apply("--mode", &RunConfig::mode);
  apply("--knowledge", &RunConfig::knowledge);
  apply("--seed", &RunConfig::seed);
  apply("--epochs", &RunConfig::epochs);
  apply("--batch-size", &RunConfig::batch_size);
  if (cmd->count("--lr") > 0) resolved.lr = flag_values.lr;
  apply("--alpha", &RunConfig::alpha);
  apply("--beta", &RunConfig::beta);
  apply("--second-order", &RunConfig::second_order);
  apply("--outer-sgd", &RunConfig::outer_sgd);
  apply("--relation", &RunConfig::relation);
  apply("--word-dim", &RunConfig::word_dim);
  apply("--relation-dim", &RunConfig::relation_dim);
  apply("--hidden", &RunConfig::hidden);
  apply("--dropout", &RunConfig::dropout);
  apply("--feed-prev-state", &RunConfig::feed_prev_state);
  apply("--min-count", &RunConfig::min_count);
  apply("--max-ngram", &RunConfig::max_ngram);
  apply("--memory-limit", &RunConfig::memory_limit);
  apply("--snippets-per-event", &RunConfig::snippets_per_event);
  apply("--beam-width", &RunConfig::beam_width);
  apply("--k", &RunConfig::k);
  apply("--max-len", &RunConfig::max_len);

  // Explicit overrides beat everything.
  for (const std::string& kv : overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw kgen::ConfigError("--set expects key=value, got '" + kv + "'");
    resolved.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return resolved;
}

std::vector<std::size_t> parse_counts(const std::string& arg) {
  std::vector<std::size_t> counts;
  std::istringstream in(arg);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    counts.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return counts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge-grounded inferential text generation"};
  app.require_subcommand(1);

  RunConfig flags;
  std::string config_file;
  std::vector<std::string> overrides;

  auto* train = app.add_subcommand("train", "train a model");
  add_common_options(train, flags, config_file, overrides);

  auto* generate = app.add_subcommand("generate", "generate candidates");
  add_common_options(generate, flags, config_file, overrides);
  std::string gen_event, gen_relation;
  generate->add_option("--event", gen_event, "event phrase");
  generate->add_option("--gen-relation", gen_relation, "relation to condition on");

  auto* evaluate = app.add_subcommand("evaluate", "recall/bleu evaluation");
  add_common_options(evaluate, flags, config_file, overrides);

  auto* cover = app.add_subcommand("coverage", "knowledge coverage report");
  add_common_options(cover, flags, config_file, overrides);

  auto* stats = app.add_subcommand("stats", "dataset statistics");
  add_common_options(stats, flags, config_file, overrides);
  std::string stats_path;
  stats->add_option("--data", stats_path, "dataset file to count");

  auto* ablate = app.add_subcommand("ablate", "snippet-count ablation");
  add_common_options(ablate, flags, config_file, overrides);
  std::string counts_arg = "0,5,10";
  ablate->add_option("--counts", counts_arg, "comma-separated snippet counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    RunConfig config = resolve_config(cmd, config_file, overrides, flags);

    if (cmd == train) {
      const std::string path = kgen::cmd_train(config);
      std::cout << "checkpoint written to " << path << "\n";
    } else if (cmd == generate) {
      const auto results = kgen::cmd_generate(config, gen_event, gen_relation);
      for (const auto& res : results) {
        std::cout << "# " << res.event << "\t" << res.relation << "\n";
        for (const auto& [score, text] : res.candidates)
          std::cout << score << "\t" << text << "\n";
      }
    } else if (cmd == evaluate) {
      const kgen::EvalReport report = kgen::cmd_evaluate(config);
      std::cout << kgen::eval_report_json(report) << "\n";
    } else if (cmd == cover) {
      const auto reports = kgen::cmd_coverage(config);
      for (const auto& sc : reports) {
        std::cout << sc.source << ": mean entries/event "
                  << sc.report.mean_entries_per_event << "\n";
        for (const auto& [rel, cov] : sc.report.per_relation)
          std::cout << "  hit@" << rel << " " << cov.hit_rate() << "% (" << cov.hits
                    << "/" << cov.total << ")\n";
      }
    } else if (cmd == stats) {
      if (stats_path.empty()) stats_path = config.train_path;
      if (stats_path.empty())
        throw kgen::ConfigError("stats needs --data or --train");
      const kgen::DatasetStats s =
          kgen::cmd_stats(config, stats_path, config.dataset_mode);
      std::cout << "relations\t" << s.relations << "\n"
                << "events\t" << s.events << "\n"
                << "triplets\t" << s.triplets << "\n";
    } else if (cmd == ablate) {
      const auto rows = kgen::cmd_ablate(config, parse_counts(counts_arg));
      for (const auto& row : rows)
        std::cout << row.snippet_count << "\t" << row.macro_recall << "\n";
    }
  } catch (const kgen::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const kgen::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const kgen::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
