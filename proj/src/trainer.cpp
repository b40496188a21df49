#include "trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include <json.hpp>

namespace kgen {

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// Gradient of the mean batch loss at params, via one fresh tape.
std::vector<std::vector<double>> batch_grads(const BatchLossFn& loss_fn,
                                             ParamSet& params,
                                             const TaskBatch& batch) {
  params.zero_grads();
  Tape tape;
  Tape::Scope scope(tape);
  Tensor loss = loss_fn(params, batch);
  tape.backward(loss);
  return params.grads();
}

// Summed gradient over several batches (losses summed, not averaged).
std::vector<std::vector<double>> summed_grads(const BatchLossFn& loss_fn,
                                              ParamSet& params,
                                              const std::vector<TaskBatch>& batches) {
  params.zero_grads();
  Tape tape;
  Tape::Scope scope(tape);
  Tensor total = Tensor::scalar(0.0);
  for (const TaskBatch& b : batches) total = ops::add(total, loss_fn(params, b));
  tape.backward(total);
  return params.grads();
}

EpochRecord make_record(std::size_t epoch, const std::string& mode,
                        const BatchLossFn& loss_fn, ParamSet& params,
                        const std::map<std::string, std::vector<const EventExample*>>& dev_groups,
                        double started) {
  EpochRecord rec;
  rec.epoch = epoch;
  rec.mode = mode;
  for (const auto& [name, examples] : dev_groups) {
    if (examples.empty()) continue;
    rec.dev_loss[name] =
        evaluate_loss(loss_fn, params, examples.front()->relation, examples);
  }
  rec.wall_time_seconds = now_seconds() - started;
  return rec;
}

}  // namespace

BatchStream::BatchStream(const RelationId& relation,
                         std::vector<const EventExample*> examples,
                         std::size_t batch_size, std::uint64_t seed)
    : relation_(relation),
      examples_(std::move(examples)),
      batch_size_(std::max<std::size_t>(1, batch_size)),
      rng_(seed) {
  if (examples_.empty())
    throw DataError("no examples for relation: " + relation_.name);
  order_.resize(examples_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  reshuffle();
}

void BatchStream::reshuffle() {
  rng_.shuffle(order_);
  cursor_ = 0;
}

std::size_t BatchStream::batches_per_pass() const {
  return (examples_.size() + batch_size_ - 1) / batch_size_;
}

TaskBatch BatchStream::next() {
  if (cursor_ >= order_.size()) reshuffle();
  TaskBatch batch;
  batch.relation = relation_;
  const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
  for (std::size_t i = cursor_; i < end; ++i)
    batch.examples.push_back(examples_[order_[i]]);
  cursor_ = end;
  return batch;
}

std::pair<TaskBatch, TaskBatch> BatchStream::next_pair() {
  if (examples_.size() < 2)
    throw DataError("relation " + relation_.name +
                    " cannot supply two disjoint batches");
  // Both halves must come from one pass so they cannot overlap.
  if (cursor_ + 2 > order_.size()) reshuffle();
  TaskBatch first = next();
  if (cursor_ >= order_.size()) {
    // The pass ended with one batch left over; split it.
    TaskBatch second;
    second.relation = relation_;
    const std::size_t half = first.examples.size() / 2;
    second.examples.assign(first.examples.begin() + half, first.examples.end());
    first.examples.resize(half);
    return {first, second};
  }
  TaskBatch second = next();
  return {first, second};
}

std::map<std::string, std::vector<const EventExample*>> group_by_relation(
    const Dataset& dataset) {
  std::map<std::string, std::vector<const EventExample*>> groups;
  for (const std::string& name : dataset.relations.names()) groups[name];
  for (const EventExample& ex : dataset.examples)
    groups[ex.relation.name].push_back(&ex);
  return groups;
}

double evaluate_loss(const BatchLossFn& loss_fn, ParamSet& params,
                     const RelationId& relation,
                     const std::vector<const EventExample*>& examples) {
  if (examples.empty()) return 0.0;
  TaskBatch batch;
  batch.relation = relation;
  batch.examples = examples;
  // No tape scope: nothing is recorded.
  return loss_fn(params, batch).item();
}

TrainResult train_single_task(const RelationId& relation, const Dataset& dataset,
                              const BatchLossFn& loss_fn, ParamSet& params,
                              const TrainConfig& config, const Dataset* dev) {
  auto groups = group_by_relation(dataset);
  auto it = groups.find(relation.name);
  if (it == groups.end() || it->second.empty())
    throw DataError("dataset has no examples for relation: " + relation.name);

  std::map<std::string, std::vector<const EventExample*>> dev_groups;
  if (dev) {
    auto dg = group_by_relation(*dev);
    dev_groups[relation.name] = dg[relation.name];
  } else {
    dev_groups[relation.name] = it->second;
  }

  BatchStream stream(relation, it->second, config.batch_size, config.seed);
  AdamOptimizer adam(config.lr);
  const double started = now_seconds();

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::size_t steps = stream.batches_per_pass();
    for (std::size_t s = 0; s < steps; ++s) {
      params.set_grads(batch_grads(loss_fn, params, stream.next()));
      adam.step(params);
    }
    result.history.push_back(
        make_record(epoch + 1, "single", loss_fn, params, dev_groups, started));
  }
  return result;
}

void multitask_step(ParamSet& params, const BatchLossFn& loss_fn,
                    const TaskBatch& batch, AdamOptimizer& optimizer) {
  params.set_grads(batch_grads(loss_fn, params, batch));
  optimizer.step(params);
}

TrainResult train_multitask(const Dataset& dataset, const BatchLossFn& loss_fn,
                            ParamSet& params, const TrainConfig& config,
                            const Dataset* dev) {
  if (dataset.relations.size() < 2)
    throw DataError("multi-task training needs >= 2 relations");
  auto groups = group_by_relation(dataset);

  std::vector<RelationId> relations;
  std::vector<BatchStream> streams;
  for (const std::string& name : dataset.relations.names()) {
    if (groups[name].empty())
      throw DataError("dataset has no examples for relation: " + name);
    RelationId rel = dataset.relations.by_name(name);
    relations.push_back(rel);
    streams.emplace_back(rel, groups[name], config.batch_size,
                         config.seed ^ (0x9e3779b97f4a7c15ull * (rel.index + 1)));
  }

  auto dev_groups = dev ? group_by_relation(*dev) : groups;
  Rng sampler(config.seed);
  AdamOptimizer adam(config.lr);
  const double started = now_seconds();

  const std::size_t steps_per_epoch =
      std::max<std::size_t>(1, (dataset.examples.size() + config.batch_size - 1) /
                                   config.batch_size);

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t pick = sampler.below(streams.size());
      multitask_step(params, loss_fn, streams[pick].next(), adam);
    }
    result.history.push_back(
        make_record(epoch + 1, "multi", loss_fn, params, dev_groups, started));
  }
  return result;
}

ParamSet inner_update(const ParamSet& theta, const BatchLossFn& loss_fn,
                      const std::vector<TaskBatch>& other_task_batches,
                      double alpha) {
  if (other_task_batches.empty())
    throw DataError("inner_update: no other-task batches");
  ParamSet adapted = theta.deep_copy();
  adapted.apply_sgd(summed_grads(loss_fn, adapted, other_task_batches), alpha);
  return adapted;
}

void maml_round(ParamSet& params, const BatchLossFn& loss_fn,
                const std::vector<MamlRoundTask>& tasks, const MamlConfig& config,
                AdamOptimizer& outer) {
  for (const MamlRoundTask& task : tasks) {
    ParamSet adapted = inner_update(params, loss_fn, task.other_batches, config.alpha);

    // Meta-test gradient for the target task at the adapted parameters.
    std::vector<std::vector<double>> meta =
        batch_grads(loss_fn, adapted, task.meta_test);
    if (!config.first_order) {
      // Correct through the inner step: g <- (I - alpha H) g, with the
      // Hessian-vector product taken by central differences of the inner
      // gradient around theta.
      const double eps = 1e-4;
      ParamSet probe = params.deep_copy();
      auto nudge = [&probe, &meta](double step) {
        for (std::size_t i = 0; i < probe.size(); ++i) {
          Tensor& t = probe.tensor(i);
          for (std::size_t j = 0; j < t.size(); ++j) t.data()[j] += step * meta[i][j];
        }
      };
      nudge(eps);
      auto plus = summed_grads(loss_fn, probe, task.other_batches);
      nudge(-2.0 * eps);
      auto minus = summed_grads(loss_fn, probe, task.other_batches);
      for (std::size_t i = 0; i < meta.size(); ++i)
        for (std::size_t j = 0; j < meta[i].size(); ++j) {
          const double hvp = (plus[i][j] - minus[i][j]) / (2.0 * eps);
          meta[i][j] -= config.alpha * hvp;
        }
    }

    // Ordinary supervised gradient at the current parameters.
    std::vector<std::vector<double>> supervised =
        batch_grads(loss_fn, params, task.supervised);

    auto combined =
        combine_grads(config.beta, meta, 1.0 - config.beta, supervised);
    if (config.outer_sgd) {
      params.apply_sgd(combined, config.lr);
    } else {
      params.set_grads(combined);
      outer.step(params);
    }
  }
}

TrainResult train_maml(const Dataset& dataset, const BatchLossFn& loss_fn,
                       ParamSet& params, const MamlConfig& config,
                       const Dataset* dev) {
  if (dataset.relations.size() < 2)
    throw DataError("meta training needs >= 2 relations");
  auto groups = group_by_relation(dataset);

  std::vector<RelationId> relations;
  std::vector<BatchStream> streams;
  for (const std::string& name : dataset.relations.names()) {
    if (groups[name].empty())
      throw DataError("dataset has no examples for relation: " + name);
    RelationId rel = dataset.relations.by_name(name);
    if (groups[name].size() < 2)
      throw DataError("relation " + name +
                      " cannot supply two disjoint batches per round");
    relations.push_back(rel);
    streams.emplace_back(rel, groups[name], config.batch_size,
                         config.seed ^ (0x9e3779b97f4a7c15ull * (rel.index + 1)));
  }

  auto dev_groups = dev ? group_by_relation(*dev) : groups;
  AdamOptimizer outer(config.lr);
  const double started = now_seconds();

  // Each round consumes ~3 batches per task; scale rounds so one epoch sees
  // roughly the dataset once per task role.
  const std::size_t rounds_per_epoch = std::max<std::size_t>(
      1, dataset.examples.size() /
             std::max<std::size_t>(1, 3 * config.batch_size * relations.size()));

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t round = 0; round < rounds_per_epoch; ++round) {
      std::vector<MamlRoundTask> tasks(relations.size());
      for (std::size_t i = 0; i < relations.size(); ++i) {
        for (std::size_t j = 0; j < relations.size(); ++j) {
          if (j == i) continue;
          tasks[i].other_batches.push_back(streams[j].next());
        }
        auto [d1, d2] = streams[i].next_pair();
        tasks[i].meta_test = std::move(d1);
        tasks[i].supervised = std::move(d2);
      }
      maml_round(params, loss_fn, tasks, config, outer);
    }
    result.history.push_back(
        make_record(epoch + 1, "maml", loss_fn, params, dev_groups, started));
  }
  return result;
}

void write_train_log_jsonl(const std::string& path,
                           const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write training log: " + path);
  for (const EpochRecord& rec : history) {
    nlohmann::json obj;
    obj["epoch"] = rec.epoch;
    obj["mode"] = rec.mode;
    obj["dev_loss"] = rec.dev_loss;
    obj["wall_time_seconds"] = rec.wall_time_seconds;
    out << obj.dump() << "\n";
  }
}

}  // namespace kgen
