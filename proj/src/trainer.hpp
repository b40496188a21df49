#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tensor.hpp"
#include "text.hpp"

namespace kgen {

// A batch of examples all drawn from one relation; the unit the training
// loops manipulate. Pointers reference the owning dataset.
struct TaskBatch {
  RelationId relation;
  std::vector<const EventExample*> examples;
};

// Builds the scalar training loss for one batch, evaluated at the given
// parameters. Recorded on the active tape when one is in scope. The training
// loops are generic over this, which is also what lets the hand-checkable
// scalar task family drive the exact same meta-learning code as the text
// model.
using BatchLossFn = std::function<Tensor(ParamSet&, const TaskBatch&)>;

struct TrainConfig {
  double lr = 1e-4;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
};

struct MamlConfig : TrainConfig {
  double alpha = 0.001;     // inner step size
  double beta = 0.01;       // meta-test weight
  // First order: the meta gradient is evaluated at theta' and applied to
  // theta directly. When off, the gradient is corrected through the inner
  // step via a finite-difference Hessian-vector product (small models only).
  bool first_order = true;
  bool outer_sgd = false;  // plain SGD outer updates instead of Adam
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::string mode;
  std::map<std::string, double> dev_loss;  // per relation
  double wall_time_seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
};

// Deterministic per-relation batch stream: a shuffled epoch permutation,
// chunked by batch size, reshuffled per pass. Batches within one pass are
// disjoint.
class BatchStream {
 public:
  BatchStream(const RelationId& relation,
              std::vector<const EventExample*> examples, std::size_t batch_size,
              std::uint64_t seed);

  TaskBatch next();
  // Two disjoint batches from the same pass.
  std::pair<TaskBatch, TaskBatch> next_pair();

  std::size_t example_count() const { return examples_.size(); }
  std::size_t batches_per_pass() const;

 private:
  void reshuffle();

  RelationId relation_;
  std::vector<const EventExample*> examples_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t batch_size_;
  Rng rng_;
};

// Examples grouped per relation, preserving dataset order.
std::map<std::string, std::vector<const EventExample*>> group_by_relation(
    const Dataset& dataset);

// Mean loss over a fixed example list, evaluated without recording a tape.
double evaluate_loss(const BatchLossFn& loss_fn, ParamSet& params,
                     const RelationId& relation,
                     const std::vector<const EventExample*>& examples);

// Adam minimization of the mean batch loss over one relation.
TrainResult train_single_task(const RelationId& relation, const Dataset& dataset,
                              const BatchLossFn& loss_fn, ParamSet& params,
                              const TrainConfig& config,
                              const Dataset* dev = nullptr);

// One flat optimizer step on a single batch. train_multitask is built from
// this; exposed so tests can drive controlled schedules.
void multitask_step(ParamSet& params, const BatchLossFn& loss_fn,
                    const TaskBatch& batch, AdamOptimizer& optimizer);

// One shared parameter set; each optimizer step consumes one batch from a
// relation sampled uniformly. Requires >= 2 relations.
TrainResult train_multitask(const Dataset& dataset, const BatchLossFn& loss_fn,
                            ParamSet& params, const TrainConfig& config,
                            const Dataset* dev = nullptr);

// One SGD step on the summed losses of the other-task batches. theta itself
// is untouched; the result is a derived copy.
ParamSet inner_update(const ParamSet& theta, const BatchLossFn& loss_fn,
                      const std::vector<TaskBatch>& other_task_batches,
                      double alpha);

// The per-round materials for one target task.
struct MamlRoundTask {
  std::vector<TaskBatch> other_batches;  // one batch per other task
  TaskBatch meta_test;                   // D1: evaluated at theta'
  TaskBatch supervised;                  // D2: evaluated at theta
};

// One meta round over every target task, applying the beta-weighted combined
// gradient through the outer optimizer once per task. Exposed so tests can
// drive controlled schedules.
void maml_round(ParamSet& params, const BatchLossFn& loss_fn,
                const std::vector<MamlRoundTask>& tasks, const MamlConfig& config,
                AdamOptimizer& outer);

// Meta-learning loop: for each target task per round, an inner step on the
// other tasks, a meta-test update at the adapted parameters, and the ordinary
// supervised update. Requires >= 2 relations and two disjoint batches per
// task per round.
TrainResult train_maml(const Dataset& dataset, const BatchLossFn& loss_fn,
                       ParamSet& params, const MamlConfig& config,
                       const Dataset* dev = nullptr);

void write_train_log_jsonl(const std::string& path,
                           const std::vector<EpochRecord>& history);

}  // namespace kgen
