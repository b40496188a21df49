#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace kgen {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense 64-bit float tensor. Copies are cheap handles sharing the same
// storage; gradients accumulate into the shared buffer, which is what lets a
// parameter used in several places on a tape collect all its contributions.
// Shape is fixed at construction.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value);
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi,
                        bool requires_grad = true);

  bool defined() const { return s_ != nullptr; }
  const Shape& shape() const { return s_->shape; }
  std::size_t size() const { return s_->data.size(); }
  std::size_t rank() const { return s_->shape.size(); }

  // Constness is shallow, like a shared_ptr: handles freely mutate the shared
  // buffers, which is what backward rules captured by value rely on.
  double* data() const { return s_->data.data(); }
  std::vector<double>& values() const { return s_->data; }

  double item() const;  // value of a 1-element tensor

  bool requires_grad() const { return s_ && s_->requires_grad; }
  void set_requires_grad(bool on) const { s_->requires_grad = on; }

  bool has_grad() const { return s_ && !s_->grad.empty(); }
  double* grad() const { return s_->grad.data(); }
  std::vector<double>& grad_values() const { return s_->grad; }

  void ensure_grad() const;  // allocate zero grad buffer if absent
  void zero_grad() const;

  // Stable identity of the underlying storage, used to key optimizer state
  // and tape node ids.
  const void* storage_id() const { return s_.get(); }

 private:
  struct Storage {
    Shape shape;
    mutable std::vector<double> data;
    mutable std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

// Define-by-run gradient tape. Ops record themselves on the active tape when
// at least one input requires a gradient; recording order is the topological
// order, and backward() replays it once in reverse. A tape can be consumed by
// backward() exactly once; rebuild the tape for the next step.
class Tape {
 public:
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  // Registers one recorded op: input/output node ids plus the backward rule.
  void record(const char* op, const std::vector<Tensor>& inputs, Tensor& output,
              std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded rule in reverse order.
  // Throws TapeError if loss is not scalar, was not produced on this tape, or
  // the tape was already consumed.
  void backward(Tensor& loss);

  bool consumed() const { return consumed_; }
  std::size_t steps() const { return steps_.size(); }

  // Node id of a tensor on this tape; -1 for constants the tape never saw.
  int node_of(const Tensor& t) const;

 private:
  struct Step {
    const char* op;
    std::vector<int> input_ids;
    int output_id;
    std::function<void()> backward;
  };

  int id_of(const Tensor& t, bool create);

  std::vector<Step> steps_;
  std::unordered_map<const void*, int> node_ids_;
  int next_id_ = 0;
  bool consumed_ = false;
};

namespace ops {

// Elementwise, same shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Multiply by a compile-time-known constant.
Tensor scale(const Tensor& a, double c);

// [m,k]x[k,n] -> [m,n]; [m,k]x[k] -> [m]; [k]x[k,n] -> [n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);  // 2-D only

// 1-D inputs, concatenated in order.
Tensor concat(const std::vector<Tensor>& parts);
// Stack equal-length 1-D rows into [m, d].
Tensor stack(const std::vector<Tensor>& rows);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

// Numerically stable softmax. 1-D: over the whole vector. 2-D: per row.
Tensor softmax(const Tensor& x);

// Row lookup into an embedding matrix [V, d].
Tensor embedding_lookup(const Tensor& table, std::size_t row);
// Mean of several rows of an embedding matrix; ids may repeat.
Tensor embed_mean(const Tensor& table, const std::vector<std::size_t>& rows);

// -log softmax(logits)[target], computed via log-sum-exp.
Tensor cross_entropy(const Tensor& logits, std::size_t target);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Inverted-dropout mask: entries are 0 or 1/(1-rate), sampled from rng.
// Constant with respect to the tape; apply with mul().
Tensor dropout_mask(const Shape& shape, double rate, Rng& rng);

}  // namespace ops

// String-dispatched entry point over the fixed supported op set. Ops that
// take an index (embedding-lookup, cross-entropy) or a constant factor
// (scale) read it from a trailing scalar tensor; dropout-mask applies a
// precomputed mask. Throws UnknownOpError for anything else.
Tensor forward_op(const std::string& name, const std::vector<Tensor>& inputs);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_coord = 0;
  bool finite = true;  // false if any analytic/numeric value was non-finite
};

// Central-difference check of d(loss)/d(param). loss_fn must rebuild the loss
// from current parameter values (deterministically; dropout off) and is
// evaluated with no active tape for the numeric side. Reported error is
// max over coordinates of |analytic - numeric| / max(1, |analytic|).
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           Tensor& param, double h);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update of theta in place.
void adam_step(AdamState& state, Tensor& theta, const Tensor& grad);
// Same, reading the gradient accumulated on theta itself.
void adam_step(AdamState& state, Tensor& theta);

// Ordered, named collection of trainable tensors. The canonical owner of a
// model's parameters; checkpoints, optimizers and the training loops all work
// against this.
class ParamSet {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const;

  std::size_t size() const { return items_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& tensor(std::size_t i) { return items_[i]; }
  const Tensor& tensor(std::size_t i) const { return items_[i]; }

  void zero_grads();
  ParamSet deep_copy() const;

  // Copies of current grads, zeros where a grad was never allocated.
  std::vector<std::vector<double>> grads() const;
  // theta -= lr * g
  void apply_sgd(const std::vector<std::vector<double>>& g, double lr);
  // Install g as the accumulated grads (replacing current contents).
  void set_grads(const std::vector<std::vector<double>>& g);

  // FNV-1a over the raw value bits; used to assert bit-level invariance.
  std::uint64_t value_checksum() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

// g = ca * a + cb * b, elementwise over matching nested vectors.
std::vector<std::vector<double>> combine_grads(
    double ca, const std::vector<std::vector<double>>& a, double cb,
    const std::vector<std::vector<double>>& b);

// Adam over every tensor of a ParamSet, state keyed by storage identity.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr) : lr_(lr) {}

  // Updates every parameter from its accumulated grad, then zeroes grads.
  void step(ParamSet& params);

 private:
  double lr_;
  std::unordered_map<const void*, AdamState> states_;
};

}  // namespace kgen
