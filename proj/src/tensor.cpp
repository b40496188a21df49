#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kgen {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : s_(std::make_shared<Storage>()) {
  s_->shape = std::move(shape);
  s_->data.assign(shape_numel(s_->shape), fill);
  s_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : s_(std::make_shared<Storage>()) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor: " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  s_->shape = std::move(shape);
  s_->data = std::move(values);
  s_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi,
                       bool requires_grad) {
  Tensor t(std::move(shape), 0.0, requires_grad);
  for (double& x : t.values()) x = rng.uniform(lo, hi);
  return t;
}

double Tensor::item() const {
  if (!s_ || s_->data.size() != 1) {
    throw ShapeError("item: tensor " + (s_ ? shape_str(s_->shape) : "[]") +
                     " is not a scalar");
  }
  return s_->data[0];
}

void Tensor::ensure_grad() const {
  if (s_->grad.empty()) s_->grad.assign(s_->data.size(), 0.0);
}

void Tensor::zero_grad() const { s_->grad.assign(s_->data.size(), 0.0); }

// ---------------------------------------------------------------------------
// Tape

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Scope::Scope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

int Tape::id_of(const Tensor& t, bool create) {
  auto it = node_ids_.find(t.storage_id());
  if (it != node_ids_.end()) return it->second;
  if (!create) return -1;
  int id = next_id_++;
  node_ids_.emplace(t.storage_id(), id);
  return id;
}

int Tape::node_of(const Tensor& t) const {
  auto it = node_ids_.find(t.storage_id());
  return it == node_ids_.end() ? -1 : it->second;
}

void Tape::record(const char* op, const std::vector<Tensor>& inputs,
                  Tensor& output, std::function<void()> backward) {
  if (consumed_) throw TapeError(std::string(op) + ": recording on a consumed tape");
  Step step;
  step.op = op;
  step.input_ids.reserve(inputs.size());
  for (const Tensor& in : inputs) {
    step.input_ids.push_back(id_of(in, true));
    if (in.requires_grad()) in.ensure_grad();
  }
  output.set_requires_grad(true);
  output.ensure_grad();
  step.output_id = id_of(output, true);
  step.backward = std::move(backward);
  steps_.push_back(std::move(step));
}

void Tape::backward(Tensor& loss) {
  if (consumed_) throw TapeError("backward: tape already consumed");
  if (loss.size() != 1) {
    throw TapeError("backward: loss has shape " + shape_str(loss.shape()) +
                    ", expected a scalar");
  }
  if (node_of(loss) < 0) {
    throw TapeError("backward: loss was not produced on this tape");
  }
  loss.ensure_grad();
  loss.grad()[0] = 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->backward();
  consumed_ = true;
}

// ---------------------------------------------------------------------------
// Op helpers

namespace {

bool tracking(const std::vector<Tensor>& inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

void maybe_record(const char* op, const std::vector<Tensor>& inputs,
                  Tensor& out, std::function<void()> backward) {
  if (tracking(inputs)) Tape::active()->record(op, inputs, out, std::move(backward));
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void softmax_fill(const double* x, double* y, std::size_t n) {
  double mx = x[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - mx);
    z += y[i];
  }
  for (std::size_t i = 0; i < n; ++i) y[i] /= z;
}

}  // namespace

namespace ops {

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out(a.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  maybe_record("add", {a, b}, out, [a, b, out]() mutable {
    const std::size_t m = out.size();
    if (a.requires_grad())
      for (std::size_t i = 0; i < m; ++i) a.grad()[i] += out.grad()[i];
    if (b.requires_grad())
      for (std::size_t i = 0; i < m; ++i) b.grad()[i] += out.grad()[i];
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out(a.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  maybe_record("sub", {a, b}, out, [a, b, out]() mutable {
    const std::size_t m = out.size();
    if (a.requires_grad())
      for (std::size_t i = 0; i < m; ++i) a.grad()[i] += out.grad()[i];
    if (b.requires_grad())
      for (std::size_t i = 0; i < m; ++i) b.grad()[i] -= out.grad()[i];
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out(a.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  maybe_record("mul", {a, b}, out, [a, b, out]() mutable {
    const std::size_t m = out.size();
    if (a.requires_grad())
      for (std::size_t i = 0; i < m; ++i) a.grad()[i] += out.grad()[i] * b.data()[i];
    if (b.requires_grad())
      for (std::size_t i = 0; i < m; ++i) b.grad()[i] += out.grad()[i] * a.data()[i];
  });
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out(a.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * c;
  maybe_record("scale", {a}, out, [a, out, c]() mutable {
    if (!a.requires_grad()) return;
    const std::size_t m = out.size();
    for (std::size_t i = 0; i < m; ++i) a.grad()[i] += out.grad()[i] * c;
  });
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const bool a_vec = a.rank() == 1;
  const bool b_vec = b.rank() == 1;
  std::size_t m, k, n;
  if (!a_vec && !b_vec && a.rank() == 2 && b.rank() == 2) {
    m = a.shape()[0];
    k = a.shape()[1];
    n = b.shape()[1];
    if (b.shape()[0] != k)
      throw ShapeError("matmul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  } else if (!a_vec && b_vec && a.rank() == 2) {
    m = a.shape()[0];
    k = a.shape()[1];
    n = 1;
    if (b.shape()[0] != k)
      throw ShapeError("matmul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  } else if (a_vec && !b_vec && b.rank() == 2) {
    m = 1;
    k = a.shape()[0];
    n = b.shape()[1];
    if (b.shape()[0] != k)
      throw ShapeError("matmul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  } else {
    throw ShapeError("matmul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }

  Shape out_shape;
  if (!a_vec && !b_vec) out_shape = {m, n};
  else if (b_vec) out_shape = {m};
  else out_shape = {n};

  Tensor out(out_shape);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) pc[i * n + j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }

  maybe_record("matmul", {a, b}, out, [a, b, out, m, k, n]() mutable {
    const double* g = out.grad();
    if (a.requires_grad()) {
      double* ga = a.grad();
      const double* pb2 = b.data();
      // dA = dC * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = g + i * n;
          const double* brow = pb2 + p * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
    }
    if (b.requires_grad()) {
      double* gb = b.grad();
      const double* pa2 = a.data();
      // dB = A^T * dC
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < m; ++i) {
          const double av = pa2[i * k + p];
          if (av == 0.0) continue;
          const double* grow = g + i * n;
          double* brow = gb + p * n;
          for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
        }
    }
  });
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: " + shape_str(a.shape()) + " is not 2-D");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data()[j * m + i] = a.data()[i * n + j];
  maybe_record("transpose", {a}, out, [a, out, m, n]() mutable {
    if (!a.requires_grad()) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) a.grad()[i * n + j] += out.grad()[j * m + i];
  });
  return out;
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 1) throw ShapeError("concat: " + shape_str(p.shape()) + " is not 1-D");
    total += p.size();
  }
  Tensor out({total});
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data(), p.data() + p.size(), out.data() + off);
    off += p.size();
  }
  maybe_record("concat", parts, out, [parts, out]() mutable {
    std::size_t o = 0;
    for (const Tensor& p : parts) {
      if (p.requires_grad())
        for (std::size_t i = 0; i < p.size(); ++i) p.grad()[i] += out.grad()[o + i];
      o += p.size();
    }
  });
  return out;
}

Tensor stack(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ShapeError("stack: no inputs");
  const std::size_t d = rows[0].size();
  for (const Tensor& r : rows) {
    if (r.rank() != 1 || r.size() != d)
      throw ShapeError("stack: " + shape_str(r.shape()) + " vs expected [" +
                       std::to_string(d) + "]");
  }
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].data(), rows[i].data() + d, out.data() + i * d);
  maybe_record("stack", rows, out, [rows, out, d]() mutable {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Tensor& r = rows[i];
      if (r.requires_grad())
        for (std::size_t j = 0; j < d; ++j) r.grad()[j] += out.grad()[i * d + j];
    }
  });
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x.data()[i];
    out.data()[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                           : std::exp(v) / (1.0 + std::exp(v));
  }
  maybe_record("sigmoid", {x}, out, [x, out]() mutable {
    if (!x.requires_grad()) return;
    const std::size_t m = out.size();
    for (std::size_t i = 0; i < m; ++i) {
      const double y = out.data()[i];
      x.grad()[i] += out.grad()[i] * y * (1.0 - y);
    }
  });
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::tanh(x.data()[i]);
  maybe_record("tanh", {x}, out, [x, out]() mutable {
    if (!x.requires_grad()) return;
    const std::size_t m = out.size();
    for (std::size_t i = 0; i < m; ++i) {
      const double y = out.data()[i];
      x.grad()[i] += out.grad()[i] * (1.0 - y * y);
    }
  });
  return out;
}

Tensor softmax(const Tensor& x) {
  if (x.rank() != 1 && x.rank() != 2)
    throw ShapeError("softmax: " + shape_str(x.shape()) + " is not 1-D or 2-D");
  Tensor out(x.shape());
  const std::size_t cols = x.rank() == 1 ? x.size() : x.shape()[1];
  const std::size_t rows = x.size() / cols;
  for (std::size_t r = 0; r < rows; ++r)
    softmax_fill(x.data() + r * cols, out.data() + r * cols, cols);
  maybe_record("softmax", {x}, out, [x, out, rows, cols]() mutable {
    if (!x.requires_grad()) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = out.data() + r * cols;
      const double* g = out.grad() + r * cols;
      double dot = 0.0;
      for (std::size_t i = 0; i < cols; ++i) dot += y[i] * g[i];
      double* gx = x.grad() + r * cols;
      for (std::size_t i = 0; i < cols; ++i) gx[i] += y[i] * (g[i] - dot);
    }
  });
  return out;
}

Tensor embedding_lookup(const Tensor& table, std::size_t row) {
  if (table.rank() != 2)
    throw ShapeError("embedding-lookup: table " + shape_str(table.shape()) + " is not 2-D");
  const std::size_t v = table.shape()[0], d = table.shape()[1];
  if (row >= v)
    throw ShapeError("embedding-lookup: row " + std::to_string(row) +
                     " out of range for " + shape_str(table.shape()));
  Tensor out({d});
  std::copy(table.data() + row * d, table.data() + (row + 1) * d, out.data());
  maybe_record("embedding-lookup", {table}, out, [table, out, row, d]() mutable {
    if (!table.requires_grad()) return;
    for (std::size_t j = 0; j < d; ++j) table.grad()[row * d + j] += out.grad()[j];
  });
  return out;
}

Tensor embed_mean(const Tensor& table, const std::vector<std::size_t>& rows) {
  if (table.rank() != 2)
    throw ShapeError("embed-mean: table " + shape_str(table.shape()) + " is not 2-D");
  if (rows.empty()) throw ShapeError("embed-mean: no rows");
  const std::size_t v = table.shape()[0], d = table.shape()[1];
  for (std::size_t r : rows)
    if (r >= v)
      throw ShapeError("embed-mean: row " + std::to_string(r) +
                       " out of range for " + shape_str(table.shape()));
  Tensor out({d});
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (std::size_t r : rows)
    for (std::size_t j = 0; j < d; ++j) out.data()[j] += table.data()[r * d + j];
  for (std::size_t j = 0; j < d; ++j) out.data()[j] *= inv;
  maybe_record("embed-mean", {table}, out, [table, out, rows, d, inv]() mutable {
    if (!table.requires_grad()) return;
    for (std::size_t r : rows)
      for (std::size_t j = 0; j < d; ++j)
        table.grad()[r * d + j] += out.grad()[j] * inv;
  });
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
  if (logits.rank() != 1)
    throw ShapeError("cross-entropy: logits " + shape_str(logits.shape()) + " is not 1-D");
  const std::size_t n = logits.size();
  if (target >= n)
    throw ShapeError("cross-entropy: target " + std::to_string(target) +
                     " out of range for " + shape_str(logits.shape()));
  double mx = logits.data()[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits.data()[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(logits.data()[i] - mx);
  const double lse = mx + std::log(z);
  Tensor out = Tensor::scalar(lse - logits.data()[target]);
  maybe_record("cross-entropy", {logits}, out, [logits, out, target]() mutable {
    if (!logits.requires_grad()) return;
    const std::size_t m = logits.size();
    std::vector<double> p(m);
    softmax_fill(logits.data(), p.data(), m);
    const double g = out.grad()[0];
    for (std::size_t i = 0; i < m; ++i)
      logits.grad()[i] += g * (p[i] - (i == target ? 1.0 : 0.0));
  });
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
  Tensor out = Tensor::scalar(acc);
  maybe_record("sum", {x}, out, [x, out]() mutable {
    if (!x.requires_grad()) return;
    const double g = out.grad()[0];
    for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += g;
  });
  return out;
}

Tensor mean(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
  Tensor out = Tensor::scalar(acc * inv);
  maybe_record("mean", {x}, out, [x, out, inv]() mutable {
    if (!x.requires_grad()) return;
    const double g = out.grad()[0] * inv;
    for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += g;
  });
  return out;
}

Tensor dropout_mask(const Shape& shape, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout-mask: rate " + std::to_string(rate) + " outside [0,1)");
  Tensor mask(shape);
  const double keep = 1.0 - rate;
  for (double& x : mask.values()) x = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  return mask;
}

}  // namespace ops

Tensor forward_op(const std::string& name, const std::vector<Tensor>& inputs) {
  auto want = [&](std::size_t n) {
    if (inputs.size() != n)
      throw ShapeError(name + ": expected " + std::to_string(n) + " inputs, got " +
                       std::to_string(inputs.size()));
  };
  if (name == "add") { want(2); return ops::add(inputs[0], inputs[1]); }
  if (name == "sub") { want(2); return ops::sub(inputs[0], inputs[1]); }
  if (name == "mul") { want(2); return ops::mul(inputs[0], inputs[1]); }
  if (name == "matmul") { want(2); return ops::matmul(inputs[0], inputs[1]); }
  if (name == "transpose") { want(1); return ops::transpose(inputs[0]); }
  if (name == "concat") return ops::concat(inputs);
  if (name == "stack") return ops::stack(inputs);
  if (name == "sigmoid") { want(1); return ops::sigmoid(inputs[0]); }
  if (name == "tanh") { want(1); return ops::tanh(inputs[0]); }
  if (name == "softmax") { want(1); return ops::softmax(inputs[0]); }
  if (name == "sum") { want(1); return ops::sum(inputs[0]); }
  if (name == "mean") { want(1); return ops::mean(inputs[0]); }
  if (name == "scale") {
    want(2);
    return ops::scale(inputs[0], inputs[1].item());
  }
  if (name == "embedding-lookup") {
    want(2);
    return ops::embedding_lookup(inputs[0],
                                 static_cast<std::size_t>(inputs[1].item()));
  }
  if (name == "cross-entropy") {
    want(2);
    return ops::cross_entropy(inputs[0],
                              static_cast<std::size_t>(inputs[1].item()));
  }
  if (name == "dropout-mask") {
    // Applies a precomputed mask; see ops::dropout_mask for sampling one.
    want(2);
    return ops::mul(inputs[0], inputs[1]);
  }
  throw UnknownOpError("unknown op: " + name);
}

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           Tensor& param, double h) {
  if (h <= 0.0) throw ConfigError("grad_check: h must be > 0");

  param.zero_grad();
  std::vector<double> analytic;
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor loss = loss_fn();
    tape.backward(loss);
    analytic.assign(param.grad(), param.grad() + param.size());
  }

  GradCheckReport report;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param.data()[i];
    param.data()[i] = saved + h;
    const double up = loss_fn().item();
    param.data()[i] = saved - h;
    const double down = loss_fn().item();
    param.data()[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) {
      report.finite = false;
      report.worst_coord = i;
      report.max_rel_error = std::numeric_limits<double>::infinity();
      return report;
    }
    const double err =
        std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_coord = i;
    }
  }
  return report;
}

void adam_step(AdamState& state, Tensor& theta, const Tensor& grad) {
  if (grad.shape() != theta.shape())
    throw ShapeError("adam: " + shape_str(theta.shape()) + " vs " +
                     shape_str(grad.shape()));
  const std::size_t n = theta.size();
  if (state.m.size() != n) state.m.assign(n, 0.0);
  if (state.v.size() != n) state.v.assign(n, 0.0);
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad.data()[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    theta.data()[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

void adam_step(AdamState& state, Tensor& theta) {
  theta.ensure_grad();
  Tensor g(theta.shape(),
           std::vector<double>(theta.grad(), theta.grad() + theta.size()));
  adam_step(state, theta, g);
}

// ---------------------------------------------------------------------------
// ParamSet

Tensor& ParamSet::add(const std::string& name, Tensor t) {
  if (index_.count(name)) throw ConfigError("param '" + name + "' already exists");
  t.set_requires_grad(true);
  index_[name] = items_.size();
  names_.push_back(name);
  items_.push_back(std::move(t));
  return items_.back();
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no param named '" + name + "'");
  return items_[it->second];
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no param named '" + name + "'");
  return items_[it->second];
}

bool ParamSet::has(const std::string& name) const { return index_.count(name) > 0; }

void ParamSet::zero_grads() {
  for (Tensor& t : items_) t.zero_grad();
}

ParamSet ParamSet::deep_copy() const {
  ParamSet out;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    out.add(names_[i], Tensor(items_[i].shape(), items_[i].values()));
  }
  return out;
}

std::vector<std::vector<double>> ParamSet::grads() const {
  std::vector<std::vector<double>> out;
  out.reserve(items_.size());
  for (const Tensor& t : items_) {
    if (t.has_grad())
      out.emplace_back(t.grad(), t.grad() + t.size());
    else
      out.emplace_back(t.size(), 0.0);
  }
  return out;
}

void ParamSet::apply_sgd(const std::vector<std::vector<double>>& g, double lr) {
  if (g.size() != items_.size())
    throw ShapeError("sgd: " + std::to_string(g.size()) + " grads for " +
                     std::to_string(items_.size()) + " params");
  for (std::size_t i = 0; i < items_.size(); ++i) {
    Tensor& t = items_[i];
    if (g[i].size() != t.size())
      throw ShapeError("sgd: grad size mismatch for '" + names_[i] + "'");
    for (std::size_t j = 0; j < t.size(); ++j) t.data()[j] -= lr * g[i][j];
  }
}

void ParamSet::set_grads(const std::vector<std::vector<double>>& g) {
  if (g.size() != items_.size())
    throw ShapeError("set_grads: " + std::to_string(g.size()) + " grads for " +
                     std::to_string(items_.size()) + " params");
  for (std::size_t i = 0; i < items_.size(); ++i) {
    Tensor& t = items_[i];
    if (g[i].size() != t.size())
      throw ShapeError("set_grads: grad size mismatch for '" + names_[i] + "'");
    t.ensure_grad();
    std::copy(g[i].begin(), g[i].end(), t.grad());
  }
}

std::uint64_t ParamSet::value_checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const Tensor& t : items_)
    mix(t.data(), t.size() * sizeof(double));
  return h;
}

std::vector<std::vector<double>> combine_grads(
    double ca, const std::vector<std::vector<double>>& a, double cb,
    const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) throw ShapeError("combine_grads: block count mismatch");
  std::vector<std::vector<double>> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size())
      throw ShapeError("combine_grads: block size mismatch");
    out[i].resize(a[i].size());
    for (std::size_t j = 0; j < a[i].size(); ++j)
      out[i][j] = ca * a[i][j] + cb * b[i][j];
  }
  return out;
}

void AdamOptimizer::step(ParamSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = params.tensor(i);
    AdamState& st = states_[t.storage_id()];
    if (st.m.empty()) st.lr = lr_;
    adam_step(st, t);
  }
  params.zero_grads();
}

}  // namespace kgen
