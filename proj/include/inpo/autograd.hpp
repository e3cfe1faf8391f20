#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "inpo/tensor.hpp"

namespace inpo::ag {

// Handle into a Tape. Valid only for the tape that produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode gradient tape over dense tensors. Nodes are recorded in
// construction order, which is a topological order; backward() walks the
// tape once in reverse and accumulates gradients additively into every
// node that needs one. Single-threaded.
class Tape {
 public:
  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var scalar(real_t v) { return constant(Tensor::scalar_of(v)); }

  // Marks a node so backward() retains its gradient even when no upstream
  // leaf requires one. Call before building ops that consume the node.
  void keep_grad(Var v);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var div(Var a, Var b);  // elementwise
  Var add_scalar(Var a, real_t c);
  Var mul_scalar(Var a, real_t c);
  Var neg(Var a) { return mul_scalar(a, -1); }

  Var relu(Var a);     // subgradient 0 at 0
  Var sigmoid(Var a);
  Var log(Var a);      // throws NumericError on non-positive input
  Var exp(Var a);
  Var pow_scalar(Var a, real_t p);  // positive base; exp(p*log a)
  Var clamp(Var a, real_t lo, real_t hi);  // zero gradient where clamped

  Var sum(Var a);   // 1x1
  Var mean(Var a);  // 1x1
  Var col_sum(Var a);  // 1 x cols

  Var gather_rows(Var a, std::vector<int> idx);
  Var scatter_add_rows(Var a, std::vector<int> idx, std::size_t out_rows);
  Var scale_rows(Var a, std::vector<real_t> weights);
  Var row_dot(Var a, Var b);  // [n x d], [n x d] -> [n x 1]
  Var concat_rows(Var a, Var b);
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  Var mul_const(Var a, Tensor c);  // elementwise by a constant tensor

  // Backward from a scalar loss. Throws ContractError on non-scalar input.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  // Gradient populated by the last backward(). Throws if the node was not
  // marked as needing a gradient.
  const Tensor& grad(Var v) const;
  bool has_grad(Var v) const;

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    bool grad_live = false;  // grad allocated by the current backward
    std::function<void(Tape&, Node&)> pull;  // pushes grad into parents
  };

  Var push(Tensor value, bool needs_grad, std::function<void(Tape&, Node&)> pull);
  Node& node(Var v);
  const Tensor& val(Var v) const { return nodes_[v.id].value; }
  // Accumulate g into parent p's gradient if p needs one.
  void accum(Var p, const Tensor& g);
  void accum_scaled(Var p, const Tensor& g, real_t c);
  void check(const Tensor& t, const char* op) const;

  std::vector<Node> nodes_;
  bool check_finite_;
};

// Central finite differences against backward(), entrywise. Points where
// the two one-sided differences disagree (e.g. a relu kink inside the
// epsilon window) are excluded and counted instead of failed.
struct FdReport {
  double max_rel_error = 0;
  int checked = 0;
  int excluded = 0;
};

using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

FdReport finite_difference_check(const LossBuilder& build,
                                 const std::vector<Tensor>& params,
                                 double epsilon);

}  // namespace inpo::ag
