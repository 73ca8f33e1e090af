#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ecac/array.hpp"

namespace ecac::ad {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Array& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node
// index order is a topological order and backward() simply walks it in reverse.
// Not thread-safe; use one tape per thread.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf with no gradient.
  Var constant(Array value);
  // Leaf whose gradient is reported by backward().
  Var parameter(Array value);

  const Array& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  // Computes d(output)/d(node) for every node that requires a gradient.
  // The output must hold exactly one element. Gradients from a previous call
  // are discarded, so calling twice yields identical results.
  void backward(Var output);

  // Gradient from the last backward(). A parameter the output does not depend
  // on gets an all-zero array.
  Array grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

  // Used by primitive implementations.
  Var record(Array value, std::vector<std::size_t> parents, BackwardFn backward);
  const Array& grad_ref(std::size_t id) const { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Adds into the gradient of `id`, allocating zeros on first touch.
  double* grad_accumulator(std::size_t id);
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }

 private:
  struct Node {
    Array value;
    Array grad;
    bool grad_allocated = false;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Elementwise binary ops accept equal shapes, or one operand whose shape equals
// the other's shape with the leading (batch) dimension removed.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// Adjoint goes entirely to the smaller operand; ties go to `a`.
Var minimum(Var a, Var b);

// [n, k] x [k, m] -> [n, m]
Var matmul(Var a, Var b);

Var relu(Var x);  // subgradient at 0 is 0
Var tanh(Var x);
Var exp(Var x);
Var log(Var x);
Var square(Var x);
Var abs(Var x);  // subgradient at 0 is 0
Var scale(Var x, double factor);
Var add_scalar(Var x, double offset);
// Clamps into [lo, hi]; gradient passes only where the input is strictly inside.
Var clamp(Var x, double lo, double hi);

Var sum(Var x);   // -> shape []
Var mean(Var x);  // -> shape []
// [n, d] -> [n]
Var row_sum(Var x);

// [n, a] ++ [n, b] -> [n, a + b]
Var concat_cols(Var a, Var b);
// Columns [begin, begin + count) of a rank-2 array.
Var slice_cols(Var x, std::size_t begin, std::size_t count);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var x) { return scale(x, s); }
inline Var operator*(Var x, double s) { return scale(x, s); }
inline Var operator-(Var x) { return scale(x, -1.0); }

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// `f` builds a scalar on the supplied tape from the parameter leaf it is given.
double finite_difference_check(const std::function<Var(Tape&, Var)>& f, const Array& params,
                               double h);

}  // namespace ecac::ad
