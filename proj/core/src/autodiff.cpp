#include "ecac/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "ecac/errors.hpp"

namespace ecac::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

#if defined(__GLIBC__)
// Activation and gradient buffers are large and short-lived. Serving them from
// the heap instead of fresh mmap regions avoids a page-fault storm per update.
const bool kHeapTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  return true;
}();
#endif

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw Error("variable is not bound to a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw Error("operands live on different tapes");
  return tape_of(a);
}

enum class Broadcast { kNone, kSecond, kFirst };

// The broadcast operand matches the full operand's shape minus the leading dimension.
Broadcast resolve_broadcast(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::kNone;
  if (!a.empty() && Shape(a.begin() + 1, a.end()) == b) return Broadcast::kSecond;
  if (!b.empty() && Shape(b.begin() + 1, b.end()) == a) return Broadcast::kFirst;
  throw ShapeError(std::string(op) + ": shape " + shape_to_string(a) + " vs " + shape_to_string(b));
}

struct Layout {
  std::size_t outer;
  std::size_t inner;
  std::size_t stride_a;  // 0 when `a` is broadcast over the leading dimension
  std::size_t stride_b;
};

Layout layout_for(Broadcast mode, const Array& a, const Array& b) {
  switch (mode) {
    case Broadcast::kSecond:
      return {a.size() / b.size(), b.size(), b.size(), 0};
    case Broadcast::kFirst:
      return {b.size() / a.size(), a.size(), 0, a.size()};
    case Broadcast::kNone:
      break;
  }
  return {1, a.size(), a.size(), a.size()};
}

// Applies f elementwise with leading-dimension broadcasting; returns the result and mode.
template <typename F>
Array binary_forward(const char* op, const Array& a, const Array& b, Broadcast& mode, F f) {
  mode = resolve_broadcast(op, a.shape(), b.shape());
  const Array& big = (mode == Broadcast::kFirst) ? b : a;
  const Layout l = layout_for(mode, a, b);
  std::vector<double> out(big.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    const double* __restrict pa = a.data() + (l.stride_a ? o * l.inner : 0);
    const double* __restrict pb = b.data() + (l.stride_b ? o * l.inner : 0);
    double* __restrict po = out.data() + o * l.inner;
    for (std::size_t i = 0; i < l.inner; ++i) po[i] = f(pa[i], pb[i]);
  }
  return Array(big.shape(), std::move(out));
}

// Accumulates da = g * dfa(a, b) and db = g * dfb(a, b), reducing over the
// batch dimension for a broadcast operand.
template <typename Da, typename Db>
void binary_backward(Tape& t, std::size_t self, Broadcast mode, Da dfa, Db dfb) {
  const auto& parents = t.parents(self);
  const std::size_t ia = parents[0];
  const std::size_t ib = parents[1];
  const Array& g = t.grad_ref(self);
  const Array& a = t.value(Var{&t, ia});
  const Array& b = t.value(Var{&t, ib});
  const Layout l = layout_for(mode, a, b);
  const bool want_a = t.needs_grad(ia);
  const bool want_b = t.needs_grad(ib);
  double* ga = want_a ? t.grad_accumulator(ia) : nullptr;
  double* gb = want_b ? t.grad_accumulator(ib) : nullptr;
  for (std::size_t o = 0; o < l.outer; ++o) {
    const std::size_t off_a = l.stride_a ? o * l.inner : 0;
    const std::size_t off_b = l.stride_b ? o * l.inner : 0;
    const double* __restrict pa = a.data() + off_a;
    const double* __restrict pb = b.data() + off_b;
    const double* __restrict pg = g.data() + o * l.inner;
    if (want_a) {
      double* __restrict qa = ga + off_a;
      for (std::size_t i = 0; i < l.inner; ++i) qa[i] += pg[i] * dfa(pa[i], pb[i]);
    }
    if (want_b) {
      double* __restrict qb = gb + off_b;
      for (std::size_t i = 0; i < l.inner; ++i) qb[i] += pg[i] * dfb(pa[i], pb[i]);
    }
  }
}

template <typename F>
Array unary_forward(const Array& x, F f) {
  std::vector<double> out(x.size());
  const double* __restrict px = x.data();
  double* __restrict po = out.data();
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) po[i] = f(px[i]);
  return Array(x.shape(), std::move(out));
}

// dfx(x, y) gives dy/dx from the input value and the saved output value.
template <typename F, typename D>
Var unary(Var x, F f, D dfx) {
  Tape& t = tape_of(x);
  return t.record(unary_forward(x.value(), f), {x.id}, [dfx](Tape& tp, std::size_t self) {
    const std::size_t ix = tp.parents(self)[0];
    const std::size_t n = tp.grad_ref(self).size();
    double* __restrict gx = tp.grad_accumulator(ix);
    const double* __restrict g = tp.grad_ref(self).data();
    const double* __restrict xv = tp.value(Var{&tp, ix}).data();
    const double* __restrict yv = tp.value(Var{&tp, self}).data();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * dfx(xv[i], yv[i]);
  });
}

}  // namespace

const Array& Var::value() const { return tape_of(*this).value(*this); }

Var Tape::constant(Array value) {
  if (!value.all_finite()) throw NumericError("constant leaf holds non-finite values");
  nodes_.push_back(Node{std::move(value), Array{}, false, false, {}, {}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(Array value) {
  if (!value.all_finite()) throw NumericError("parameter leaf holds non-finite values");
  nodes_.push_back(Node{std::move(value), Array{}, false, true, {}, {}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Array value, std::vector<std::size_t> parents, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError("numeric overflow: non-finite result of shape " + shape_to_string(value.shape()));
  }
  bool tracked = false;
  for (auto p : parents) tracked = tracked || nodes_[p].requires_grad;
  Node node{std::move(value), Array{}, false, tracked, std::move(parents), {}};
  if (tracked) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

double* Tape::grad_accumulator(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad_allocated) {
    n.grad = Array::zeros(n.value.shape());
    n.grad_allocated = true;
  }
  return n.grad.data();
}

void Tape::backward(Var output) {
  if (output.tape != this) throw Error("backward: output belongs to another tape");
  if (nodes_[output.id].value.size() != 1) {
    throw ShapeError("backward needs a scalar output, got shape " +
                     shape_to_string(nodes_[output.id].value.shape()));
  }
  for (auto& n : nodes_) {
    n.grad_allocated = false;
    n.grad = Array{};
  }
  if (!nodes_[output.id].requires_grad) return;
  grad_accumulator(output.id)[0] = 1.0;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.grad_allocated && n.backward) n.backward(*this, i);
  }
}

Array Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad_allocated) return n.grad;
  return Array::zeros(n.value.shape());
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Broadcast mode;
  auto out = binary_forward("add", a.value(), b.value(), mode, [](double x, double y) { return x + y; });
  return t.record(std::move(out), {a.id, b.id}, [mode](Tape& tp, std::size_t self) {
    binary_backward(
        tp, self, mode, [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Broadcast mode;
  auto out = binary_forward("subtract", a.value(), b.value(), mode, [](double x, double y) { return x - y; });
  return t.record(std::move(out), {a.id, b.id}, [mode](Tape& tp, std::size_t self) {
    binary_backward(
        tp, self, mode, [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Broadcast mode;
  auto out = binary_forward("multiply", a.value(), b.value(), mode, [](double x, double y) { return x * y; });
  return t.record(std::move(out), {a.id, b.id}, [mode](Tape& tp, std::size_t self) {
    binary_backward(
        tp, self, mode, [](double, double y) { return y; }, [](double x, double) { return x; });
  });
}

Var minimum(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Broadcast mode;
  auto out = binary_forward("minimum", a.value(), b.value(), mode,
                            [](double x, double y) { return y < x ? y : x; });
  return t.record(std::move(out), {a.id, b.id}, [mode](Tape& tp, std::size_t self) {
    binary_backward(
        tp, self, mode, [](double x, double y) { return y < x ? 0.0 : 1.0; },
        [](double x, double y) { return y < x ? 1.0 : 0.0; });
  });
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw ShapeError("matmul: shape " + shape_to_string(av.shape()) + " vs " + shape_to_string(bv.shape()));
  }
  const auto n = av.dim(0), k = av.dim(1), m = bv.dim(1);
  Array out = Array::zeros({n, m});
  MatrixMap(out.data(), n, m).noalias() = ConstMatrixMap(av.data(), n, k) * ConstMatrixMap(bv.data(), k, m);
  return t.record(std::move(out), {a.id, b.id}, [n, k, m](Tape& tp, std::size_t self) {
    const std::size_t ia = tp.parents(self)[0];
    const std::size_t ib = tp.parents(self)[1];
    ConstMatrixMap g(tp.grad_ref(self).data(), n, m);
    if (tp.needs_grad(ia)) {
      MatrixMap(tp.grad_accumulator(ia), n, k).noalias() +=
          g * ConstMatrixMap(tp.value(Var{&tp, ib}).data(), k, m).transpose();
    }
    if (tp.needs_grad(ib)) {
      MatrixMap(tp.grad_accumulator(ib), k, m).noalias() +=
          ConstMatrixMap(tp.value(Var{&tp, ia}).data(), n, k).transpose() * g;
    }
  });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var square(Var x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var abs(Var x) {
  return unary(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var scale(Var x, double factor) {
  return unary(
      x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Var add_scalar(Var x, double offset) {
  return unary(
      x, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Var clamp(Var x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return t.record(Array::scalar(s), {x.id}, [](Tape& tp, std::size_t self) {
    const std::size_t ix = tp.parents(self)[0];
    const double g = tp.grad_ref(self)[0];
    double* gx = tp.grad_accumulator(ix);
    const std::size_t n = tp.value(Var{&tp, ix}).size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  Tape& t = tape_of(x);
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return t.record(Array::scalar(s / n), {x.id}, [n](Tape& tp, std::size_t self) {
    const std::size_t ix = tp.parents(self)[0];
    const double g = tp.grad_ref(self)[0] / n;
    double* gx = tp.grad_accumulator(ix);
    const std::size_t count = tp.value(Var{&tp, ix}).size();
    for (std::size_t i = 0; i < count; ++i) gx[i] += g;
  });
}

Var row_sum(Var x) {
  Tape& t = tape_of(x);
  const Array& xv = x.value();
  if (xv.rank() != 2) throw ShapeError("row_sum needs rank 2, got " + shape_to_string(xv.shape()));
  const auto n = xv.dim(0), d = xv.dim(1);
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) out[r] += xv[r * d + c];
  }
  return t.record(Array({n}, std::move(out)), {x.id}, [n, d](Tape& tp, std::size_t self) {
    const std::size_t ix = tp.parents(self)[0];
    const Array& g = tp.grad_ref(self);
    double* gx = tp.grad_accumulator(ix);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += g[r];
    }
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(0) != bv.dim(0)) {
    throw ShapeError("concat_cols: shape " + shape_to_string(av.shape()) + " vs " + shape_to_string(bv.shape()));
  }
  const auto n = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
  std::vector<double> out(n * (ca + cb));
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(av.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(bv.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  return t.record(Array({n, ca + cb}, std::move(out)), {a.id, b.id}, [n, ca, cb](Tape& tp, std::size_t self) {
    const std::size_t ia = tp.parents(self)[0];
    const std::size_t ib = tp.parents(self)[1];
    const Array& g = tp.grad_ref(self);
    if (tp.needs_grad(ia)) {
      double* ga = tp.grad_accumulator(ia);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < ca; ++c) ga[r * ca + c] += g[r * (ca + cb) + c];
      }
    }
    if (tp.needs_grad(ib)) {
      double* gb = tp.grad_accumulator(ib);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < cb; ++c) gb[r * cb + c] += g[r * (ca + cb) + ca + c];
      }
    }
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  Tape& t = tape_of(x);
  const Array& xv = x.value();
  if (xv.rank() != 2 || count == 0 || begin + count > xv.dim(1)) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") of shape " + shape_to_string(xv.shape()));
  }
  const auto n = xv.dim(0), d = xv.dim(1);
  std::vector<double> out(n * count);
  for (std::size_t r = 0; r < n; ++r) std::copy_n(xv.data() + r * d + begin, count, out.data() + r * count);
  return t.record(Array({n, count}, std::move(out)), {x.id}, [n, d, begin, count](Tape& tp, std::size_t self) {
    const std::size_t ix = tp.parents(self)[0];
    const Array& g = tp.grad_ref(self);
    double* gx = tp.grad_accumulator(ix);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < count; ++c) gx[r * d + begin + c] += g[r * count + c];
    }
  });
}

double finite_difference_check(const std::function<Var(Tape&, Var)>& f, const Array& params, double h) {
  if (!(h > 0.0)) throw Error("finite_difference_check: step must be positive");
  Array analytic;
  {
    Tape tape;
    Var p = tape.parameter(params);
    Var out = f(tape, p);
    tape.backward(out);
    analytic = tape.grad(p);
  }
  auto eval_at = [&](const Array& x) {
    Tape tape;
    return f(tape, tape.constant(x)).value().item();
  };
  double worst = 0.0;
  Array probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double x0 = params[i];
    probe[i] = x0 + h;
    const double up = eval_at(probe);
    probe[i] = x0 - h;
    const double down = eval_at(probe);
    probe[i] = x0;
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace ecac::ad
