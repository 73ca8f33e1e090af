#include "ecac/networks.hpp"

#include <cmath>

#include "ecac/errors.hpp"
#include "ecac/rng.hpp"

namespace ecac {

namespace {

Array as_matrix(const Array& a) {
  if (a.rank() == 2) return a;
  if (a.rank() == 1) return a.reshaped({1, a.size()});
  throw ShapeError("network input must be rank 1 or 2, got " + shape_to_string(a.shape()));
}

void check_same_layout(const char* op, const MlpParams& a, const MlpParams& b) {
  if (a.block_shapes() != b.block_shapes()) {
    throw ShapeError(std::string(op) + ": parameter layouts differ");
  }
}

}  // namespace

std::vector<std::size_t> MlpParams::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (weights.empty()) return sizes;
  sizes.push_back(weights.front().dim(0));
  for (const auto& w : weights) sizes.push_back(w.dim(1));
  return sizes;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto* b : blocks()) n += b->size();
  return n;
}

std::vector<Array*> MlpParams::blocks() {
  std::vector<Array*> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(&weights[i]);
    out.push_back(&biases[i]);
  }
  return out;
}

std::vector<const Array*> MlpParams::blocks() const {
  std::vector<const Array*> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(&weights[i]);
    out.push_back(&biases[i]);
  }
  return out;
}

std::vector<std::string> MlpParams::block_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back("w" + std::to_string(i));
    out.push_back("b" + std::to_string(i));
  }
  return out;
}

std::vector<Shape> MlpParams::block_shapes() const {
  std::vector<Shape> out;
  for (const auto* b : blocks()) out.push_back(b->shape());
  return out;
}

std::vector<ad::Var> MlpVars::blocks() const {
  std::vector<ad::Var> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(weights[i]);
    out.push_back(biases[i]);
  }
  return out;
}

std::size_t mlp_parameter_count(std::span<const std::size_t> sizes) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) n += sizes[i] * sizes[i + 1] + sizes[i + 1];
  return n;
}

MlpParams init_mlp(std::span<const std::size_t> sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw ShapeError("an MLP needs at least an input and an output size");
  for (auto s : sizes) {
    if (s == 0) throw ShapeError("MLP layer sizes must be positive");
  }
  Rng rng(seed);
  MlpParams p;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const auto fan_in = sizes[i], fan_out = sizes[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Array w = Array::zeros({fan_in, fan_out});
    for (auto& v : w.mutable_values()) v = rng.uniform(-limit, limit);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Array::zeros({fan_out}));
  }
  return p;
}

MlpVars bind(ad::Tape& tape, const MlpParams& params, bool trainable) {
  MlpVars vars;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    vars.weights.push_back(trainable ? tape.parameter(params.weights[i]) : tape.constant(params.weights[i]));
    vars.biases.push_back(trainable ? tape.parameter(params.biases[i]) : tape.constant(params.biases[i]));
  }
  return vars;
}

ad::Var mlp_forward(const MlpVars& net, ad::Var input) {
  if (net.weights.empty()) throw ShapeError("empty network");
  ad::Var h = input;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    if (h.value().rank() != 2 || h.value().dim(1) != net.weights[i].value().dim(0)) {
      throw ShapeError("layer " + std::to_string(i) + ": input shape " + shape_to_string(h.value().shape()) +
                       " vs weight shape " + shape_to_string(net.weights[i].value().shape()));
    }
    h = ad::matmul(h, net.weights[i]) + net.biases[i];
    if (i + 1 < net.weights.size()) h = ad::relu(h);
  }
  return h;
}

gaussian::Vars forward_policy(const MlpVars& net, ad::Var states) {
  const ad::Var out = mlp_forward(net, states);
  const std::size_t width = out.value().dim(1);
  if (width % 2 != 0) throw ShapeError("policy output width must be even, got " + std::to_string(width));
  const std::size_t d = width / 2;
  return gaussian::Vars{ad::slice_cols(out, 0, d), ad::clamp(ad::slice_cols(out, d, d), kLogStdMin, kLogStdMax)};
}

DiagGaussian forward_policy(const MlpParams& params, const Array& states) {
  ad::Tape tape;
  const auto vars = bind(tape, params, false);
  const auto dist = forward_policy(vars, tape.constant(as_matrix(states)));
  DiagGaussian out{dist.mean.value(), dist.log_std.value()};
  if (states.rank() == 1) {
    out.mean = out.mean.reshaped({out.mean.size()});
    out.log_std = out.log_std.reshaped({out.log_std.size()});
  }
  return out;
}

ad::Var forward_q(const MlpVars& net, ad::Var states, ad::Var actions) {
  const ad::Var out = mlp_forward(net, ad::concat_cols(states, actions));
  if (out.value().dim(1) != 1) throw ShapeError("Q network must have a single output unit");
  // [n, 1] -> [n]
  return ad::row_sum(out);
}

std::vector<double> forward_q(const MlpParams& params, const Array& states, const Array& actions) {
  ad::Tape tape;
  const auto vars = bind(tape, params, false);
  const auto q = forward_q(vars, tape.constant(as_matrix(states)), tape.constant(as_matrix(actions)));
  return {q.value().values().begin(), q.value().values().end()};
}

void polyak_update(MlpParams& target, const MlpParams& online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error("polyak_update: tau must lie in [0, 1]");
  check_same_layout("polyak_update", target, online);
  auto dst = target.blocks();
  auto src = online.blocks();
  for (std::size_t b = 0; b < dst.size(); ++b) {
    auto t = dst[b]->mutable_values();
    auto o = src[b]->values();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * o[i] + (1.0 - tau) * t[i];
  }
}

Adam::Adam(AdamConfig config, std::vector<std::string> names, std::vector<Shape> shapes)
    : config_(config), names_(std::move(names)) {
  if (names_.size() != shapes.size()) throw Error("Adam: names and shapes differ in length");
  for (auto& s : shapes) {
    m_.push_back(Array::zeros(s));
    v_.push_back(Array::zeros(s));
  }
}

Adam Adam::for_mlp(AdamConfig config, const MlpParams& params, const std::string& prefix) {
  auto names = params.block_names();
  for (auto& n : names) n = prefix + n;
  return Adam(config, std::move(names), params.block_shapes());
}

void Adam::step(std::span<Array* const> params, std::span<const Array> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("Adam: expected " + std::to_string(m_.size()) + " parameter blocks");
  }
  for (std::size_t b = 0; b < m_.size(); ++b) {
    if (params[b]->shape() != m_[b].shape() || grads[b].shape() != m_[b].shape()) {
      throw ShapeError("Adam: block " + names_[b] + " shape " + shape_to_string(params[b]->shape()) + " vs " +
                       shape_to_string(m_[b].shape()));
    }
    if (!grads[b].all_finite()) throw NumericError("non-finite gradient in parameter block " + names_[b]);
  }
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  const double b1 = config_.beta1, b2 = config_.beta2, lr = config_.learning_rate, eps = config_.epsilon;
  for (std::size_t b = 0; b < m_.size(); ++b) {
    double* __restrict p = params[b]->data();
    const double* __restrict g = grads[b].data();
    double* __restrict m = m_[b].data();
    double* __restrict v = v_[b].data();
    const std::size_t n = m_[b].size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
}

void Adam::step(MlpParams& params, std::span<const Array> grads) {
  auto blocks = params.blocks();
  step(blocks, grads);
}

void Adam::restore(std::vector<Array> m, std::vector<Array> v, std::uint64_t step_count) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw ShapeError("Adam::restore: block count mismatch");
  for (std::size_t b = 0; b < m_.size(); ++b) {
    if (m[b].shape() != m_[b].shape() || v[b].shape() != v_[b].shape()) {
      throw ShapeError("Adam::restore: block " + names_[b] + " shape mismatch");
    }
  }
  m_ = std::move(m);
  v_ = std::move(v);
  step_count_ = step_count;
}

}  // namespace ecac
