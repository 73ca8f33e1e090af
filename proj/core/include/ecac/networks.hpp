#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecac/array.hpp"
#include "ecac/autodiff.hpp"
#include "ecac/gaussian.hpp"

namespace ecac {

// Fully connected net: relu between layers, linear output.
// weights[i] is [sizes[i], sizes[i+1]], biases[i] is [sizes[i+1]].
struct MlpParams {
  std::vector<Array> weights;
  std::vector<Array> biases;

  std::vector<std::size_t> layer_sizes() const;
  std::size_t parameter_count() const;

  // Blocks in the fixed order w0, b0, w1, b1, ...
  std::vector<Array*> blocks();
  std::vector<const Array*> blocks() const;
  std::vector<std::string> block_names() const;
  std::vector<Shape> block_shapes() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

std::size_t mlp_parameter_count(std::span<const std::size_t> sizes);

// Glorot-uniform weights, zero biases; deterministic in `seed`.
MlpParams init_mlp(std::span<const std::size_t> sizes, std::uint64_t seed);

struct MlpVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;

  // Same order as MlpParams::blocks().
  std::vector<ad::Var> blocks() const;
};

// Trainable bindings become tape parameters; frozen ones become constants.
MlpVars bind(ad::Tape& tape, const MlpParams& params, bool trainable);

ad::Var mlp_forward(const MlpVars& net, ad::Var input);

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

// Output layer holds 2d units: the first d are the mean, the rest the raw log_std
// which is clamped into [kLogStdMin, kLogStdMax].
gaussian::Vars forward_policy(const MlpVars& net, ad::Var states);
// `states` may be [obs] (single) or [n, obs]; the result has matching rank.
DiagGaussian forward_policy(const MlpParams& params, const Array& states);

// Input is the state followed by the action. Returns [n].
ad::Var forward_q(const MlpVars& net, ad::Var states, ad::Var actions);
std::vector<double> forward_q(const MlpParams& params, const Array& states, const Array& actions);

// target <- tau * online + (1 - tau) * target
void polyak_update(MlpParams& target, const MlpParams& online, double tau);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

// Adaptive-moment optimizer over a list of named parameter blocks.
class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig config, std::vector<std::string> names, std::vector<Shape> shapes);
  static Adam for_mlp(AdamConfig config, const MlpParams& params, const std::string& prefix);

  // One descent step. Throws NumericError naming the block if a gradient is not finite;
  // in that case nothing is modified.
  void step(std::span<Array* const> params, std::span<const Array> grads);
  void step(MlpParams& params, std::span<const Array> grads);

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::uint64_t step_count() const { return step_count_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Array>& first_moments() const { return m_; }
  const std::vector<Array>& second_moments() const { return v_; }

  // Restores moments and step count (checkpoint load).
  void restore(std::vector<Array> m, std::vector<Array> v, std::uint64_t step_count);

  friend bool operator==(const Adam&, const Adam&) = default;

 private:
  AdamConfig config_;
  std::vector<std::string> names_;
  std::vector<Array> m_;
  std::vector<Array> v_;
  std::uint64_t step_count_ = 0;
};

}  // namespace ecac
