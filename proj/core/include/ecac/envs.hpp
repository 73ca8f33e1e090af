#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecac/array.hpp"
#include "ecac/rng.hpp"

namespace ecac {

struct EnvSpec {
  std::string name;
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::vector<double> action_low;
  std::vector<double> action_high;
  std::size_t max_episode_steps = 1;
  // |reward| never exceeds this on any step.
  double reward_bound = 0.0;
};

struct StepResult {
  Array observation;
  double reward = 0.0;  // unscaled
  bool terminal = false;
  bool truncated = false;  // time limit reached without a terminal
};

// Seeded, closed-form continuous-control environment.
class Env {
 public:
  explicit Env(EnvSpec spec);
  virtual ~Env() = default;

  const EnvSpec& spec() const { return spec_; }

  Array reset(std::uint64_t seed);
  // Out-of-bound action components are clamped to the action box.
  StepResult step(const Array& action);

  Array clamp_action(const Array& action) const;
  std::size_t elapsed_steps() const { return elapsed_; }
  bool needs_reset() const { return needs_reset_; }

  // Places the environment in the state described by `observation` and starts
  // a fresh episode from there (step counter zeroed).
  void inject_state(const Array& observation);

  virtual Array observation() const = 0;
  // Distance to the goal for goal-reaching tasks.
  virtual std::optional<double> goal_distance() const { return std::nullopt; }
  virtual std::unique_ptr<Env> clone() const = 0;

  // Exact internal state, for checkpointing a run mid-episode.
  virtual std::vector<double> raw_state() const = 0;
  virtual void set_raw_state(std::span<const double> state) = 0;
  void restore_progress(std::size_t elapsed, bool needs_reset);

  // Whether inject_state() is available (all built-ins support it).
  virtual bool supports_state_injection() const { return true; }
  void set_time_limit(std::size_t max_episode_steps);

 protected:
  struct Outcome {
    double reward;
    bool terminal;
  };

  virtual void sample_initial_state(Rng& rng) = 0;
  virtual void set_from_observation(const Array& observation) = 0;
  virtual Outcome advance(std::span<const double> action) = 0;

 private:
  EnvSpec spec_;
  std::size_t elapsed_ = 0;
  bool needs_reset_ = true;
};

// Point mass on the plane, goal at the origin.
//   v' = 0.95 v + 0.1 a,  p' = clip(p + 0.1 v', [-2, 2]),  a in [-1, 1]^2
//   reward = -|p'| - 0.01 |a|^2; terminal when |p'| < 0.05; 200-step limit.
//   Observation [p_x, p_y, v_x, v_y]; initial p ~ U[-1, 1]^2, v = 0.
class PointMass2D final : public Env {
 public:
  static constexpr double kGoalRadius = 0.05;
  static constexpr double kWall = 2.0;

  explicit PointMass2D(std::size_t max_steps = 200);
  Array observation() const override;
  std::optional<double> goal_distance() const override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<PointMass2D>(*this); }
  std::vector<double> raw_state() const override { return {p_[0], p_[1], v_[0], v_[1]}; }
  void set_raw_state(std::span<const double> state) override;

 protected:
  void sample_initial_state(Rng& rng) override;
  void set_from_observation(const Array& observation) override;
  Outcome advance(std::span<const double> action) override;

 private:
  double p_[2] = {0.0, 0.0};
  double v_[2] = {0.0, 0.0};
};

// Torque-limited pendulum swing-up (g = 10, m = l = 1, dt = 0.05, |omega| <= 8, |u| <= 2).
// The angle is integrated as the deviation phi from hanging straight down, so
// rest at phi = 0 is an exact fixed point; the reward uses the upright angle
// theta = phi + pi wrapped to [-pi, pi):
//   reward = -(theta^2 + 0.1 omega^2 + 0.001 u^2), never terminal, 200-step limit.
// Observation [cos theta, sin theta, omega]; initial theta ~ U[-pi, pi], omega ~ U[-1, 1].
class Pendulum final : public Env {
 public:
  explicit Pendulum(std::size_t max_steps = 200);
  Array observation() const override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<Pendulum>(*this); }
  std::vector<double> raw_state() const override { return {phi_, omega_}; }
  void set_raw_state(std::span<const double> state) override;

 protected:
  void sample_initial_state(Rng& rng) override;
  void set_from_observation(const Array& observation) override;
  Outcome advance(std::span<const double> action) override;

 private:
  double phi_ = 0.0;
  double omega_ = 0.0;
};

// Continuous mountain car (power 0.0015, gravity term 0.0025 cos 3x, x in [-1.2, 0.6],
// |v| <= 0.07). reward = -0.1 u^2 per step plus 100 on reaching x >= 0.45 (terminal);
// 500-step limit. Observation [x, v]; initial x ~ U[-0.6, -0.4], v = 0.
class MountainCarContinuous final : public Env {
 public:
  explicit MountainCarContinuous(std::size_t max_steps = 500);
  Array observation() const override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<MountainCarContinuous>(*this); }
  std::vector<double> raw_state() const override { return {x_, v_}; }
  void set_raw_state(std::span<const double> state) override;

 protected:
  void sample_initial_state(Rng& rng) override;
  void set_from_observation(const Array& observation) override;
  Outcome advance(std::span<const double> action) override;

 private:
  double x_ = -0.5;
  double v_ = 0.0;
};

// Known names: "pointmass2d", "pendulum", "mountaincar_c".
std::unique_ptr<Env> make_env(std::string_view name, std::optional<std::size_t> max_episode_steps = std::nullopt);
std::vector<std::string> env_names();

}  // namespace ecac
