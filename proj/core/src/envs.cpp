#include "ecac/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ecac/errors.hpp"

namespace ecac {

namespace {

void require_size(const char* what, std::span<const double> s, std::size_t n) {
  if (s.size() != n) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(n) + " values, got " +
                     std::to_string(s.size()));
  }
}

double wrap_angle(double x) {
  const double two_pi = 2.0 * std::numbers::pi;
  double y = std::fmod(x + std::numbers::pi, two_pi);
  if (y < 0.0) y += two_pi;
  return y - std::numbers::pi;
}

}  // namespace

Env::Env(EnvSpec spec) : spec_(std::move(spec)) {
  if (spec_.max_episode_steps < 1) throw Error("max episode length must be at least 1");
  for (std::size_t i = 0; i < spec_.act_dim; ++i) {
    if (!(spec_.action_low[i] < spec_.action_high[i])) throw Error("action bounds must satisfy low < high");
  }
}

Array Env::reset(std::uint64_t seed) {
  Rng rng(seed);
  sample_initial_state(rng);
  elapsed_ = 0;
  needs_reset_ = false;
  return observation();
}

Array Env::clamp_action(const Array& action) const {
  if (action.size() != spec_.act_dim) {
    throw ShapeError(spec_.name + ": action shape " + shape_to_string(action.shape()) + " vs [" +
                     std::to_string(spec_.act_dim) + "]");
  }
  Array out = Array::vector({action.values().begin(), action.values().end()});
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (std::isnan(out[i])) throw NumericError(spec_.name + ": action is NaN");
    out[i] = std::clamp(out[i], spec_.action_low[i], spec_.action_high[i]);
  }
  return out;
}

StepResult Env::step(const Array& action) {
  if (needs_reset_) throw EnvStateError(spec_.name + ": step() called on a finished episode; call reset()");
  const Array a = clamp_action(action);
  const Outcome o = advance(a.values());
  ++elapsed_;
  StepResult r;
  r.observation = observation();
  r.reward = o.reward;
  r.terminal = o.terminal;
  r.truncated = !o.terminal && elapsed_ >= spec_.max_episode_steps;
  needs_reset_ = r.terminal || r.truncated;
  return r;
}

void Env::inject_state(const Array& observation) {
  if (!supports_state_injection()) throw UnsupportedProbeError(spec_.name + " does not support state injection");
  if (observation.size() != spec_.obs_dim) {
    throw ShapeError(spec_.name + ": observation shape " + shape_to_string(observation.shape()) + " vs [" +
                     std::to_string(spec_.obs_dim) + "]");
  }
  set_from_observation(observation);
  elapsed_ = 0;
  needs_reset_ = false;
}

void Env::set_time_limit(std::size_t max_episode_steps) {
  if (max_episode_steps < 1) throw Error("max episode length must be at least 1");
  spec_.max_episode_steps = max_episode_steps;
}

void Env::restore_progress(std::size_t elapsed, bool needs_reset) {
  elapsed_ = elapsed;
  needs_reset_ = needs_reset;
}

// ---- PointMass2D ----

PointMass2D::PointMass2D(std::size_t max_steps)
    : Env(EnvSpec{"pointmass2d", 4, 2, {-1.0, -1.0}, {1.0, 1.0}, max_steps,
                  std::sqrt(2.0) * kWall + 0.01 * 2.0}) {}

Array PointMass2D::observation() const { return Array::vector({p_[0], p_[1], v_[0], v_[1]}); }

std::optional<double> PointMass2D::goal_distance() const { return std::hypot(p_[0], p_[1]); }

void PointMass2D::set_raw_state(std::span<const double> state) {
  require_size("pointmass2d state", state, 4);
  p_[0] = state[0];
  p_[1] = state[1];
  v_[0] = state[2];
  v_[1] = state[3];
}

void PointMass2D::sample_initial_state(Rng& rng) {
  p_[0] = rng.uniform(-1.0, 1.0);
  p_[1] = rng.uniform(-1.0, 1.0);
  v_[0] = 0.0;
  v_[1] = 0.0;
}

void PointMass2D::set_from_observation(const Array& observation) { set_raw_state(observation.values()); }

Env::Outcome PointMass2D::advance(std::span<const double> a) {
  for (int i = 0; i < 2; ++i) {
    v_[i] = 0.95 * v_[i] + 0.1 * a[i];
    const double p = p_[i] + 0.1 * v_[i];
    p_[i] = std::clamp(p, -kWall, kWall);
    if (p_[i] != p) v_[i] = 0.0;
  }
  const double dist = std::hypot(p_[0], p_[1]);
  const double reward = -dist - 0.01 * (a[0] * a[0] + a[1] * a[1]);
  return {reward, dist < kGoalRadius};
}

// ---- Pendulum ----

Pendulum::Pendulum(std::size_t max_steps)
    : Env(EnvSpec{"pendulum", 3, 1, {-2.0}, {2.0}, max_steps,
                  std::numbers::pi * std::numbers::pi + 0.1 * 64.0 + 0.001 * 4.0}) {}

Array Pendulum::observation() const { return Array::vector({-std::cos(phi_), -std::sin(phi_), omega_}); }

void Pendulum::set_raw_state(std::span<const double> state) {
  require_size("pendulum state", state, 2);
  phi_ = state[0];
  omega_ = state[1];
}

void Pendulum::sample_initial_state(Rng& rng) {
  phi_ = rng.uniform(-std::numbers::pi, std::numbers::pi);
  omega_ = rng.uniform(-1.0, 1.0);
}

void Pendulum::set_from_observation(const Array& observation) {
  phi_ = std::atan2(-observation[1], -observation[0]);
  omega_ = observation[2];
}

Env::Outcome Pendulum::advance(std::span<const double> a) {
  constexpr double g = 10.0, m = 1.0, l = 1.0, dt = 0.05, max_speed = 8.0;
  const double u = a[0];
  const double theta = wrap_angle(phi_ + std::numbers::pi);
  const double reward = -(theta * theta + 0.1 * omega_ * omega_ + 0.001 * u * u);
  omega_ += (-3.0 * g / (2.0 * l) * std::sin(phi_) + 3.0 / (m * l * l) * u) * dt;
  omega_ = std::clamp(omega_, -max_speed, max_speed);
  phi_ += omega_ * dt;
  return {reward, false};
}

// ---- MountainCarContinuous ----

MountainCarContinuous::MountainCarContinuous(std::size_t max_steps)
    : Env(EnvSpec{"mountaincar_c", 2, 1, {-1.0}, {1.0}, max_steps, 100.0 + 0.1}) {}

Array MountainCarContinuous::observation() const { return Array::vector({x_, v_}); }

void MountainCarContinuous::set_raw_state(std::span<const double> state) {
  require_size("mountaincar_c state", state, 2);
  x_ = state[0];
  v_ = state[1];
}

void MountainCarContinuous::sample_initial_state(Rng& rng) {
  x_ = rng.uniform(-0.6, -0.4);
  v_ = 0.0;
}

void MountainCarContinuous::set_from_observation(const Array& observation) { set_raw_state(observation.values()); }

Env::Outcome MountainCarContinuous::advance(std::span<const double> a) {
  constexpr double min_x = -1.2, max_x = 0.6, max_v = 0.07, goal_x = 0.45, power = 0.0015;
  const double force = a[0];
  v_ += force * power - 0.0025 * std::cos(3.0 * x_);
  v_ = std::clamp(v_, -max_v, max_v);
  x_ += v_;
  x_ = std::clamp(x_, min_x, max_x);
  if (x_ == min_x && v_ < 0.0) v_ = 0.0;
  const bool at_goal = x_ >= goal_x && v_ >= 0.0;
  const double reward = (at_goal ? 100.0 : 0.0) - 0.1 * force * force;
  return {reward, at_goal};
}

std::unique_ptr<Env> make_env(std::string_view name, std::optional<std::size_t> max_episode_steps) {
  if (name == "pointmass2d") return std::make_unique<PointMass2D>(max_episode_steps.value_or(200));
  if (name == "pendulum") return std::make_unique<Pendulum>(max_episode_steps.value_or(200));
  if (name == "mountaincar_c") return std::make_unique<MountainCarContinuous>(max_episode_steps.value_or(500));
  throw ConfigError("unknown environment '" + std::string(name) + "' (expected pointmass2d, pendulum, mountaincar_c)");
}

std::vector<std::string> env_names() { return {"pointmass2d", "pendulum", "mountaincar_c"}; }

}  // namespace ecac
