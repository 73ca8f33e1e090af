#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ecac/array.hpp"
#include "ecac/envs.hpp"
#include "ecac/networks.hpp"
#include "ecac/replay.hpp"
#include "ecac/rng.hpp"

namespace ecac {

struct ErrorProbeConfig {
  std::size_t probe_states = 100;
  std::size_t episodes_per_state = 20;
  std::size_t cadence = 10'000;
  // Rollouts ignore the training time limit and stop here (or at a terminal).
  std::size_t horizon = 500;
  // Policy samples per side for the inner expectations of the policy-shift term.
  std::size_t inner_samples = 16;

  friend bool operator==(const ErrorProbeConfig&, const ErrorProbeConfig&) = default;
};

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t episodes = 0;
};

struct RolloutOptions {
  double gamma = 0.99;
  std::size_t episodes = 20;
  std::size_t horizon = 500;
  double reward_scale = 1.0;
  // Follow the policy mean instead of sampling.
  bool deterministic_policy = false;
};

// Discounted return from taking actions[i] in states[i], then following `policy`.
// Rewards are multiplied by reward_scale so estimates are comparable with learned Q.
// Throws UnsupportedProbeError if `prototype` cannot be placed in an arbitrary state.
std::vector<MonteCarloEstimate> monte_carlo_q(const Env& prototype, const MlpParams& policy, const Array& states,
                                              const Array& actions, const RolloutOptions& options, Rng& rng);
// Single (state, action) pair.
MonteCarloEstimate monte_carlo_q_at(const Env& prototype, const MlpParams& policy, const Array& state,
                                    const Array& action, const RolloutOptions& options, Rng& rng);

inline constexpr double kNormalizedErrorEpsilon = 1e-6;

// |q_approx - q_true| / |q_true|; nullopt (excluded sample) when |q_true| <= 1e-6.
std::optional<double> normalized_q_error(double q_approx, double q_true);

// Batch mean of KL(pi_new(.|s) || pi_old(.|s)).
double consecutive_policy_kl(const MlpParams& policy_new, const MlpParams& policy_old, const Array& states);

// Online critic pair; its value is min(Q1, Q2).
struct QSnapshot {
  MlpParams q1;
  MlpParams q2;
};

std::vector<double> clipped_q(const QSnapshot& critic, const Array& states, const Array& actions);

struct NormalizedErrorReport {
  std::vector<double> errors;  // included samples only
  std::size_t excluded = 0;
  std::optional<double> median;
  std::optional<double> mean;
};

// e_Q at `states` with actions drawn from the current policy.
NormalizedErrorReport probe_normalized_error(const Env& prototype, const MlpParams& policy, const QSnapshot& critic,
                                             const Array& states, const RolloutOptions& options, Rng& rng);

struct TermEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

struct BoundTermsReport {
  TermEstimate source_error;  // E|Q_n(s,a) - y_{n-1}(s,a)|
  TermEstimate target_shift;  // E|y_n(s,a) - y_{n-1}(s,a)|
  TermEstimate policy_shift;  // gamma E|E_{a'~pi_n} Q_n(s',a') - E_{a'~pi_{n-1}} Q_n(s',a')|
};

// y_k(s, a) = r + gamma (1 - terminal) Q_k(s', a'), a' ~ pi_k. Both inner expectations
// of the policy-shift term reuse the same standard-normal draws. Returns nullopt
// (probe skipped) when a previous snapshot is missing.
std::optional<BoundTermsReport> estimate_bound_terms(const QSnapshot& critic_now,
                                                     const std::optional<QSnapshot>& critic_prev,
                                                     const MlpParams& policy_now,
                                                     const std::optional<MlpParams>& policy_prev, const Batch& sample,
                                                     double gamma, Rng& rng, std::size_t inner_samples = 16);

}  // namespace ecac
