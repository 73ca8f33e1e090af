#pragma once

#include <optional>

#include "ecac/critic.hpp"
#include "ecac/gaussian.hpp"
#include "ecac/networks.hpp"
#include "ecac/rng.hpp"

namespace ecac {

// kClipped:    min_i Q_i(s, a~) - alpha * H(pi, pi_old) + beta * H(pi)
// kPseudocode: Q_1(s, a~) + alpha * H(pi) - beta * KL(pi || pi_old), the pseudo-code form
enum class ObjectiveVariant { kClipped, kPseudocode };

// Log-parameterized cross-entropy (alpha) and entropy (beta) coefficients.
struct CoefficientState {
  double log_alpha = 0.0;
  double log_beta = 0.0;
  Adam alpha_opt;
  Adam beta_opt;
  double target_kl = 5e-3;
  double target_entropy = 0.0;
  // false pins alpha to zero and makes tune_alpha a no-op (the "no KL limitation" ablation).
  bool kl_limitation = true;

  static CoefficientState create(std::size_t action_dim, AdamConfig adam, double target_kl = 5e-3,
                                 std::optional<double> target_entropy = std::nullopt, double init_log_alpha = 0.0,
                                 double init_log_beta = 0.0, bool kl_limitation = true);

  double alpha() const;
  double beta() const;

  friend bool operator==(const CoefficientState&, const CoefficientState&) = default;
};

// -dim(A) / 2
double default_target_entropy(std::size_t action_dim);

struct PolicyTelemetry {
  double kl = 0.0;
  double entropy = 0.0;
  double cross_entropy = 0.0;
};

// Batch means of the closed forms for pi_theta against the frozen distribution `old_dist`.
PolicyTelemetry policy_telemetry(const MlpParams& policy, const DiagGaussian& old_dist, const Array& states);
PolicyTelemetry policy_telemetry(const DiagGaussian& dist, const DiagGaussian& old_dist);

// Builds the objective (to maximize) on `tape`. `policy` should be bound trainable;
// critics are bound as constants and `old_dist` is a plain value, so gradients
// reach theta only. `noise` is [n, act].
ad::Var actor_objective(ad::Tape& tape, const MlpVars& policy, const DiagGaussian& old_dist, const CriticPair& critics,
                        const Array& states, const Array& noise, double alpha, double beta,
                        ObjectiveVariant variant = ObjectiveVariant::kClipped);

double actor_objective(const MlpParams& policy, const MlpParams& snapshot, const CriticPair& critics,
                       const Array& states, double alpha, double beta, Rng& rng,
                       ObjectiveVariant variant = ObjectiveVariant::kClipped);

struct ActorStepResult {
  double objective = 0.0;     // before the step
  PolicyTelemetry telemetry;  // after the step, against the snapshot
};

// One ascent step on the objective. `old_dist` is the snapshot policy evaluated on `states`.
ActorStepResult actor_update_step(MlpParams& policy, Adam& optimizer, const DiagGaussian& old_dist,
                                  const CriticPair& critics, const Array& states, const CoefficientState& coeffs,
                                  Rng& rng, ObjectiveVariant variant = ObjectiveVariant::kClipped);
ActorStepResult actor_update_step(MlpParams& policy, Adam& optimizer, const MlpParams& snapshot,
                                  const CriticPair& critics, const Array& states, const CoefficientState& coeffs,
                                  Rng& rng, ObjectiveVariant variant = ObjectiveVariant::kClipped);

// One optimizer step on log_alpha * ((target_kl + target_entropy) - cross_entropy).
void tune_alpha(CoefficientState& coeffs, double cross_entropy);
// One optimizer step on log_beta * (entropy - target_entropy).
void tune_beta(CoefficientState& coeffs, double entropy);

}  // namespace ecac
