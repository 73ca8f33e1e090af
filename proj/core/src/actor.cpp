#include "ecac/actor.hpp"

#include <cmath>

#include "ecac/errors.hpp"

namespace ecac {

namespace {

// Runs one optimizer step on loss = log_coeff * signal through the tape.
void coefficient_step(double& log_coeff, Adam& opt, double signal) {
  if (!std::isfinite(signal)) throw NumericError("coefficient tuning signal is not finite");
  ad::Tape tape;
  const ad::Var lc = tape.parameter(Array::scalar(log_coeff));
  const ad::Var loss = lc * tape.constant(Array::scalar(signal));
  tape.backward(loss);
  Array value = Array::scalar(log_coeff);
  Array* blocks[] = {&value};
  const Array grads[] = {tape.grad(lc)};
  opt.step(blocks, grads);
  log_coeff = value.item();
}

}  // namespace

double default_target_entropy(std::size_t action_dim) { return -static_cast<double>(action_dim) / 2.0; }

CoefficientState CoefficientState::create(std::size_t action_dim, AdamConfig adam, double target_kl,
                                          std::optional<double> target_entropy, double init_log_alpha,
                                          double init_log_beta, bool kl_limitation) {
  CoefficientState c;
  c.log_alpha = init_log_alpha;
  c.log_beta = init_log_beta;
  c.alpha_opt = Adam(adam, {"log_alpha"}, {Shape{}});
  c.beta_opt = Adam(adam, {"log_beta"}, {Shape{}});
  c.target_kl = target_kl;
  c.target_entropy = target_entropy.value_or(default_target_entropy(action_dim));
  c.kl_limitation = kl_limitation;
  return c;
}

double CoefficientState::alpha() const { return kl_limitation ? std::exp(log_alpha) : 0.0; }
double CoefficientState::beta() const { return std::exp(log_beta); }

PolicyTelemetry policy_telemetry(const DiagGaussian& dist, const DiagGaussian& old_dist) {
  ad::Tape tape;
  const auto b = gaussian::as_batch(dist);
  const gaussian::Vars p{tape.constant(b.mean), tape.constant(b.log_std)};
  const ad::Var h = gaussian::entropy(p);
  const ad::Var ce = gaussian::cross_entropy(p, old_dist);
  const ad::Var kl = ce - h;
  PolicyTelemetry t;
  t.entropy = ad::mean(h).value().item();
  t.cross_entropy = ad::mean(ce).value().item();
  t.kl = ad::mean(kl).value().item();
  return t;
}

PolicyTelemetry policy_telemetry(const MlpParams& policy, const DiagGaussian& old_dist, const Array& states) {
  return policy_telemetry(forward_policy(policy, states), old_dist);
}

ad::Var actor_objective(ad::Tape& tape, const MlpVars& policy, const DiagGaussian& old_dist, const CriticPair& critics,
                        const Array& states, const Array& noise, double alpha, double beta, ObjectiveVariant variant) {
  const ad::Var s = tape.constant(states.rank() == 1 ? states.reshaped({1, states.size()}) : states);
  const auto dist = forward_policy(policy, s);
  const ad::Var action = gaussian::sample(dist, noise);
  const ad::Var q1 = forward_q(bind(tape, critics.q1, false), s, action);
  const ad::Var h = gaussian::entropy(dist);
  if (variant == ObjectiveVariant::kPseudocode) {
    const ad::Var kl = gaussian::kl(dist, old_dist);
    return ad::mean(q1 + alpha * h - beta * kl);
  }
  const ad::Var q2 = forward_q(bind(tape, critics.q2, false), s, action);
  const ad::Var ce = gaussian::cross_entropy(dist, old_dist);
  return ad::mean(ad::minimum(q1, q2) - alpha * ce + beta * h);
}

double actor_objective(const MlpParams& policy, const MlpParams& snapshot, const CriticPair& critics,
                       const Array& states, double alpha, double beta, Rng& rng, ObjectiveVariant variant) {
  ad::Tape tape;
  const auto old_dist = forward_policy(snapshot, states);
  const auto act_dim = old_dist.mean.rank() == 2 ? old_dist.mean.dim(1) : old_dist.mean.size();
  const Array noise = rng.normal_array({states.rank() == 2 ? states.dim(0) : 1, act_dim});
  return actor_objective(tape, bind(tape, policy, false), old_dist, critics, states, noise, alpha, beta, variant)
      .value()
      .item();
}

ActorStepResult actor_update_step(MlpParams& policy, Adam& optimizer, const DiagGaussian& old_dist,
                                  const CriticPair& critics, const Array& states, const CoefficientState& coeffs,
                                  Rng& rng, ObjectiveVariant variant) {
  const auto old_batch = gaussian::as_batch(old_dist);
  const Array noise = rng.normal_array(old_batch.mean.shape());
  ActorStepResult out;
  {
    ad::Tape tape;
    const auto net = bind(tape, policy, true);
    const ad::Var objective =
        actor_objective(tape, net, old_batch, critics, states, noise, coeffs.alpha(), coeffs.beta(), variant);
    // Ascent on the objective is descent on its negation.
    const ad::Var loss = -objective;
    tape.backward(loss);
    std::vector<Array> grads;
    for (const auto& v : net.blocks()) grads.push_back(tape.grad(v));
    optimizer.step(policy, grads);
    out.objective = objective.value().item();
  }
  out.telemetry = policy_telemetry(policy, old_batch, states);
  return out;
}

ActorStepResult actor_update_step(MlpParams& policy, Adam& optimizer, const MlpParams& snapshot,
                                  const CriticPair& critics, const Array& states, const CoefficientState& coeffs,
                                  Rng& rng, ObjectiveVariant variant) {
  return actor_update_step(policy, optimizer, forward_policy(snapshot, states), critics, states, coeffs, rng, variant);
}

void tune_alpha(CoefficientState& coeffs, double cross_entropy) {
  if (!coeffs.kl_limitation) return;
  coefficient_step(coeffs.log_alpha, coeffs.alpha_opt, (coeffs.target_kl + coeffs.target_entropy) - cross_entropy);
}

void tune_beta(CoefficientState& coeffs, double entropy) {
  coefficient_step(coeffs.log_beta, coeffs.beta_opt, entropy - coeffs.target_entropy);
}

}  // namespace ecac
