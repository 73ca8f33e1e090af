#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ecac/networks.hpp"
#include "ecac/replay.hpp"
#include "ecac/rng.hpp"

namespace ecac {

// Two independent Q networks, their Polyak-averaged targets, and one optimizer each.
struct CriticPair {
  MlpParams q1;
  MlpParams q2;
  MlpParams target1;
  MlpParams target2;
  Adam opt1;
  Adam opt2;

  // Targets start as exact copies of the online nets.
  static CriticPair create(std::span<const std::size_t> sizes, std::uint64_t seed1, std::uint64_t seed2,
                           AdamConfig adam);

  friend bool operator==(const CriticPair&, const CriticPair&) = default;
};

// Which pair bootstraps the TD target. kOnline is the literal form written in
// the loss equations; kTarget uses the slow target copies.
enum class Bootstrap { kTarget, kOnline };

struct CriticConfig {
  double gamma = 0.99;
  double tau = 5e-3;
  Bootstrap bootstrap = Bootstrap::kTarget;
};

struct TdTargets {
  std::vector<double> y;
  // Bootstrap values Q_i(s', a') before the min, per transition.
  std::vector<double> q1_next;
  std::vector<double> q2_next;
};

// y = r + gamma * (1 - terminal) * min_i Q_i(s', a'),  a' = mu(s') + sigma(s') * noise.
// `noise` is [n, act].
TdTargets td_target(const CriticPair& pair, const MlpParams& policy, const Batch& batch, double gamma,
                    const Array& noise, Bootstrap bootstrap = Bootstrap::kTarget);
// Draws one standard-normal action perturbation per transition from `rng`.
TdTargets td_target(const CriticPair& pair, const MlpParams& policy, const Batch& batch, double gamma, Rng& rng,
                    Bootstrap bootstrap = Bootstrap::kTarget);

struct CriticLosses {
  double loss1 = 0.0;
  double loss2 = 0.0;
};

// Mean squared error of each online net against the shared targets.
CriticLosses critic_losses(const CriticPair& pair, const Batch& batch, std::span<const double> targets);

// One optimizer step per online net, then a Polyak update of both targets.
// Returns the losses measured before the step.
CriticLosses critic_update_step(CriticPair& pair, const MlpParams& policy, const Batch& batch,
                                const CriticConfig& config, Rng& rng);

}  // namespace ecac
