#include "ecac/critic.hpp"

#include <algorithm>

#include "ecac/errors.hpp"

namespace ecac {

namespace {

struct LossAndGrads {
  double loss;
  std::vector<Array> grads;
};

LossAndGrads mse_with_grads(const MlpParams& q, const Batch& batch, std::span<const double> targets) {
  ad::Tape tape;
  const auto net = bind(tape, q, true);
  const ad::Var pred = forward_q(net, tape.constant(batch.states), tape.constant(batch.actions));
  const ad::Var y = tape.constant(Array::vector({targets.begin(), targets.end()}));
  const ad::Var loss = ad::mean(ad::square(pred - y));
  tape.backward(loss);
  LossAndGrads out{loss.value().item(), {}};
  for (const auto& v : net.blocks()) out.grads.push_back(tape.grad(v));
  return out;
}

}  // namespace

CriticPair CriticPair::create(std::span<const std::size_t> sizes, std::uint64_t seed1, std::uint64_t seed2,
                              AdamConfig adam) {
  CriticPair p;
  p.q1 = init_mlp(sizes, seed1);
  p.q2 = init_mlp(sizes, seed2);
  p.target1 = p.q1;
  p.target2 = p.q2;
  p.opt1 = Adam::for_mlp(adam, p.q1, "q1/");
  p.opt2 = Adam::for_mlp(adam, p.q2, "q2/");
  return p;
}

TdTargets td_target(const CriticPair& pair, const MlpParams& policy, const Batch& batch, double gamma,
                    const Array& noise, Bootstrap bootstrap) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error("td_target: gamma must lie in [0, 1]");
  if (batch.size() == 0) throw Error("td_target: empty batch");
  const auto next_dist = forward_policy(policy, batch.next_states);
  const Array next_actions = gaussian::sample(next_dist, noise);
  const MlpParams& b1 = bootstrap == Bootstrap::kTarget ? pair.target1 : pair.q1;
  const MlpParams& b2 = bootstrap == Bootstrap::kTarget ? pair.target2 : pair.q2;
  TdTargets out;
  out.q1_next = forward_q(b1, batch.next_states, next_actions);
  out.q2_next = forward_q(b2, batch.next_states, next_actions);
  out.y.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double not_done = 1.0 - batch.terminals[i];
    out.y[i] = batch.rewards[i] + gamma * not_done * std::min(out.q1_next[i], out.q2_next[i]);
  }
  return out;
}

TdTargets td_target(const CriticPair& pair, const MlpParams& policy, const Batch& batch, double gamma, Rng& rng,
                    Bootstrap bootstrap) {
  const Array noise = rng.normal_array({batch.size(), batch.actions.cols()});
  return td_target(pair, policy, batch, gamma, noise, bootstrap);
}

CriticLosses critic_losses(const CriticPair& pair, const Batch& batch, std::span<const double> targets) {
  if (targets.size() != batch.size()) throw ShapeError("critic_losses: target count differs from batch size");
  auto mse = [&](const MlpParams& q) {
    const auto pred = forward_q(q, batch.states, batch.actions);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - targets[i]) * (pred[i] - targets[i]);
    return s / static_cast<double>(pred.size());
  };
  return {mse(pair.q1), mse(pair.q2)};
}

CriticLosses critic_update_step(CriticPair& pair, const MlpParams& policy, const Batch& batch,
                                const CriticConfig& config, Rng& rng) {
  const auto targets = td_target(pair, policy, batch, config.gamma, rng, config.bootstrap);
  auto r1 = mse_with_grads(pair.q1, batch, targets.y);
  auto r2 = mse_with_grads(pair.q2, batch, targets.y);
  pair.opt1.step(pair.q1, r1.grads);
  pair.opt2.step(pair.q2, r2.grads);
  polyak_update(pair.target1, pair.q1, config.tau);
  polyak_update(pair.target2, pair.q2, config.tau);
  return {r1.loss, r2.loss};
}

}  // namespace ecac
