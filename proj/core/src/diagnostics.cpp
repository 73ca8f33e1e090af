#include "ecac/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "ecac/errors.hpp"
#include "ecac/gaussian.hpp"

namespace ecac {

namespace {

TermEstimate summarize(const std::vector<double>& xs) {
  TermEstimate t;
  t.samples = xs.size();
  if (xs.empty()) return t;
  double s = 0.0;
  for (double x : xs) s += x;
  t.value = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - t.value) * (x - t.value);
    t.std_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return t;
}

Array policy_actions(const MlpParams& policy, const Array& states, Rng& rng, bool deterministic) {
  const auto dist = forward_policy(policy, states);
  if (deterministic) return dist.mean;
  return gaussian::sample(dist, rng.normal_array(dist.mean.shape()));
}

}  // namespace

std::vector<MonteCarloEstimate> monte_carlo_q(const Env& prototype, const MlpParams& policy, const Array& states,
                                              const Array& actions, const RolloutOptions& options, Rng& rng) {
  if (!prototype.supports_state_injection()) {
    throw UnsupportedProbeError(prototype.spec().name + " does not support state injection");
  }
  if (options.episodes < 1 || options.horizon < 1) throw Error("monte_carlo_q: episodes and horizon must be >= 1");
  if (!(options.gamma >= 0.0 && options.gamma <= 1.0)) throw Error("monte_carlo_q: gamma must lie in [0, 1]");
  const auto n = states.rows();
  if (actions.rows() != n) throw ShapeError("monte_carlo_q: states and actions differ in row count");
  const auto obs_dim = prototype.spec().obs_dim;
  const auto rollouts = n * options.episodes;

  std::vector<std::unique_ptr<Env>> envs;
  envs.reserve(rollouts);
  std::vector<double> returns(rollouts, 0.0);
  std::vector<double> discount(rollouts, 1.0);
  std::vector<std::size_t> active;
  for (std::size_t r = 0; r < rollouts; ++r) {
    const auto i = r / options.episodes;
    auto env = prototype.clone();
    env->set_time_limit(options.horizon);
    env->inject_state(states.rows() == 1 && states.rank() == 1 ? states : states.row(i));
    const auto res = env->step(actions.rank() == 1 ? actions : actions.row(i));
    returns[r] = options.reward_scale * res.reward;
    discount[r] = options.gamma;
    if (!(res.terminal || res.truncated) && options.gamma > 0.0) active.push_back(r);
    envs.push_back(std::move(env));
  }

  while (!active.empty()) {
    Array obs = Array::zeros({active.size(), obs_dim});
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto o = envs[active[k]]->observation();
      std::copy_n(o.data(), obs_dim, obs.data() + k * obs_dim);
    }
    const Array acts = policy_actions(policy, obs, rng, options.deterministic_policy);
    std::vector<std::size_t> still;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto r = active[k];
      const auto res = envs[r]->step(acts.row(k));
      returns[r] += discount[r] * options.reward_scale * res.reward;
      discount[r] *= options.gamma;
      if (!(res.terminal || res.truncated)) still.push_back(r);
    }
    active = std::move(still);
  }

  std::vector<MonteCarloEstimate> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto first = returns.begin() + static_cast<std::ptrdiff_t>(i * options.episodes);
    const auto t = summarize(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(options.episodes)));
    out[i] = MonteCarloEstimate{t.value, t.std_error, t.samples};
  }
  return out;
}

MonteCarloEstimate monte_carlo_q_at(const Env& prototype, const MlpParams& policy, const Array& state,
                                    const Array& action, const RolloutOptions& options, Rng& rng) {
  const Array s = state.reshaped({1, state.size()});
  const Array a = action.reshaped({1, action.size()});
  return monte_carlo_q(prototype, policy, s, a, options, rng).front();
}

std::optional<double> normalized_q_error(double q_approx, double q_true) {
  if (!(std::fabs(q_true) > kNormalizedErrorEpsilon)) return std::nullopt;
  return std::fabs(q_approx - q_true) / std::fabs(q_true);
}

double consecutive_policy_kl(const MlpParams& policy_new, const MlpParams& policy_old, const Array& states) {
  const auto kls = gaussian::kl(forward_policy(policy_new, states), forward_policy(policy_old, states));
  double s = 0.0;
  for (double k : kls) s += k;
  return s / static_cast<double>(kls.size());
}

std::vector<double> clipped_q(const QSnapshot& critic, const Array& states, const Array& actions) {
  auto q1 = forward_q(critic.q1, states, actions);
  const auto q2 = forward_q(critic.q2, states, actions);
  for (std::size_t i = 0; i < q1.size(); ++i) q1[i] = std::min(q1[i], q2[i]);
  return q1;
}

NormalizedErrorReport probe_normalized_error(const Env& prototype, const MlpParams& policy, const QSnapshot& critic,
                                             const Array& states, const RolloutOptions& options, Rng& rng) {
  const Array actions = policy_actions(policy, states, rng, false);
  const auto approx = clipped_q(critic, states, actions);
  const auto truth = monte_carlo_q(prototype, policy, states, actions, options, rng);
  NormalizedErrorReport report;
  for (std::size_t i = 0; i < approx.size(); ++i) {
    if (auto e = normalized_q_error(approx[i], truth[i].mean)) {
      report.errors.push_back(*e);
    } else {
      ++report.excluded;
    }
  }
  if (!report.errors.empty()) {
    auto sorted = report.errors;
    std::sort(sorted.begin(), sorted.end());
    const auto m = sorted.size();
    report.median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    report.mean = summarize(sorted).value;
  }
  return report;
}

std::optional<BoundTermsReport> estimate_bound_terms(const QSnapshot& critic_now,
                                                     const std::optional<QSnapshot>& critic_prev,
                                                     const MlpParams& policy_now,
                                                     const std::optional<MlpParams>& policy_prev, const Batch& sample,
                                                     double gamma, Rng& rng, std::size_t inner_samples) {
  if (!critic_prev || !policy_prev) return std::nullopt;
  if (inner_samples < 1) throw Error("estimate_bound_terms: inner_samples must be >= 1");
  const auto n = sample.size();
  const auto& next = sample.next_states;

  // r + gamma (1 - terminal) Q(s', a'), one fresh a' ~ pi per transition.
  auto td = [&](const QSnapshot& q, const MlpParams& pi) {
    const auto boot = clipped_q(q, next, policy_actions(pi, next, rng, false));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = sample.rewards[i] + gamma * (1.0 - sample.terminals[i]) * boot[i];
    return y;
  };

  const auto q_sa = clipped_q(critic_now, sample.states, sample.actions);
  const auto y_prev_a = td(*critic_prev, *policy_prev);
  const auto y_now = td(critic_now, policy_now);
  const auto y_prev_b = td(*critic_prev, *policy_prev);

  const auto dist_now = forward_policy(policy_now, next);
  const auto dist_prev = forward_policy(*policy_prev, next);
  std::vector<double> acc_now(n, 0.0), acc_prev(n, 0.0);
  for (std::size_t j = 0; j < inner_samples; ++j) {
    const Array xi = rng.normal_array(dist_now.mean.shape());
    const auto q_now = clipped_q(critic_now, next, gaussian::sample(dist_now, xi));
    const auto q_prev = clipped_q(critic_now, next, gaussian::sample(dist_prev, xi));
    for (std::size_t i = 0; i < n; ++i) {
      acc_now[i] += q_now[i];
      acc_prev[i] += q_prev[i];
    }
  }

  std::vector<double> a(n), b(n), c(n);
  const double m = static_cast<double>(inner_samples);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = std::fabs(q_sa[i] - y_prev_a[i]);
    b[i] = std::fabs(y_now[i] - y_prev_b[i]);
    c[i] = gamma * (1.0 - sample.terminals[i]) * std::fabs(acc_now[i] / m - acc_prev[i] / m);
  }
  BoundTermsReport report{summarize(a), summarize(b), summarize(c)};
  for (const auto* t : {&report.source_error, &report.target_shift, &report.policy_shift}) {
    if (!std::isfinite(t->value) || t->value < 0.0) throw NumericError("bound-term estimate is not finite");
  }
  return report;
}

}  // namespace ecac
