#include "ecac/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ecac/diagnostics.hpp"
#include "ecac/errors.hpp"
#include "ecac/gaussian.hpp"

namespace ecac {

namespace fs = std::filesystem;

namespace {

std::vector<std::size_t> policy_sizes(const TrainConfig& c, const EnvSpec& s) {
  std::vector<std::size_t> sizes{s.obs_dim};
  sizes.insert(sizes.end(), c.hidden_sizes.begin(), c.hidden_sizes.end());
  sizes.push_back(2 * s.act_dim);
  return sizes;
}

std::vector<std::size_t> q_sizes(const TrainConfig& c, const EnvSpec& s) {
  std::vector<std::size_t> sizes{s.obs_dim + s.act_dim};
  sizes.insert(sizes.end(), c.hidden_sizes.begin(), c.hidden_sizes.end());
  sizes.push_back(1);
  return sizes;
}

void store_mlp(Checkpoint& c, const std::string& prefix, const MlpParams& p) {
  const auto names = p.block_names();
  const auto blocks = p.blocks();
  for (std::size_t i = 0; i < names.size(); ++i) c.tensors[prefix + names[i]] = *blocks[i];
}

void load_mlp(const Checkpoint& c, const std::string& prefix, MlpParams& p) {
  const auto names = p.block_names();
  auto blocks = p.blocks();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& t = c.tensor(prefix + names[i]);
    if (t.shape() != blocks[i]->shape()) {
      throw IoError("checkpoint tensor '" + prefix + names[i] + "' has shape " + shape_to_string(t.shape()) +
                    ", expected " + shape_to_string(blocks[i]->shape()));
    }
    *blocks[i] = t;
  }
}

void store_adam(Checkpoint& c, const std::string& id, const Adam& opt) {
  for (std::size_t i = 0; i < opt.names().size(); ++i) {
    c.tensors["adam/" + id + "/m/" + opt.names()[i]] = opt.first_moments()[i];
    c.tensors["adam/" + id + "/v/" + opt.names()[i]] = opt.second_moments()[i];
  }
  c.meta["adam/" + id + "/steps"] = std::to_string(opt.step_count());
}

void load_adam(const Checkpoint& c, const std::string& id, Adam& opt) {
  std::vector<Array> m, v;
  for (std::size_t i = 0; i < opt.names().size(); ++i) {
    m.push_back(c.tensor("adam/" + id + "/m/" + opt.names()[i]));
    v.push_back(c.tensor("adam/" + id + "/v/" + opt.names()[i]));
    if (m.back().shape() != opt.first_moments()[i].shape() || v.back().shape() != m.back().shape()) {
      throw IoError("checkpoint moments for '" + opt.names()[i] + "' have the wrong shape");
    }
  }
  opt.restore(std::move(m), std::move(v), std::stoull(c.meta_value("adam/" + id + "/steps")));
}

std::uint64_t meta_uint(const Checkpoint& c, const std::string& key) {
  try {
    return std::stoull(c.meta_value(key));
  } catch (const std::logic_error&) {
    throw IoError("checkpoint metadata '" + key + "' is not an integer");
  }
}

EvalStats summarize_returns(std::vector<double> returns, std::optional<double> goal_distance) {
  EvalStats s;
  s.returns = std::move(returns);
  const double n = static_cast<double>(s.returns.size());
  s.min = *std::min_element(s.returns.begin(), s.returns.end());
  s.max = *std::max_element(s.returns.begin(), s.returns.end());
  double sum = 0.0;
  for (double r : s.returns) sum += r;
  s.mean = sum / n;
  double ss = 0.0;
  for (double r : s.returns) ss += (r - s.mean) * (r - s.mean);
  s.std = std::sqrt(ss / n);
  s.goal_distance = goal_distance;
  return s;
}

}  // namespace

AgentState init_agent(const TrainConfig& config, const EnvSpec& spec) {
  const auto adam = adam_config(config);
  AgentState a;
  const auto ps = policy_sizes(config, spec);
  const auto qs = q_sizes(config, spec);
  a.policy = init_mlp(ps, derive_seed(config.seed, "init_policy"));
  a.policy_opt = Adam::for_mlp(adam, a.policy, "policy/");
  a.critics = CriticPair::create(qs, derive_seed(config.seed, "init_q1"), derive_seed(config.seed, "init_q2"), adam);
  a.coeffs = CoefficientState::create(spec.act_dim, adam, config.target_kl, config.target_entropy,
                                      config.init_log_alpha, config.init_log_beta, config.kl_limitation);
  return a;
}

void store_agent(Checkpoint& c, const AgentState& a) {
  store_mlp(c, "policy/", a.policy);
  store_mlp(c, "q1/", a.critics.q1);
  store_mlp(c, "q2/", a.critics.q2);
  store_mlp(c, "target1/", a.critics.target1);
  store_mlp(c, "target2/", a.critics.target2);
  store_adam(c, "policy", a.policy_opt);
  store_adam(c, "q1", a.critics.opt1);
  store_adam(c, "q2", a.critics.opt2);
  store_adam(c, "alpha", a.coeffs.alpha_opt);
  store_adam(c, "beta", a.coeffs.beta_opt);
  c.tensors["coeffs/log_alpha"] = Array::scalar(a.coeffs.log_alpha);
  c.tensors["coeffs/log_beta"] = Array::scalar(a.coeffs.log_beta);
}

AgentState load_agent(const Checkpoint& c, const TrainConfig& config, const EnvSpec& spec) {
  AgentState a = init_agent(config, spec);
  load_mlp(c, "policy/", a.policy);
  load_mlp(c, "q1/", a.critics.q1);
  load_mlp(c, "q2/", a.critics.q2);
  load_mlp(c, "target1/", a.critics.target1);
  load_mlp(c, "target2/", a.critics.target2);
  load_adam(c, "policy", a.policy_opt);
  load_adam(c, "q1", a.critics.opt1);
  load_adam(c, "q2", a.critics.opt2);
  load_adam(c, "alpha", a.coeffs.alpha_opt);
  load_adam(c, "beta", a.coeffs.beta_opt);
  a.coeffs.log_alpha = c.tensor("coeffs/log_alpha").item();
  a.coeffs.log_beta = c.tensor("coeffs/log_beta").item();
  return a;
}

TrainConfig checkpoint_config(const Checkpoint& c) {
  return apply_config(TrainConfig{}, parse_config_text(c.meta_value("config"), "checkpoint config"));
}

EvalStats evaluate_policy(const MlpParams& policy, const Env& prototype, std::size_t episodes, std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  std::vector<std::unique_ptr<Env>> envs;
  std::vector<double> returns(episodes, 0.0);
  std::vector<std::optional<double>> distances(episodes);
  std::vector<std::size_t> active;
  const auto obs_dim = prototype.spec().obs_dim;
  for (std::size_t k = 0; k < episodes; ++k) {
    envs.push_back(prototype.clone());
    envs.back()->reset(derive_seed(seed, "eval", k));
    active.push_back(k);
  }
  while (!active.empty()) {
    Array obs = Array::zeros({active.size(), obs_dim});
    for (std::size_t i = 0; i < active.size(); ++i) {
      const auto o = envs[active[i]]->observation();
      std::copy_n(o.data(), obs_dim, obs.data() + i * obs_dim);
    }
    const auto actions = forward_policy(policy, obs).mean;
    std::vector<std::size_t> still;
    for (std::size_t i = 0; i < active.size(); ++i) {
      const auto k = active[i];
      const auto res = envs[k]->step(actions.row(i));
      returns[k] += res.reward;
      if (res.terminal || res.truncated) {
        distances[k] = envs[k]->goal_distance();
      } else {
        still.push_back(k);
      }
    }
    active = std::move(still);
  }
  std::optional<double> goal;
  if (std::all_of(distances.begin(), distances.end(), [](const auto& d) { return d.has_value(); })) {
    double s = 0.0;
    for (const auto& d : distances) s += *d;
    goal = s / static_cast<double>(episodes);
  }
  return summarize_returns(std::move(returns), goal);
}

Trainer::Trainer(TrainConfig config, fs::path out_dir) : Trainer(std::move(config), std::move(out_dir), true) {
  open_outputs();
}

Trainer::Trainer(TrainConfig config, fs::path out_dir, bool fresh)
    : config_(std::move(config)),
      out_dir_(std::move(out_dir)),
      env_(make_env(config_.env, config_.max_episode_steps)),
      reward_scale_(effective_reward_scale(config_)),
      agent_(init_agent(config_, env_->spec())),
      replay_(config_.buffer_capacity),
      warmup_rng_(derive_seed(config_.seed, "warmup")),
      action_rng_(derive_seed(config_.seed, "action")),
      replay_rng_(derive_seed(config_.seed, "replay")),
      target_rng_(derive_seed(config_.seed, "target_noise")),
      actor_rng_(derive_seed(config_.seed, "actor_noise")),
      probe_rng_(derive_seed(config_.seed, "probe")) {
  if (fresh) obs_ = env_->reset(derive_seed(config_.seed, "env", 0));
}

Trainer::~Trainer() {
  if (metrics_) {
    try {
      metrics_->flush();
    } catch (...) {
    }
  }
}

void Trainer::open_outputs() {
  std::error_code ec;
  fs::create_directories(out_dir_, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir_.string() + ": " + ec.message());
  {
    std::ofstream cfg(out_dir_ / "config.txt", std::ios::trunc);
    cfg << config_to_text(config_);
    if (!cfg) throw IoError("cannot write " + (out_dir_ / "config.txt").string());
  }
  metrics_ = std::make_unique<MetricsWriter>(out_dir_ / "metrics.csv");
  timing_.open(out_dir_ / "timing.csv", std::ios::trunc);
  if (!timing_) throw IoError("cannot write " + (out_dir_ / "timing.csv").string());
  timing_ << "step,event,wall_seconds\n";
  started_ = std::chrono::steady_clock::now();
}

Trainer Trainer::resume(const fs::path& checkpoint, fs::path out_dir, const ConfigMap& overrides) {
  const auto ck = load_checkpoint(checkpoint);
  const auto stored = checkpoint_config(ck);
  auto config = apply_config(stored, overrides);
  if (config.env != stored.env) throw ConfigError("env cannot change on resume");
  if (config.hidden_sizes != stored.hidden_sizes) throw ConfigError("hidden_sizes cannot change on resume");
  if (config.seed != stored.seed) throw ConfigError("seed cannot change on resume");

  Trainer t(std::move(config), std::move(out_dir), false);
  t.agent_ = load_agent(ck, t.config_, t.env_->spec());
  t.step_ = meta_uint(ck, "trainer/step");
  t.episode_ = meta_uint(ck, "trainer/episode");
  t.episode_length_ = meta_uint(ck, "trainer/episode_length");
  t.episode_return_ = ck.tensor("trainer/episode_return").item();
  const auto& w = ck.tensor("trainer/window");
  if (w.size() != 7) throw IoError("checkpoint window has the wrong size");
  t.window_ = Window{w[0], w[1], w[2], w[3], w[4], w[5], w[6]};
  t.env_->set_raw_state(ck.tensor("env/raw_state").values());
  t.env_->restore_progress(meta_uint(ck, "env/elapsed"), meta_uint(ck, "env/needs_reset") != 0);
  t.obs_ = t.env_->observation();
  t.warmup_rng_ = Rng::deserialize(ck.meta_value("rng/warmup"));
  t.action_rng_ = Rng::deserialize(ck.meta_value("rng/action"));
  t.replay_rng_ = Rng::deserialize(ck.meta_value("rng/replay"));
  t.target_rng_ = Rng::deserialize(ck.meta_value("rng/target_noise"));
  t.actor_rng_ = Rng::deserialize(ck.meta_value("rng/actor_noise"));
  t.probe_rng_ = Rng::deserialize(ck.meta_value("rng/probe"));
  t.open_outputs();
  return t;
}

Checkpoint Trainer::make_checkpoint() const {
  Checkpoint c;
  store_agent(c, agent_);
  c.meta["config"] = config_to_text(config_);
  c.meta["trainer/step"] = std::to_string(step_);
  c.meta["trainer/episode"] = std::to_string(episode_);
  c.meta["trainer/episode_length"] = std::to_string(episode_length_);
  c.meta["env/elapsed"] = std::to_string(env_->elapsed_steps());
  c.meta["env/needs_reset"] = env_->needs_reset() ? "1" : "0";
  c.tensors["trainer/episode_return"] = Array::scalar(episode_return_);
  c.tensors["trainer/window"] = Array::vector({window_.loss1, window_.loss2, window_.objective, window_.kl,
                                               window_.entropy, window_.cross_entropy, window_.updates});
  c.tensors["env/raw_state"] = Array::vector(env_->raw_state());
  c.meta["rng/warmup"] = warmup_rng_.serialize();
  c.meta["rng/action"] = action_rng_.serialize();
  c.meta["rng/replay"] = replay_rng_.serialize();
  c.meta["rng/target_noise"] = target_rng_.serialize();
  c.meta["rng/actor_noise"] = actor_rng_.serialize();
  c.meta["rng/probe"] = probe_rng_.serialize();
  return c;
}

void Trainer::write_checkpoint(const fs::path& path) { save_checkpoint(make_checkpoint(), path); }

void Trainer::emit(MetricsRecord r) {
  if (!r[Col::kAlpha]) r[Col::kAlpha] = agent_.coeffs.alpha();
  if (!r[Col::kBeta]) r[Col::kBeta] = agent_.coeffs.beta();
  metrics_->write(r);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", seconds);
  timing_ << r.step << ',' << r.event << ',' << buf << '\n';
}

void Trainer::run_eval() {
  auto stats = evaluate_policy(agent_.policy, *env_, config_.eval_episodes, config_.seed);
  MetricsRecord r{"eval", step_, ""};
  r[Col::kEvalMean] = stats.mean;
  r[Col::kEvalMin] = stats.min;
  r[Col::kEvalMax] = stats.max;
  r[Col::kEvalStd] = stats.std;
  r[Col::kEvalGoalDistance] = stats.goal_distance;
  emit(std::move(r));
  last_eval_ = std::move(stats);
}

void Trainer::run_probes(const std::optional<QSnapshot>& critic_prev, const std::optional<MlpParams>& policy_prev) {
  const QSnapshot now{agent_.critics.q1, agent_.critics.q2};
  const auto states = replay_.sample_uniform(config_.probe.probe_states, probe_rng_).states;
  const RolloutOptions opts{config_.gamma, config_.probe.episodes_per_state, config_.probe.horizon, reward_scale_,
                            false};
  const auto eq = probe_normalized_error(*env_, agent_.policy, now, states, opts, probe_rng_);
  MetricsRecord r{"probe", step_, "eq"};
  r[Col::kEqMedian] = eq.median;
  r[Col::kEqMean] = eq.mean;
  r[Col::kEqExcluded] = static_cast<double>(eq.excluded);
  emit(std::move(r));

  const auto sample = replay_.sample_uniform(config_.probe.probe_states, probe_rng_);
  const auto terms = estimate_bound_terms(now, critic_prev, agent_.policy, policy_prev, sample, config_.gamma,
                                          probe_rng_, config_.probe.inner_samples);
  MetricsRecord b{"probe", step_, terms ? "bounds" : "skipped"};
  if (terms) {
    b[Col::kSourceError] = terms->source_error.value;
    b[Col::kSourceErrorSe] = terms->source_error.std_error;
    b[Col::kTargetShift] = terms->target_shift.value;
    b[Col::kTargetShiftSe] = terms->target_shift.std_error;
    b[Col::kPolicyShift] = terms->policy_shift.value;
    b[Col::kPolicyShiftSe] = terms->policy_shift.std_error;
  }
  emit(std::move(b));
}

void Trainer::step() {
  ++step_;
  const auto& spec = env_->spec();
  Array action;
  if (step_ <= config_.warmup_steps) {
    std::vector<double> a(spec.act_dim);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = warmup_rng_.uniform(spec.action_low[i], spec.action_high[i]);
    action = Array::vector(std::move(a));
  } else {
    const auto dist = forward_policy(agent_.policy, obs_);
    action = gaussian::sample(dist, action_rng_.normal_array(dist.mean.shape()));
  }
  const auto res = env_->step(action);
  replay_.push(Transition{obs_, action, reward_scale_ * res.reward, res.observation, res.terminal});
  episode_return_ += res.reward;
  ++episode_length_;

  const bool probe_due = config_.probes && step_ % config_.probe.cadence == 0;
  std::optional<QSnapshot> critic_prev;
  std::optional<MlpParams> policy_prev;
  if (step_ > config_.warmup_steps && replay_.size() >= config_.batch_size) {
    if (probe_due) critic_prev = QSnapshot{agent_.critics.q1, agent_.critics.q2};
    const auto batch = replay_.sample_uniform(config_.batch_size, replay_rng_);
    const auto losses = critic_update_step(agent_.critics, agent_.policy, batch,
                                           CriticConfig{config_.gamma, config_.tau, config_.bootstrap}, target_rng_);
    const MlpParams snapshot = agent_.policy;
    const auto old_dist = forward_policy(snapshot, batch.states);
    const auto before = policy_telemetry(old_dist, old_dist);
    tune_alpha(agent_.coeffs, before.cross_entropy);
    tune_beta(agent_.coeffs, before.entropy);
    const auto result = actor_update_step(agent_.policy, agent_.policy_opt, old_dist, agent_.critics, batch.states,
                                          agent_.coeffs, actor_rng_, config_.objective);
    window_.loss1 += losses.loss1;
    window_.loss2 += losses.loss2;
    window_.objective += result.objective;
    window_.kl += result.telemetry.kl;
    window_.entropy += result.telemetry.entropy;
    window_.cross_entropy += result.telemetry.cross_entropy;
    window_.updates += 1.0;
    if (probe_due) policy_prev = snapshot;
  }

  if (res.terminal || res.truncated) {
    MetricsRecord r{"episode", step_, ""};
    r[Col::kEpisode] = static_cast<double>(episode_);
    r[Col::kEpisodeReturn] = episode_return_;
    r[Col::kEpisodeLength] = static_cast<double>(episode_length_);
    r[Col::kGoalDistance] = env_->goal_distance();
    emit(std::move(r));
    ++episode_;
    obs_ = env_->reset(derive_seed(config_.seed, "env", episode_));
    episode_return_ = 0.0;
    episode_length_ = 0;
  } else {
    obs_ = res.observation;
  }

  if (step_ % config_.eval_cadence == 0) run_eval();

  if (step_ % config_.log_interval == 0) {
    MetricsRecord r{"train", step_, ""};
    if (window_.updates > 0) {
      const double n = window_.updates;
      r[Col::kCriticLoss1] = window_.loss1 / n;
      r[Col::kCriticLoss2] = window_.loss2 / n;
      r[Col::kActorObjective] = window_.objective / n;
      r[Col::kKl] = window_.kl / n;
      r[Col::kEntropy] = window_.entropy / n;
      r[Col::kCrossEntropy] = window_.cross_entropy / n;
    }
    emit(std::move(r));
    window_ = Window{};
  }

  if (probe_due && !replay_.empty()) run_probes(critic_prev, policy_prev);

  if (config_.checkpoint_interval > 0 && step_ % config_.checkpoint_interval == 0) {
    write_checkpoint(out_dir_ / ("checkpoint_" + std::to_string(step_) + ".ckpt"));
  }
}

TrainSummary Trainer::run() {
  try {
    while (step_ < config_.total_steps) step();
  } catch (const NumericError& e) {
    metrics_->flush();
    timing_.flush();
    throw NumericError("step " + std::to_string(step_) + ": " + e.what());
  }
  TrainSummary s;
  s.steps = step_;
  s.metrics = out_dir_ / "metrics.csv";
  s.final_checkpoint = out_dir_ / "final.ckpt";
  write_checkpoint(s.final_checkpoint);
  metrics_->flush();
  timing_.flush();
  s.final_eval = last_eval_;
  return s;
}

AblationResult ablate(const TrainConfig& config, const fs::path& out_dir) {
  TrainConfig on = config;
  on.kl_limitation = true;
  TrainConfig off = config;
  off.kl_limitation = false;
  AblationResult result;
  result.limited = Trainer(on, out_dir / "kl_on").run();
  result.unlimited = Trainer(off, out_dir / "kl_off").run();

  const std::uint64_t late_from = config.total_steps > 10'000 ? config.total_steps - 10'000 : 0;
  std::ofstream out(out_dir / "ablation.csv", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (out_dir / "ablation.csv").string());
  out << "variant,final_eval_mean,final_eq_median,late_kl_mean\n";
  for (const auto& [name, summary] : {std::pair{"kl_on", &result.limited}, std::pair{"kl_off", &result.unlimited}}) {
    std::optional<double> eval, eq;
    double kl = 0.0;
    std::size_t kl_rows = 0;
    for (const auto& r : read_metrics(summary->metrics)) {
      if (r.event == "eval") eval = r[Col::kEvalMean];
      if (r.event == "probe" && r.probe_type == "eq") eq = r[Col::kEqMedian];
      if (r.event == "train" && r.step > late_from && r[Col::kKl]) {
        kl += *r[Col::kKl];
        ++kl_rows;
      }
    }
    auto field = [](const std::optional<double>& v) {
      if (!v) return std::string();
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", *v);
      return std::string(buf);
    };
    out << name << ',' << field(eval) << ',' << field(eq) << ','
        << field(kl_rows ? std::optional<double>(kl / static_cast<double>(kl_rows)) : std::nullopt) << '\n';
  }
  if (!out) throw IoError("write failed on " + (out_dir / "ablation.csv").string());
  return result;
}

EvalStats evaluate_checkpoint(const fs::path& checkpoint, const std::optional<std::string>& env, std::size_t episodes,
                              std::uint64_t seed) {
  const auto ck = load_checkpoint(checkpoint);
  const auto config = checkpoint_config(ck);
  const auto trained_on = make_env(config.env, config.max_episode_steps);
  const auto agent = load_agent(ck, config, trained_on->spec());
  const auto target = make_env(env.value_or(config.env), config.max_episode_steps);
  if (target->spec().obs_dim != trained_on->spec().obs_dim || target->spec().act_dim != trained_on->spec().act_dim) {
    throw ConfigError("environment '" + target->spec().name + "' does not match the policy trained on '" +
                      config.env + "'");
  }
  return evaluate_policy(agent.policy, *target, episodes, seed);
}

}  // namespace ecac
