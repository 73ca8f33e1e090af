#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ecac/errors.hpp"
#include "ecac/trainer.hpp"

using namespace ecac;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ecac_unit_trainer" / name;
  fs::remove_all(dir);
  return dir;
}

TrainConfig small(const std::string& env, std::size_t steps) {
  TrainConfig c;
  c.env = env;
  c.seed = 7;
  c.total_steps = steps;
  c.hidden_sizes = {32, 32};
  c.batch_size = 32;
  c.warmup_steps = 100;
  c.eval_cadence = 100;
  c.eval_episodes = 2;
  c.log_interval = 50;
  c.checkpoint_interval = 0;
  c.probes = false;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<MetricsRecord> rows_of(const std::vector<MetricsRecord>& rows, const std::string& event) {
  std::vector<MetricsRecord> out;
  for (const auto& r : rows) {
    if (r.event == event) out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("eval cadence 1000 over 10000 steps gives exactly 10 eval rows of 5 episodes") {
  auto c = small("pointmass2d", 10'000);
  c.eval_cadence = 1000;
  c.eval_episodes = 5;
  c.log_interval = 1000;
  c.hidden_sizes = {16, 16};
  c.batch_size = 16;
  const auto dir = fresh_dir("cadence");
  const auto summary = Trainer(c, dir).run();
  const auto evals = rows_of(read_metrics(summary.metrics), "eval");
  REQUIRE(evals.size() == 10);
  for (std::size_t i = 0; i < evals.size(); ++i) {
    CHECK(evals[i].step == 1000 * (i + 1));
    CHECK(evals[i][Col::kEvalMean].has_value());
    CHECK(*evals[i][Col::kEvalMin] <= *evals[i][Col::kEvalMean]);
    CHECK(*evals[i][Col::kEvalMean] <= *evals[i][Col::kEvalMax]);
  }
  REQUIRE(summary.final_eval.has_value());
  CHECK(summary.final_eval->returns.size() == 5);
  CHECK(fs::exists(dir / "final.ckpt"));
  CHECK(fs::exists(dir / "config.txt"));
  CHECK(fs::exists(dir / "timing.csv"));
}

TEST_CASE("stored rewards are scaled, logged episode returns are raw") {
  auto c = small("pointmass2d", 60);
  c.max_episode_steps = 20;
  c.reward_scale = 5.0;
  const auto dir = fresh_dir("scale");
  Trainer t(c, dir);
  const auto summary = t.run();
  const auto& replay = t.replay();
  REQUIRE(replay.size() == 60);
  PointMass2D probe;
  probe.reset(0);
  std::vector<double> raw_per_episode(3, 0.0);
  for (std::size_t i = 0; i < replay.size(); ++i) {
    const auto tr = replay.at(i);
    probe.inject_state(tr.state);
    const double raw = probe.step(tr.action).reward;
    CHECK(tr.reward == 5.0 * raw);
    raw_per_episode[i / 20] += raw;
  }
  const auto episodes = rows_of(read_metrics(summary.metrics), "episode");
  REQUIRE(episodes.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(*episodes[k][Col::kEpisodeReturn] == doctest::Approx(raw_per_episode[k]).epsilon(1e-12));
    CHECK(*episodes[k][Col::kEpisodeLength] == 20.0);
  }
}

TEST_CASE("same config and seed give bit-identical metrics") {
  auto c = small("pendulum", 300);
  c.probes = true;
  c.probe = {.probe_states = 4, .episodes_per_state = 2, .cadence = 150, .horizon = 30, .inner_samples = 2};
  const auto a = Trainer(c, fresh_dir("det_a")).run();
  const auto b = Trainer(c, fresh_dir("det_b")).run();
  const auto ta = slurp(a.metrics);
  CHECK(ta == slurp(b.metrics));
  CHECK(slurp(a.final_checkpoint) == slurp(b.final_checkpoint));
  // Probe rows present: the first lacks a previous snapshot, the second has bound terms.
  const auto probes = rows_of(read_metrics(a.metrics), "probe");
  REQUIRE(probes.size() == 4);
  CHECK(probes[0].probe_type == "eq");
  CHECK(probes[1].probe_type == "bounds");
  CHECK(probes[1][Col::kSourceError].has_value());

  c.seed = 8;
  CHECK(slurp(Trainer(c, fresh_dir("det_c")).run().metrics) != ta);
}

TEST_CASE("one trainer step follows critic, backup, tuning, actor in that order") {
  auto c = small("pendulum", 1000);
  c.max_episode_steps = 10'000;
  Trainer t(c, fresh_dir("order"));
  for (int i = 0; i < 130; ++i) t.step();

  // Independent replay of step 131 from the exposed state.
  const auto ck = t.make_checkpoint();
  AgentState agent = t.agent();
  ReplayBuffer replay = t.replay();
  Rng action_rng = Rng::deserialize(ck.meta_value("rng/action"));
  Rng replay_rng = Rng::deserialize(ck.meta_value("rng/replay"));
  Rng target_rng = Rng::deserialize(ck.meta_value("rng/target_noise"));
  Rng actor_rng = Rng::deserialize(ck.meta_value("rng/actor_noise"));
  Pendulum env(10'000);
  env.reset(0);
  env.set_raw_state(ck.tensor("env/raw_state").values());
  env.restore_progress(130, false);
  const Array obs = replay.at(replay.size() - 1).next_state;

  const auto dist = forward_policy(agent.policy, obs);
  const Array action = gaussian::sample(dist, action_rng.normal_array(dist.mean.shape()));
  const auto res = env.step(action);
  replay.push({obs, action, 5.0 * res.reward, res.observation, res.terminal});
  const auto batch = replay.sample_uniform(32, replay_rng);
  critic_update_step(agent.critics, agent.policy, batch, {c.gamma, c.tau, c.bootstrap}, target_rng);
  const auto old_dist = forward_policy(agent.policy, batch.states);
  const auto before = policy_telemetry(old_dist, old_dist);
  tune_alpha(agent.coeffs, before.cross_entropy);
  tune_beta(agent.coeffs, before.entropy);
  actor_update_step(agent.policy, agent.policy_opt, old_dist, agent.critics, batch.states, agent.coeffs, actor_rng);

  t.step();
  CHECK(t.agent() == agent);
  CHECK(t.replay().at(t.replay().size() - 1).action == action);
}

TEST_CASE("resume: identical rows inside warmup, identical event structure afterwards") {
  auto c = small("pendulum", 260);
  c.warmup_steps = 150;
  c.eval_cadence = 40;
  c.log_interval = 20;
  c.checkpoint_interval = 100;
  const auto full_dir = fresh_dir("resume_full");
  const auto full = read_metrics(Trainer(c, full_dir).run().metrics);
  REQUIRE(fs::exists(full_dir / "checkpoint_100.ckpt"));

  const auto resumed_dir = fresh_dir("resume_part");
  auto t = Trainer::resume(full_dir / "checkpoint_100.ckpt", resumed_dir);
  CHECK(t.current_step() == 100);
  CHECK(t.replay().empty());
  const auto part = read_metrics(t.run().metrics);

  std::vector<MetricsRecord> tail;
  for (const auto& r : full) {
    if (r.step > 100) tail.push_back(r);
  }
  REQUIRE(tail.size() == part.size());
  for (std::size_t i = 0; i < part.size(); ++i) {
    CAPTURE(part[i].step);
    CHECK(part[i].event == tail[i].event);
    CHECK(part[i].step == tail[i].step);
    if (part[i].step <= c.warmup_steps) CHECK(part[i] == tail[i]);
  }

  CHECK_THROWS_AS(Trainer::resume(full_dir / "checkpoint_100.ckpt", fresh_dir("resume_bad"), {{"env", "pointmass2d"}}),
                  ConfigError);
  CHECK_THROWS_AS(Trainer::resume(full_dir / "nope.ckpt", fresh_dir("resume_missing")), IoError);
}

TEST_CASE("ablation: alpha is zero throughout the off variant, warmup is shared") {
  auto c = small("pendulum", 240);
  c.warmup_steps = 120;
  c.max_episode_steps = 30;
  c.eval_cadence = 60;
  c.log_interval = 30;
  const auto dir = fresh_dir("ablate");
  const auto result = ablate(c, dir);
  const auto on = read_metrics(result.limited.metrics), off = read_metrics(result.unlimited.metrics);
  bool off_has_alpha = false;
  for (const auto& r : off) {
    if (r[Col::kAlpha]) {
      off_has_alpha = true;
      CHECK(*r[Col::kAlpha] == 0.0);
    }
  }
  CHECK(off_has_alpha);
  bool on_positive = false;
  for (const auto& r : on) on_positive = on_positive || (r[Col::kAlpha] && *r[Col::kAlpha] > 0.0);
  CHECK(on_positive);

  const auto eon = rows_of(on, "episode"), eoff = rows_of(off, "episode");
  REQUIRE(eon.size() == eoff.size());
  for (std::size_t i = 0; i < eon.size(); ++i) {
    if (eon[i].step <= c.warmup_steps) CHECK(*eon[i][Col::kEpisodeReturn] == *eoff[i][Col::kEpisodeReturn]);
  }
  // Divergence begins at the first update.
  CHECK(slurp(result.limited.final_checkpoint) != slurp(result.unlimited.final_checkpoint));
  const auto summary = slurp(dir / "ablation.csv");
  CHECK(summary.find("kl_on") != std::string::npos);
  CHECK(summary.find("kl_off") != std::string::npos);
}

TEST_CASE("evaluation statistics") {
  auto c = small("pendulum", 150);
  const auto dir = fresh_dir("evaluate");
  const auto summary = Trainer(c, dir).run();

  const auto one = evaluate_checkpoint(summary.final_checkpoint, std::nullopt, 1, 3);
  CHECK(one.min == one.mean);
  CHECK(one.max == one.mean);
  CHECK(one.std == 0.0);

  const auto a = evaluate_checkpoint(summary.final_checkpoint, std::nullopt, 4, 3);
  const auto b = evaluate_checkpoint(summary.final_checkpoint, std::string("pendulum"), 4, 3);
  CHECK(a.returns == b.returns);
  CHECK(a.std == b.std);

  // Raw returns: a manual mean-action rollout with the unscaled reward.
  const auto ck = load_checkpoint(summary.final_checkpoint);
  const auto agent = load_agent(ck, checkpoint_config(ck), Pendulum().spec());
  Pendulum env;
  Array obs = env.reset(derive_seed(3, "eval", 0));
  double ret = 0;
  while (!env.needs_reset()) {
    const auto r = env.step(forward_policy(agent.policy, obs).mean);
    ret += r.reward;
    obs = r.observation;
  }
  CHECK(a.returns[0] == doctest::Approx(ret).epsilon(1e-12));

  CHECK_THROWS_AS(evaluate_checkpoint(summary.final_checkpoint, std::string("pointmass2d"), 1, 0), ConfigError);

  auto bytes = slurp(summary.final_checkpoint);
  const std::uint32_t future = Checkpoint::kVersion + 1;
  std::memcpy(bytes.data() + 8, &future, sizeof future);
  const auto bad = dir / "future.ckpt";
  std::ofstream(bad, std::ios::binary) << bytes;
  CHECK_THROWS_AS(evaluate_checkpoint(bad, std::nullopt, 1, 0), CheckpointVersionError);
}

TEST_CASE("a numeric failure aborts and leaves the last checkpoint intact") {
  auto c = small("pointmass2d", 400);
  c.warmup_steps = 50;
  c.checkpoint_interval = 40;
  c.learning_rate = 1e200;
  const auto dir = fresh_dir("numeric");
  CHECK_THROWS_AS(Trainer(c, dir).run(), NumericError);
  REQUIRE(fs::exists(dir / "checkpoint_40.ckpt"));
  CHECK_NOTHROW(load_checkpoint(dir / "checkpoint_40.ckpt"));
  CHECK_FALSE(fs::exists(dir / "final.ckpt"));
}
