#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ecac/actor.hpp"
#include "ecac/checkpoint.hpp"
#include "ecac/config.hpp"
#include "ecac/critic.hpp"
#include "ecac/envs.hpp"
#include "ecac/metrics.hpp"
#include "ecac/networks.hpp"
#include "ecac/replay.hpp"
#include "ecac/rng.hpp"

namespace ecac {

// Everything the optimizer updates.
struct AgentState {
  MlpParams policy;
  Adam policy_opt;
  CriticPair critics;
  CoefficientState coeffs;

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

// Networks drawn from the "init_policy", "init_q1", "init_q2" substreams of config.seed.
AgentState init_agent(const TrainConfig& config, const EnvSpec& spec);

struct EvalStats {
  std::vector<double> returns;  // raw, one per episode
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double std = 0.0;  // population standard deviation
  // Mean final distance to the goal, for goal-reaching tasks.
  std::optional<double> goal_distance;
};

// Mean-action rollouts from the resets derive_seed(seed, "eval", k), k = 0..episodes-1.
EvalStats evaluate_policy(const MlpParams& policy, const Env& prototype, std::size_t episodes, std::uint64_t seed);

struct TrainSummary {
  std::uint64_t steps = 0;
  std::filesystem::path metrics;
  std::filesystem::path final_checkpoint;
  std::optional<EvalStats> final_eval;
};

// Runs the training loop and writes, under the output directory:
//   config.txt       effective configuration
//   metrics.csv      one row per event
//   timing.csv       wall-clock seconds per metrics row
//   checkpoint_<step>.ckpt at the checkpoint interval, final.ckpt at the end
//
// Per environment step: act (uniform random during warmup), store the scaled
// reward, then, once warm and the buffer holds a batch: critic step, backup of
// the old policy, alpha/beta tuning on the old policy's telemetry, actor step.
class Trainer {
 public:
  Trainer(TrainConfig config, std::filesystem::path out_dir);

  // Continues a run from a checkpoint with an empty replay buffer. The stored
  // configuration is used, with `overrides` applied on top; the environment and
  // network shape cannot change.
  static Trainer resume(const std::filesystem::path& checkpoint, std::filesystem::path out_dir,
                        const ConfigMap& overrides = {});

  Trainer(Trainer&&) = default;
  ~Trainer();

  // Steps until config.total_steps. A NumericError leaves the last checkpoint on disk untouched.
  TrainSummary run();
  void step();

  std::uint64_t current_step() const { return step_; }
  const TrainConfig& config() const { return config_; }
  const AgentState& agent() const { return agent_; }
  const ReplayBuffer& replay() const { return replay_; }
  Checkpoint make_checkpoint() const;

 private:
  struct Window {
    double loss1 = 0, loss2 = 0, objective = 0, kl = 0, entropy = 0, cross_entropy = 0;
    double updates = 0;
  };

  Trainer(TrainConfig config, std::filesystem::path out_dir, bool fresh);
  void open_outputs();
  void emit(MetricsRecord r);
  void run_eval();
  void run_probes(const std::optional<QSnapshot>& critic_prev, const std::optional<MlpParams>& policy_prev);
  void write_checkpoint(const std::filesystem::path& path);

  TrainConfig config_;
  std::filesystem::path out_dir_;
  std::unique_ptr<Env> env_;
  double reward_scale_ = 1.0;
  AgentState agent_;
  ReplayBuffer replay_;

  Rng warmup_rng_;
  Rng action_rng_;
  Rng replay_rng_;
  Rng target_rng_;
  Rng actor_rng_;
  Rng probe_rng_;

  std::uint64_t step_ = 0;
  Array obs_;
  std::uint64_t episode_ = 0;
  double episode_return_ = 0.0;
  std::uint64_t episode_length_ = 0;
  Window window_;
  std::optional<EvalStats> last_eval_;

  std::unique_ptr<MetricsWriter> metrics_;
  std::ofstream timing_;
  std::chrono::steady_clock::time_point started_;
};

// Runs the configuration twice, with kl_limitation on and off and everything else
// (seeds included) equal, into out_dir/kl_on and out_dir/kl_off, and writes a
// side-by-side summary to out_dir/ablation.csv.
struct AblationResult {
  TrainSummary limited;
  TrainSummary unlimited;
};
AblationResult ablate(const TrainConfig& config, const std::filesystem::path& out_dir);

// Loads the policy from a checkpoint and evaluates it. `env` defaults to the
// checkpoint's environment. Throws CheckpointVersionError on a version mismatch.
EvalStats evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::optional<std::string>& env,
                              std::size_t episodes, std::uint64_t seed);

// Serialization of the agent into checkpoint tensors and metadata.
void store_agent(Checkpoint& ckpt, const AgentState& agent);
AgentState load_agent(const Checkpoint& ckpt, const TrainConfig& config, const EnvSpec& spec);
TrainConfig checkpoint_config(const Checkpoint& ckpt);

}  // namespace ecac
