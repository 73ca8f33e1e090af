#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecac/actor.hpp"
#include "ecac/critic.hpp"
#include "ecac/diagnostics.hpp"

namespace ecac {

struct TrainConfig {
  std::string env = "pointmass2d";
  std::uint64_t seed = 0;
  std::size_t total_steps = 20'000;
  // Overrides the environment's own episode limit when set.
  std::optional<std::size_t> max_episode_steps;

  double gamma = 0.99;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 128;
  std::size_t buffer_capacity = 500'000;
  double tau = 5e-3;
  std::vector<std::size_t> hidden_sizes{256, 256};

  double target_kl = 5e-3;
  std::optional<double> target_entropy;  // unset: -dim(A) / 2
  std::optional<double> reward_scale;    // unset: per-environment default
  double init_log_alpha = 0.0;
  double init_log_beta = 0.0;
  ObjectiveVariant objective = ObjectiveVariant::kClipped;
  bool kl_limitation = true;
  Bootstrap bootstrap = Bootstrap::kTarget;

  std::size_t warmup_steps = 1000;
  std::size_t eval_cadence = 1000;
  std::size_t eval_episodes = 5;
  std::size_t log_interval = 1000;
  // 0 writes only the final checkpoint.
  std::size_t checkpoint_interval = 10'000;

  bool probes = true;
  ErrorProbeConfig probe;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

using ConfigMap = std::map<std::string, std::string>;

// Flat "key = value" lines; '#' starts a comment; blank lines are ignored.
// `source` prefixes error messages.
ConfigMap parse_config_text(const std::string& text, const std::string& source = "config");

// Applies `entries` on top of `base`. Every unknown key and every invalid value
// is collected, and a single ConfigError lists them all.
TrainConfig apply_config(TrainConfig base, const ConfigMap& entries);

// "key=value" strings as given on the command line.
ConfigMap parse_overrides(const std::vector<std::string>& assignments);

// File (if any) first, then overrides.
TrainConfig load_config(const std::optional<std::filesystem::path>& file, const ConfigMap& overrides);

// Canonical text form; parse_config_text + apply_config reproduce the config exactly.
std::string config_to_text(const TrainConfig& config);

std::vector<std::string> config_keys();

double default_reward_scale(const std::string& env);
double effective_reward_scale(const TrainConfig& config);
double effective_target_entropy(const TrainConfig& config, std::size_t action_dim);
AdamConfig adam_config(const TrainConfig& config);

}  // namespace ecac
