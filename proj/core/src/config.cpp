#include "ecac/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "ecac/envs.hpp"
#include "ecac/errors.hpp"

namespace ecac {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& s) {
  double x = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, x);
  if (ec != std::errc{} || ptr != end || !std::isfinite(x)) throw ConfigError("expected a finite number, got '" + s + "'");
  return x;
}

std::uint64_t parse_uint(const std::string& s) {
  std::uint64_t x = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, x);
  if (ec != std::errc{} || ptr != end) throw ConfigError("expected a non-negative integer, got '" + s + "'");
  return x;
}

bool parse_switch(const std::string& s) {
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw ConfigError("expected on or off, got '" + s + "'");
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_uint(trim(item)));
  if (out.empty()) throw ConfigError("expected a comma-separated list of layer widths");
  return out;
}

std::string format_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Key {
  std::string name;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

template <class T>
Key size_key(std::string name, T TrainConfig::*field) {
  return {name, [field](const TrainConfig& c) { return std::to_string(c.*field); },
          [field](TrainConfig& c, const std::string& v) { c.*field = static_cast<T>(parse_uint(v)); }};
}

Key double_key(std::string name, double TrainConfig::*field) {
  return {name, [field](const TrainConfig& c) { return format_double(c.*field); },
          [field](TrainConfig& c, const std::string& v) { c.*field = parse_double(v); }};
}

Key probe_key(std::string name, std::size_t ErrorProbeConfig::*field) {
  return {name, [field](const TrainConfig& c) { return std::to_string(c.probe.*field); },
          [field](TrainConfig& c, const std::string& v) { c.probe.*field = parse_uint(v); }};
}

Key auto_key(std::string name, std::optional<double> TrainConfig::*field) {
  return {name, [field](const TrainConfig& c) { return c.*field ? format_double(*(c.*field)) : std::string("auto"); },
          [field](TrainConfig& c, const std::string& v) {
            if (v == "auto") {
              c.*field = std::nullopt;
            } else {
              c.*field = parse_double(v);
            }
          }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"env", [](const TrainConfig& c) { return c.env; }, [](TrainConfig& c, const std::string& v) { c.env = v; }},
      size_key("seed", &TrainConfig::seed),
      size_key("total_steps", &TrainConfig::total_steps),
      {"max_episode_steps",
       [](const TrainConfig& c) { return c.max_episode_steps ? std::to_string(*c.max_episode_steps) : "auto"; },
       [](TrainConfig& c, const std::string& v) {
         if (v == "auto") {
           c.max_episode_steps = std::nullopt;
         } else {
           c.max_episode_steps = parse_uint(v);
         }
       }},
      double_key("gamma", &TrainConfig::gamma),
      double_key("learning_rate", &TrainConfig::learning_rate),
      double_key("adam_beta1", &TrainConfig::adam_beta1),
      double_key("adam_beta2", &TrainConfig::adam_beta2),
      double_key("adam_epsilon", &TrainConfig::adam_epsilon),
      size_key("batch_size", &TrainConfig::batch_size),
      size_key("buffer_capacity", &TrainConfig::buffer_capacity),
      double_key("tau", &TrainConfig::tau),
      {"hidden_sizes", [](const TrainConfig& c) { return format_sizes(c.hidden_sizes); },
       [](TrainConfig& c, const std::string& v) { c.hidden_sizes = parse_sizes(v); }},
      double_key("target_kl", &TrainConfig::target_kl),
      auto_key("target_entropy", &TrainConfig::target_entropy),
      auto_key("reward_scale", &TrainConfig::reward_scale),
      double_key("init_log_alpha", &TrainConfig::init_log_alpha),
      double_key("init_log_beta", &TrainConfig::init_log_beta),
      {"objective",
       [](const TrainConfig& c) { return std::string(c.objective == ObjectiveVariant::kClipped ? "clipped" : "pseudocode"); },
       [](TrainConfig& c, const std::string& v) {
         if (v == "clipped") {
           c.objective = ObjectiveVariant::kClipped;
         } else if (v == "pseudocode") {
           c.objective = ObjectiveVariant::kPseudocode;
         } else {
           throw ConfigError("expected clipped or pseudocode, got '" + v + "'");
         }
       }},
      {"kl_limitation", [](const TrainConfig& c) { return std::string(c.kl_limitation ? "on" : "off"); },
       [](TrainConfig& c, const std::string& v) { c.kl_limitation = parse_switch(v); }},
      {"bootstrap", [](const TrainConfig& c) { return std::string(c.bootstrap == Bootstrap::kTarget ? "target" : "online"); },
       [](TrainConfig& c, const std::string& v) {
         if (v == "target") {
           c.bootstrap = Bootstrap::kTarget;
         } else if (v == "online") {
           c.bootstrap = Bootstrap::kOnline;
         } else {
           throw ConfigError("expected target or online, got '" + v + "'");
         }
       }},
      size_key("warmup_steps", &TrainConfig::warmup_steps),
      size_key("eval_cadence", &TrainConfig::eval_cadence),
      size_key("eval_episodes", &TrainConfig::eval_episodes),
      size_key("log_interval", &TrainConfig::log_interval),
      size_key("checkpoint_interval", &TrainConfig::checkpoint_interval),
      {"probes", [](const TrainConfig& c) { return std::string(c.probes ? "on" : "off"); },
       [](TrainConfig& c, const std::string& v) { c.probes = parse_switch(v); }},
      probe_key("probe_states", &ErrorProbeConfig::probe_states),
      probe_key("probe_episodes", &ErrorProbeConfig::episodes_per_state),
      probe_key("probe_cadence", &ErrorProbeConfig::cadence),
      probe_key("probe_horizon", &ErrorProbeConfig::horizon),
      probe_key("probe_inner_samples", &ErrorProbeConfig::inner_samples),
  };
  return table;
}

std::vector<std::string> validate(const TrainConfig& c) {
  std::vector<std::string> errs;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
  };
  const auto names = env_names();
  need(std::find(names.begin(), names.end(), c.env) != names.end(), "env: unknown environment '" + c.env + "'");
  need(c.total_steps >= 1, "total_steps: must be >= 1");
  need(!c.max_episode_steps || *c.max_episode_steps >= 1, "max_episode_steps: must be >= 1");
  need(c.gamma >= 0.0 && c.gamma <= 1.0, "gamma: must lie in [0, 1]");
  need(c.learning_rate > 0.0, "learning_rate: must be > 0");
  need(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0, "adam_beta1: must lie in [0, 1)");
  need(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0, "adam_beta2: must lie in [0, 1)");
  need(c.adam_epsilon > 0.0, "adam_epsilon: must be > 0");
  need(c.batch_size >= 1, "batch_size: must be >= 1");
  need(c.buffer_capacity >= 1, "buffer_capacity: must be >= 1");
  need(c.tau >= 0.0 && c.tau <= 1.0, "tau: must lie in [0, 1]");
  need(!c.hidden_sizes.empty() && std::all_of(c.hidden_sizes.begin(), c.hidden_sizes.end(),
                                              [](std::size_t h) { return h >= 1; }),
       "hidden_sizes: every width must be >= 1");
  need(c.target_kl > 0.0, "target_kl: must be > 0");
  need(!c.reward_scale || *c.reward_scale > 0.0, "reward_scale: must be > 0");
  need(c.eval_cadence >= 1, "eval_cadence: must be >= 1");
  need(c.eval_episodes >= 1, "eval_episodes: must be >= 1");
  need(c.log_interval >= 1, "log_interval: must be >= 1");
  need(c.probe.probe_states >= 1, "probe_states: must be >= 1");
  need(c.probe.episodes_per_state >= 1, "probe_episodes: must be >= 1");
  need(c.probe.cadence >= 1, "probe_cadence: must be >= 1");
  need(c.probe.horizon >= 1, "probe_horizon: must be >= 1");
  need(c.probe.inner_samples >= 1, "probe_inner_samples: must be >= 1");
  return errs;
}

std::string join_errors(const std::vector<std::string>& errs) {
  std::string msg = "invalid configuration (" + std::to_string(errs.size()) + " problem" +
                    (errs.size() == 1 ? "" : "s") + "):";
  for (const auto& e : errs) msg += "\n  " + e;
  return msg;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text, const std::string& source) {
  ConfigMap out;
  std::vector<std::string> errs;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = source + ":" + std::to_string(number) + ": ";
    if (eq == std::string::npos) {
      errs.push_back(where + "expected key = value");
      continue;
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      errs.push_back(where + "empty key");
      continue;
    }
    if (out.count(key)) errs.push_back(where + "duplicate key '" + key + "'");
    out[key] = trim(line.substr(eq + 1));
  }
  if (!errs.empty()) throw ConfigError(join_errors(errs));
  return out;
}

TrainConfig apply_config(TrainConfig base, const ConfigMap& entries) {
  std::vector<std::string> errs;
  for (const auto& [key, value] : entries) {
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == key; });
    if (it == table.end()) {
      errs.push_back(key + ": unknown key");
      continue;
    }
    try {
      it->set(base, value);
    } catch (const ConfigError& e) {
      errs.push_back(key + ": " + e.what());
    }
  }
  for (auto& e : validate(base)) {
    const auto key = e.substr(0, e.find(':'));
    const bool already = std::any_of(errs.begin(), errs.end(), [&](const std::string& x) {
      return x.compare(0, key.size() + 1, key + ":") == 0;
    });
    if (!already) errs.push_back(std::move(e));
  }
  if (!errs.empty()) throw ConfigError(join_errors(errs));
  return base;
}

ConfigMap parse_overrides(const std::vector<std::string>& assignments) {
  std::string text;
  for (const auto& a : assignments) {
    if (a.find('\n') != std::string::npos) throw ConfigError("override contains a newline: '" + a + "'");
    if (a.find('=') == std::string::npos) throw ConfigError("override must look like key=value, got '" + a + "'");
    text += a + "\n";
  }
  return parse_config_text(text, "override");
}

TrainConfig load_config(const std::optional<std::filesystem::path>& file, const ConfigMap& overrides) {
  ConfigMap merged;
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw IoError("cannot read config file " + file->string());
    std::stringstream ss;
    ss << in.rdbuf();
    merged = parse_config_text(ss.str(), file->string());
  }
  for (const auto& [k, v] : overrides) merged[k] = v;
  return apply_config(TrainConfig{}, merged);
}

std::string config_to_text(const TrainConfig& config) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.push_back(k.name);
  return out;
}

double default_reward_scale(const std::string& env) {
  (void)env;
  return 5.0;
}

double effective_reward_scale(const TrainConfig& config) {
  return config.reward_scale ? *config.reward_scale : default_reward_scale(config.env);
}

double effective_target_entropy(const TrainConfig& config, std::size_t action_dim) {
  return config.target_entropy ? *config.target_entropy : default_target_entropy(action_dim);
}

AdamConfig adam_config(const TrainConfig& config) {
  return AdamConfig{config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon};
}

}  // namespace ecac
