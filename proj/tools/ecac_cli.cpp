// ecac: train, ablate, evaluate and chart error-controlled actor-critic runs.
//
// Exit codes: 0 ok, 1 configuration error, 2 numeric failure, 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecac/charts.hpp"
#include "ecac/config.hpp"
#include "ecac/errors.hpp"
#include "ecac/trainer.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfig = 1, kNumeric = 2, kIo = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, Common& c, bool out_required) {
  sub->add_option("--config", c.config, "flat key = value configuration file");
  sub->add_option("--seed", c.seed, "root seed (overrides the config)");
  auto* out = sub->add_option("--out", c.out, "output directory");
  if (out_required) out->required();
  sub->add_option("--set", c.sets, "per-key override, key=value (repeatable)");
}

ecac::ConfigMap overrides(const Common& c) {
  auto map = ecac::parse_overrides(c.sets);
  if (c.seed) map["seed"] = std::to_string(*c.seed);
  return map;
}

ecac::TrainConfig resolve(const Common& c) {
  return ecac::load_config(c.config.empty() ? std::nullopt : std::optional<fs::path>(c.config), overrides(c));
}

void print_eval(const char* label, const std::optional<ecac::EvalStats>& s) {
  if (!s) return;
  std::printf("%s: eval mean %.4f  min %.4f  max %.4f  std %.4f", label, s->mean, s->min, s->max, s->std);
  if (s->goal_distance) std::printf("  goal distance %.4f", *s->goal_distance);
  std::printf("\n");
}

int run(int argc, char** argv) {
  CLI::App app{"Error-controlled actor-critic trainer"};
  app.require_subcommand(1);

  Common train_opts, ablate_opts, eval_opts, chart_opts;
  std::string resume;
  auto* train = app.add_subcommand("train", "train one agent");
  add_common(train, train_opts, true);
  train->add_option("--resume", resume, "continue from this checkpoint (replay starts empty)");

  auto* abl = app.add_subcommand("ablate", "paired runs with and without the KL limitation");
  add_common(abl, ablate_opts, true);

  std::string checkpoint;
  auto* eval = app.add_subcommand("evaluate", "mean-action rollouts of a checkpointed policy");
  add_common(eval, eval_opts, false);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  std::vector<std::string> metrics_files;
  auto* charts = app.add_subcommand("render-charts", "SVG charts from one or more metrics files");
  add_common(charts, chart_opts, true);
  charts->add_option("metrics", metrics_files, "metrics.csv files; each becomes one series")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (*train) {
    const auto summary = resume.empty()
                             ? ecac::Trainer(resolve(train_opts), train_opts.out).run()
                             : [&] {
                                 if (!train_opts.config.empty()) {
                                   throw ecac::ConfigError("--resume takes its configuration from the checkpoint; use --set");
                                 }
                                 return ecac::Trainer::resume(resume, train_opts.out, overrides(train_opts)).run();
                               }();
    std::printf("trained %llu steps; metrics %s; checkpoint %s\n", static_cast<unsigned long long>(summary.steps),
                summary.metrics.string().c_str(), summary.final_checkpoint.string().c_str());
    print_eval("final", summary.final_eval);
  } else if (*abl) {
    const auto result = ecac::ablate(resolve(ablate_opts), ablate_opts.out);
    print_eval("kl_on", result.limited.final_eval);
    print_eval("kl_off", result.unlimited.final_eval);
    std::printf("summary %s\n", (fs::path(ablate_opts.out) / "ablation.csv").string().c_str());
  } else if (*eval) {
    // Only keys given explicitly apply; the rest come from the checkpoint.
    ecac::ConfigMap given = eval_opts.config.empty() ? ecac::ConfigMap{} : [&] {
      std::ifstream in(eval_opts.config);
      if (!in) throw ecac::IoError("cannot read config file " + eval_opts.config);
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      return ecac::parse_config_text(text, eval_opts.config);
    }();
    for (const auto& [k, v] : ecac::parse_overrides(eval_opts.sets)) given[k] = v;
    const auto checked = ecac::apply_config(ecac::TrainConfig{}, given);
    const std::optional<std::string> env = given.count("env") ? std::optional(checked.env) : std::nullopt;
    const std::size_t episodes = given.count("eval_episodes") ? checked.eval_episodes : 5;
    const std::uint64_t seed = eval_opts.seed.value_or(given.count("seed") ? checked.seed : 0);
    const auto stats = ecac::evaluate_checkpoint(checkpoint, env, episodes, seed);
    print_eval("evaluate", stats);
    if (!eval_opts.out.empty()) {
      std::error_code ec;
      fs::create_directories(eval_opts.out, ec);
      if (ec) throw ecac::IoError("cannot create output directory " + eval_opts.out);
      nlohmann::json j = {{"checkpoint", checkpoint}, {"episodes", episodes}, {"seed", seed},
                          {"returns", stats.returns}, {"mean", stats.mean}, {"min", stats.min},
                          {"max", stats.max},         {"std", stats.std}};
      if (stats.goal_distance) j["goal_distance"] = *stats.goal_distance;
      const auto path = fs::path(eval_opts.out) / "evaluation.json";
      std::ofstream out(path);
      out << j.dump(2) << '\n';
      if (!out) throw ecac::IoError("cannot write " + path.string());
    }
  } else if (*charts) {
    // The shared flags are accepted for a uniform interface; charts only need the files.
    if (!chart_opts.config.empty() || !chart_opts.sets.empty()) resolve(chart_opts);
    std::vector<fs::path> files(metrics_files.begin(), metrics_files.end());
    for (const auto& p : ecac::render_charts(files, chart_opts.out)) std::printf("wrote %s\n", p.string().c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ecac::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const ecac::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kNumeric;
  } catch (const ecac::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfig;
  }
}
