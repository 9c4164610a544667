// Copyright 2026 The vtsim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "vtsim/engine.h"
#include "vtsim/estimator.h"
#include "vtsim/experiment.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "Configuration file (key=value)");
  cmd->add_option("--seed", flags.seed, "Override the base seed");
  cmd->add_option("--out", flags.out, "Output file or directory");
}

vtsim::ExperimentSpec load_spec(const CommonFlags& flags) {
  vtsim::ExperimentSpec spec =
      flags.config.empty() ? vtsim::ExperimentSpec() : vtsim::parse_config(flags.config);
  if (flags.seed) {
    spec.sim.seed = *flags.seed;
    spec.estimator.train.seed = *flags.seed;
  }
  return spec;
}

std::ofstream open_file(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::filesystem::path out_dir(const CommonFlags& flags, const vtsim::ExperimentSpec& spec) {
  return flags.out.empty() ? spec.output_dir : std::filesystem::path(flags.out);
}

int cmd_defaults(const CommonFlags& flags) {
  const vtsim::ExperimentSpec spec = load_spec(flags);
  if (flags.out.empty()) {
    vtsim::format_config(std::cout, spec);
  } else {
    auto out = open_file(flags.out);
    vtsim::format_config(out, spec);
  }
  return kExitOk;
}

int cmd_simulate(const CommonFlags& flags, const std::string& policy_text,
                 const std::string& qtable_path) {
  const vtsim::ExperimentSpec spec = load_spec(flags);
  vtsim::PolicySpec policy;
  try {
    policy = vtsim::parse_policy(policy_text);
  } catch (const std::invalid_argument& e) {
    throw vtsim::ConfigError(e.what(), "--policy", 0);
  }
  vtsim::SimConfig sim = vtsim::resolve_sim_config(spec);
  sim.scheduler = policy.scheduler;

  std::shared_ptr<const vtsim::QTable> table;
  if (policy.kind == vtsim::PolicySpec::Kind::kLearned) {
    if (qtable_path.empty()) {
      table = vtsim::train_lrp(spec, policy.scheduler).table;
    } else {
      vtsim::QLearningConfig q;
      q.gamma = spec.sim.gamma;
      q.max_step = spec.training.max_step;
      auto loaded = std::make_shared<vtsim::QTable>(spec.sim.bins, q);
      std::ifstream in(qtable_path);
      if (!in) throw std::runtime_error("cannot read " + qtable_path);
      vtsim::read_qtable(in, *loaded);
      table = loaded;
    }
  }
  auto provisioner = vtsim::make_policy(policy, table);
  const vtsim::RunReport report = vtsim::run(sim, *provisioner, vtsim::make_estimator(spec));
  if (flags.out.empty()) {
    vtsim::write_run_report(std::cout, report);
  } else {
    auto out = open_file(flags.out);
    vtsim::write_run_report(out, report);
  }
  return kExitOk;
}

int cmd_train(const CommonFlags& flags, const std::string& scheduler_text) {
  const vtsim::ExperimentSpec spec = load_spec(flags);
  vtsim::SchedulerKind scheduler;
  if (scheduler_text == "VBS") {
    scheduler = vtsim::SchedulerKind::kValueBased;
  } else if (scheduler_text == "HVF") {
    scheduler = vtsim::SchedulerKind::kHighestValueFirst;
  } else {
    throw vtsim::ConfigError("--scheduler must be VBS or HVF", "--scheduler", 0);
  }
  const vtsim::TrainedPolicy trained = vtsim::train_lrp(spec, scheduler);
  const std::filesystem::path dir = out_dir(flags, spec);
  std::filesystem::create_directories(dir);
  const std::string label = "LRP-" + scheduler_text;
  auto q = open_file(dir / ("qtable_" + label + ".csv"));
  vtsim::write_qtable(q, *trained.table);
  auto log = open_file(dir / ("training_" + label + ".csv"));
  vtsim::write_reward_log(log, trained.log);
  std::cout << "wrote " << (dir / ("qtable_" + label + ".csv")).string() << '\n';
  return kExitOk;
}

int cmd_compare(const CommonFlags& flags) {
  const vtsim::ExperimentSpec spec = load_spec(flags);
  const vtsim::ExperimentResult result = vtsim::run_experiment(spec);
  const std::filesystem::path dir = out_dir(flags, spec);
  vtsim::emit_report(result, dir);
  std::printf("%-14s %12s %10s %10s\n", "policy", "mean_profit", "std", "se");
  for (const auto& runs : result.policies) {
    const vtsim::PolicySummary s = vtsim::summarize(runs);
    std::printf("%-14s %12.4f %10.4f %10.4f\n", s.policy.c_str(), s.mean_profit, s.std_profit,
                s.se_profit);
  }
  std::cout << "reports in " << dir.string() << '\n';
  return kExitOk;
}

int cmd_gen_data(const CommonFlags& flags, std::size_t count) {
  const vtsim::ExperimentSpec spec = load_spec(flags);
  const std::size_t n = count > 0 ? count : spec.estimator.samples;
  const auto data =
      vtsim::generate_dataset(n, spec.sim.media, spec.estimator.rule, spec.sim.seed);
  const std::filesystem::path path = flags.out.empty() ? "dataset.csv" : flags.out;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  vtsim::write_dataset(path, data);
  std::cout << "wrote " << n << " samples to " << path.string() << '\n';
  return kExitOk;
}

int cmd_estimate(const CommonFlags& flags, const std::string& data_path) {
  const vtsim::ExperimentSpec spec = load_spec(flags);
  const std::vector<vtsim::Sample> data =
      data_path.empty()
          ? vtsim::generate_dataset(spec.estimator.samples, spec.sim.media, spec.estimator.rule,
                                    spec.sim.seed)
          : vtsim::load_dataset(data_path);
  vtsim::NeuralModel model;
  const vtsim::EstimatorEvaluation eval =
      vtsim::evaluate_estimator(data, spec.estimator.train, &model);

  const std::filesystem::path dir = out_dir(flags, spec);
  std::filesystem::create_directories(dir);
  vtsim::save_model(model, dir / "model.txt");
  auto errors = open_file(dir / "estimator_errors.csv");
  errors << "sample,nn_error,linear_error\n";
  errors.precision(17);
  for (std::size_t i = 0; i < eval.nn_errors.size(); ++i) {
    errors << i << ',' << eval.nn_errors[i] << ',' << eval.linear_errors[i] << '\n';
  }
  auto summary = open_file(dir / "estimator_summary.csv");
  summary.precision(17);
  summary << "model,median_abs_error,within_band,iterations\n"
          << "nn," << eval.nn_median_abs << ',' << eval.nn_within_band << ',' << eval.iterations
          << '\n'
          << "linear," << eval.linear_median_abs << ",,\n";
  std::printf("nn median |error| %.4f, %.1f%% within +/-%.2f; linear median |error| %.4f\n",
              eval.nn_median_abs, 100.0 * eval.nn_within_band, vtsim::kErrorBand,
              eval.linear_median_abs);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vtsim: transcoding cluster simulator"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string policy = "FP(10)";
  std::string qtable;
  std::string scheduler = "VBS";
  std::size_t count = 0;
  std::string data;

  auto* defaults = app.add_subcommand("defaults", "Print the full configuration with defaults");
  auto* simulate = app.add_subcommand("simulate", "Run one policy over the horizon");
  auto* train = app.add_subcommand("train", "Train a learned provisioning policy");
  auto* compare = app.add_subcommand("compare", "Train, evaluate and compare all policies");
  auto* gen_data = app.add_subcommand("gen-data", "Write a synthetic estimator dataset");
  auto* estimate = app.add_subcommand("estimate", "Train and score the transcoding-time model");
  for (auto* cmd : {defaults, simulate, train, compare, gen_data, estimate}) add_common(cmd, flags);
  simulate->add_option("--policy", policy, "LRP-VBS, LRP-HVF, FP(m), ARP(c), ...");
  simulate->add_option("--qtable", qtable, "Q-table for a learned policy (trained if absent)");
  train->add_option("--scheduler", scheduler, "VBS or HVF");
  gen_data->add_option("--count", count, "Number of samples (estimator.samples if 0)");
  estimate->add_option("--data", data, "Dataset CSV (generated if absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*defaults) return cmd_defaults(flags);
    if (*simulate) return cmd_simulate(flags, policy, qtable);
    if (*train) return cmd_train(flags, scheduler);
    if (*compare) return cmd_compare(flags);
    if (*gen_data) return cmd_gen_data(flags, count);
    if (*estimate) return cmd_estimate(flags, data);
  } catch (const vtsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
