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

#ifndef VTSIM_EXPERIMENT_H_
#define VTSIM_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vtsim/engine.h"
#include "vtsim/estimator.h"
#include "vtsim/provisioner.h"

namespace vtsim {

// Bad configuration: unknown key, malformed or out-of-range value. `key`
// and `line` are empty / 0 when the problem is not tied to one entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string key, long line)
      : std::runtime_error(what), key_(std::move(key)), line_(line) {}
  const std::string& key() const { return key_; }
  long line() const { return line_; }

 private:
  std::string key_;
  long line_;
};

// One entry of the comparison: a provisioning policy paired with the
// scheduler that orders the queue underneath it.
struct PolicySpec {
  enum class Kind { kLearned, kFixed, kArrivalRate };
  Kind kind = Kind::kFixed;
  SchedulerKind scheduler = SchedulerKind::kValueBased;
  double parameter = 10.0;  // m for FP, c for ARP; unused for LRP

  // Canonical label: "LRP-VBS", "FP(10)", "ARP(30)-HVF", ...
  std::string name() const;
  bool operator==(const PolicySpec&) const = default;
};

// Accepts the labels produced by PolicySpec::name(). Baselines default to
// VBS; a "-HVF" or "-VBS" suffix selects the scheduler explicitly.
PolicySpec parse_policy(std::string_view text);

enum class ArrivalSource { kProfile, kTraceReplay, kTraceProfile };

struct TrainingSpec {
  std::int64_t loops = 100000;
  EpsilonSchedule epsilon;
  int max_step = 5;
  double initial_value = 0.0;
  LearningRate learning_rate{LearningRate::Kind::kPolynomial, 0.1, 0.85};

  bool operator==(const TrainingSpec&) const = default;
};

struct EstimatorSpec {
  std::size_t samples = 2000;
  TrainOptions train;
  SyntheticTimeRule rule;
};

struct ExperimentSpec {
  SimConfig sim;
  ArrivalSource arrival_source = ArrivalSource::kProfile;
  std::filesystem::path trace_path;  // for the trace sources
  TraceScaling trace_scaling;
  // Trained estimator used to size tasks; the reference timing rule when
  // empty.
  std::filesystem::path estimator_model;
  std::vector<PolicySpec> policies;
  int replications = 10;
  int threads = 0;  // 0: one per hardware thread
  std::filesystem::path output_dir = "out";
  TrainingSpec training;
  EstimatorSpec estimator;

  ExperimentSpec();
  void validate() const;
};

bool operator==(const EstimatorSpec& a, const EstimatorSpec& b);
bool operator==(const ExperimentSpec& a, const ExperimentSpec& b);

// Flat "section.key=value" text; '#' starts a comment. Absent keys keep
// their defaults.
ExperimentSpec parse_config(std::istream& in);
ExperimentSpec parse_config(const std::filesystem::path& path);
// Every key with its current value, in a form parse_config accepts.
void format_config(std::ostream& out, const ExperimentSpec& spec);

// Resolves the trace settings into the simulator config (loads the trace
// file when one is configured).
SimConfig resolve_sim_config(const ExperimentSpec& spec);
DurationEstimator make_estimator(const ExperimentSpec& spec);

struct TrainedPolicy {
  std::shared_ptr<QTable> table;
  std::vector<TrainingStep> log;
};

// Q-learning against a continuing simulation that uses `scheduler`.
TrainedPolicy train_lrp(const ExperimentSpec& spec, SchedulerKind scheduler);

std::unique_ptr<ProvisioningPolicy> make_policy(const PolicySpec& policy,
                                                std::shared_ptr<const QTable> table);

struct PolicyRuns {
  PolicySpec policy;
  std::vector<RunReport> runs;  // index = replication
  std::shared_ptr<const QTable> table;
  std::vector<TrainingStep> training_log;
};

struct ExperimentResult {
  std::vector<PolicyRuns> policies;
};

// Replication r runs with seed sim.seed + r. Learned policies are trained
// once per scheduler, before any evaluation.
ExperimentResult run_experiment(const ExperimentSpec& spec);

struct PolicySummary {
  std::string policy;
  int replications = 0;
  double mean_profit = 0.0;
  double std_profit = 0.0;  // sample standard deviation
  double se_profit = 0.0;
  double mean_discounted_profit = 0.0;
  double std_discounted_profit = 0.0;
  double mean_revenue = 0.0;
  double mean_cost = 0.0;
};

PolicySummary summarize(const PolicyRuns& runs);

// Writes comparison.csv, cumulative_profit.csv, instances.csv, one report
// per run, and the Q-table and training log of each learned policy.
void emit_report(const ExperimentResult& result, const std::filesystem::path& out_dir);

// "FP(10)" -> "FP_10": safe for file names, distinct per policy label.
std::string file_label(const std::string& policy);

struct EstimatorEvaluation {
  std::vector<double> nn_errors;      // signed normalized errors, test split
  std::vector<double> linear_errors;  // same samples
  double nn_median_abs = 0.0;
  double linear_median_abs = 0.0;
  double nn_within_band = 0.0;  // fraction with |error| <= band
  int iterations = 0;
};

inline constexpr double kErrorBand = 0.08;

// Trains the network and the linear baseline on the same split and scores
// both on the test samples.
EstimatorEvaluation evaluate_estimator(std::span<const Sample> dataset,
                                       const TrainOptions& options, NeuralModel* model = nullptr);

double median(std::vector<double> values);

}  // namespace vtsim

#endif  // VTSIM_EXPERIMENT_H_
