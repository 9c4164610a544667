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

#ifndef VTSIM_PROVISIONER_H_
#define VTSIM_PROVISIONER_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vtsim/valuation.h"

namespace vtsim {

// Cost of one worker for one epoch.
struct CostConfig {
  Money vm_per_epoch;
};

CostConfig cost_from_pricing(const PricingConfig& pricing, double epoch_seconds);

// M(N_k) * C_v.
Money epoch_cost(int workers, const CostConfig& cost);

// Half-open buckets [e_i, e_{i+1}); values outside the edges clamp to the
// first or last bucket.
struct BinEdges {
  std::vector<double> edges;

  int bins() const { return static_cast<int>(edges.size()) - 1; }
  int index(double value) const;
  void validate() const;
  bool operator==(const BinEdges&) const = default;

  // {0, cap/2^(n-1), ..., cap/2, cap}.
  static BinEdges geometric(double cap, int bins);
  // n buckets centred on n evenly spaced points from lo to hi.
  static BinEdges centered(double lo, double hi, int bins);
};

struct StateBins {
  BinEdges omega = BinEdges::geometric(16.0, 8);         // dollars
  BinEdges lambda_per_min = BinEdges::centered(0.1, 0.7, 7);
  int max_workers = 30;

  void validate() const;
  bool operator==(const StateBins&) const = default;
};

// phi = (omega, m, lambda) after discretization.
struct CompactState {
  int omega_bin = 0;
  int workers = 0;
  int lambda_bin = 0;

  auto operator<=>(const CompactState&) const = default;
};

CompactState compact(double pending_value, int workers, double arrival_per_min,
                     const StateBins& bins);

// kInverseVisits: 1 / (1 + n). kPolynomial: (1 + n)^-exponent, which
// forgets early bootstrapped targets faster for exponent in (0.5, 1).
struct LearningRate {
  enum class Kind { kInverseVisits, kConstant, kPolynomial };
  Kind kind = Kind::kInverseVisits;
  double constant = 0.1;
  double exponent = 0.7;

  // delta for an entry that has been updated `visits` times before.
  double at(std::int64_t visits) const;
  bool operator==(const LearningRate&) const = default;
};

struct QLearningConfig {
  double gamma = 0.5;
  double initial_value = 0.0;  // C
  int max_step = 5;            // actions are -max_step..+max_step
  LearningRate learning_rate;

  void validate() const;
  bool operator==(const QLearningConfig&) const = default;
};

// Dense action-value table over every (CompactState, action) pair.
class QTable {
 public:
  QTable(const StateBins& bins, const QLearningConfig& config);

  const StateBins& bins() const { return bins_; }
  const QLearningConfig& config() const { return config_; }
  std::vector<int> actions() const;
  // m + action must stay within [0, max_workers].
  bool feasible(const CompactState& s, int action) const;

  double value(const CompactState& s, int action) const;
  void set_value(const CompactState& s, int action, double value);
  std::int64_t visits(const CompactState& s, int action) const;
  void add_visit(const CompactState& s, int action);

  // max over feasible actions.
  double best_value(const CompactState& s) const;
  // argmax over feasible actions, ties toward 0 and then smaller |action|.
  int greedy_action(const CompactState& s) const;

  std::size_t state_count() const;
  std::size_t entry_count() const { return values_.size(); }
  bool all_finite() const;

 private:
  std::size_t index(const CompactState& s, int action) const;

  StateBins bins_;
  QLearningConfig config_;
  std::vector<double> values_;
  std::vector<std::int64_t> visits_;
};

// Uniform feasible action with probability epsilon, greedy otherwise.
int select_action(const QTable& q, const CompactState& s, std::mt19937_64& rng,
                  double epsilon);

// Q(s,a) += delta * (reward + gamma * max_a' Q(s',a') - Q(s,a)). Returns the
// new Q(s,a). Does not touch the visit counter.
double q_update(QTable& q, const CompactState& s, int action, double reward,
                const CompactState& next, double learning_rate);
// Same, with delta from the table's schedule; counts the visit.
double q_update(QTable& q, const CompactState& s, int action, double reward,
                const CompactState& next);

// Slow-timescale MDP seen by the learner: observe phi_k, apply nu_k, get
// R^s_k and move to epoch k+1.
class ProvisioningEnvironment {
 public:
  virtual ~ProvisioningEnvironment() = default;
  virtual CompactState observe() = 0;
  virtual double step(int action) = 0;
};

// Geometric decay from `start` at loop 0 to `end` at the final loop.
struct EpsilonSchedule {
  double start = 0.3;
  double end = 0.01;

  double at(std::int64_t loop, std::int64_t loops) const;
  bool operator==(const EpsilonSchedule&) const = default;
};

struct TrainingStep {
  std::int64_t epoch = 0;
  CompactState state;
  int action = 0;
  double reward = 0.0;
};

// Runs `loops` epochs of epsilon-greedy Q-learning against `env`.
std::vector<TrainingStep> train_policy(ProvisioningEnvironment& env, QTable& q,
                                       std::int64_t loops, const EpsilonSchedule& epsilon,
                                       std::uint64_t seed);

// What a slow-timescale policy sees at an epoch boundary.
struct ProvisioningContext {
  std::int64_t epoch = 0;
  int workers = 0;               // m_{k-1}
  double arrival_per_min = 0.0;  // lambda_k
  double pending_value = 0.0;    // omega
  CompactState state;
};

class ProvisioningPolicy {
 public:
  virtual ~ProvisioningPolicy() = default;
  // nu_k; the caller applies max(0, m + nu).
  virtual int decide(const ProvisioningContext& context) = 0;
  virtual std::string name() const = 0;
};

std::unique_ptr<ProvisioningPolicy> fixed_policy(int workers);
std::unique_ptr<ProvisioningPolicy> arrival_rate_policy(double workers_per_task_per_min);
std::unique_ptr<ProvisioningPolicy> learned_policy(std::shared_ptr<const QTable> table);

// Rows "omega_bin,m,lambda_bin,action,q_value" for every entry.
void write_qtable(std::ostream& out, const QTable& q);
// Reads values back into a table of matching shape.
void read_qtable(std::istream& in, QTable& q);
// Rows "epoch,omega_bin,m,lambda_bin,action,reward".
void write_reward_log(std::ostream& out, const std::vector<TrainingStep>& log);

}  // namespace vtsim

#endif  // VTSIM_PROVISIONER_H_
