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

#include "vtsim/provisioner.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "vtsim/workload.h"

namespace vtsim {

CostConfig cost_from_pricing(const PricingConfig& pricing, double epoch_seconds) {
  return CostConfig{Money::from_dollars(pricing.vm_per_hour * epoch_seconds / 3600.0)};
}

Money epoch_cost(int workers, const CostConfig& cost) {
  if (workers < 0) throw std::invalid_argument("worker count must be >= 0");
  return cost.vm_per_epoch * workers;
}

int BinEdges::index(double value) const {
  // upper_bound gives the first edge strictly above value, so a value equal
  // to an edge lands in the bucket that starts there.
  const auto it = std::upper_bound(edges.begin(), edges.end(), value);
  const auto i = static_cast<int>(it - edges.begin()) - 1;
  return std::clamp(i, 0, bins() - 1);
}

void BinEdges::validate() const {
  if (edges.size() < 2) throw std::invalid_argument("bins need at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i - 1] < edges[i])) {
      throw std::invalid_argument("bin edges must be strictly increasing");
    }
  }
}

BinEdges BinEdges::geometric(double cap, int bins) {
  if (!(cap > 0.0) || bins < 1) throw std::invalid_argument("bad geometric bins");
  BinEdges b;
  b.edges.push_back(0.0);
  for (int i = bins - 1; i >= 0; --i) b.edges.push_back(cap / std::ldexp(1.0, i));
  return b;
}

BinEdges BinEdges::centered(double lo, double hi, int bins) {
  if (bins < 1 || !(lo < hi || bins == 1)) throw std::invalid_argument("bad centred bins");
  const double step = bins > 1 ? (hi - lo) / (bins - 1) : 1.0;
  BinEdges b;
  for (int i = 0; i <= bins; ++i) b.edges.push_back(lo + (i - 0.5) * step);
  return b;
}

void StateBins::validate() const {
  omega.validate();
  lambda_per_min.validate();
  if (max_workers < 1) throw std::invalid_argument("max_workers must be >= 1");
}

CompactState compact(double pending_value, int workers, double arrival_per_min,
                     const StateBins& bins) {
  return CompactState{bins.omega.index(pending_value),
                      std::clamp(workers, 0, bins.max_workers),
                      bins.lambda_per_min.index(arrival_per_min)};
}

double LearningRate::at(std::int64_t visits) const {
  if (kind == Kind::kConstant) return constant;
  if (kind == Kind::kPolynomial) return std::pow(1.0 + static_cast<double>(visits), -exponent);
  return 1.0 / (1.0 + static_cast<double>(visits));
}

void QLearningConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (max_step < 1) throw std::invalid_argument("action set needs max_step >= 1");
  if (!std::isfinite(initial_value)) throw std::invalid_argument("initial Q must be finite");
  if (learning_rate.kind == LearningRate::Kind::kConstant &&
      !(learning_rate.constant > 0.0 && learning_rate.constant <= 1.0)) {
    throw std::invalid_argument("constant learning rate must lie in (0, 1]");
  }
  if (learning_rate.kind == LearningRate::Kind::kPolynomial &&
      !(learning_rate.exponent > 0.5 && learning_rate.exponent <= 1.0)) {
    throw std::invalid_argument("polynomial learning-rate exponent must lie in (0.5, 1]");
  }
}

QTable::QTable(const StateBins& bins, const QLearningConfig& config)
    : bins_(bins), config_(config) {
  bins_.validate();
  config_.validate();
  const std::size_t n = state_count() * static_cast<std::size_t>(2 * config_.max_step + 1);
  values_.assign(n, config_.initial_value);
  visits_.assign(n, 0);
}

std::vector<int> QTable::actions() const {
  std::vector<int> a;
  for (int v = -config_.max_step; v <= config_.max_step; ++v) a.push_back(v);
  return a;
}

bool QTable::feasible(const CompactState& s, int action) const {
  const int m = s.workers + action;
  return std::abs(action) <= config_.max_step && m >= 0 && m <= bins_.max_workers;
}

std::size_t QTable::state_count() const {
  return static_cast<std::size_t>(bins_.omega.bins()) *
         static_cast<std::size_t>(bins_.max_workers + 1) *
         static_cast<std::size_t>(bins_.lambda_per_min.bins());
}

std::size_t QTable::index(const CompactState& s, int action) const {
  if (s.omega_bin < 0 || s.omega_bin >= bins_.omega.bins() || s.workers < 0 ||
      s.workers > bins_.max_workers || s.lambda_bin < 0 ||
      s.lambda_bin >= bins_.lambda_per_min.bins() || std::abs(action) > config_.max_step) {
    throw std::out_of_range("state or action outside the Q-table");
  }
  const std::size_t state =
      (static_cast<std::size_t>(s.omega_bin) * (bins_.max_workers + 1) + s.workers) *
          bins_.lambda_per_min.bins() +
      s.lambda_bin;
  return state * (2 * config_.max_step + 1) + (action + config_.max_step);
}

double QTable::value(const CompactState& s, int action) const { return values_[index(s, action)]; }

void QTable::set_value(const CompactState& s, int action, double value) {
  values_[index(s, action)] = value;
}

std::int64_t QTable::visits(const CompactState& s, int action) const {
  return visits_[index(s, action)];
}

void QTable::add_visit(const CompactState& s, int action) { ++visits_[index(s, action)]; }

double QTable::best_value(const CompactState& s) const {
  return value(s, greedy_action(s));
}

int QTable::greedy_action(const CompactState& s) const {
  // Preference order 0, -1, +1, -2, +2, ... so that only a strictly larger
  // value displaces an earlier candidate.
  int best = 0;
  double best_q = value(s, 0);
  for (int step = 1; step <= config_.max_step; ++step) {
    for (int a : {-step, step}) {
      if (!feasible(s, a)) continue;
      const double q = value(s, a);
      if (q > best_q) {
        best_q = q;
        best = a;
      }
    }
  }
  return best;
}

bool QTable::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

int select_action(const QTable& q, const CompactState& s, std::mt19937_64& rng,
                  double epsilon) {
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::vector<int> options;
      for (int a : q.actions()) {
        if (q.feasible(s, a)) options.push_back(a);
      }
      std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
      return options[pick(rng)];
    }
  }
  return q.greedy_action(s);
}

double q_update(QTable& q, const CompactState& s, int action, double reward,
                const CompactState& next, double learning_rate) {
  const double old = q.value(s, action);
  const double target = reward + q.config().gamma * q.best_value(next);
  const double updated = old + learning_rate * (target - old);
  q.set_value(s, action, updated);
  return updated;
}

double q_update(QTable& q, const CompactState& s, int action, double reward,
                const CompactState& next) {
  const double delta = q.config().learning_rate.at(q.visits(s, action));
  q.add_visit(s, action);
  return q_update(q, s, action, reward, next, delta);
}

double EpsilonSchedule::at(std::int64_t loop, std::int64_t loops) const {
  if (loops <= 1 || start <= 0.0 || end <= 0.0) return start;
  const double frac = static_cast<double>(loop) / static_cast<double>(loops - 1);
  return start * std::pow(end / start, std::clamp(frac, 0.0, 1.0));
}

std::vector<TrainingStep> train_policy(ProvisioningEnvironment& env, QTable& q,
                                       std::int64_t loops, const EpsilonSchedule& epsilon,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TrainingStep> log;
  log.reserve(static_cast<std::size_t>(std::max<std::int64_t>(loops, 0)));
  CompactState state = env.observe();
  for (std::int64_t k = 0; k < loops; ++k) {
    const int action = select_action(q, state, rng, epsilon.at(k, loops));
    const double reward = env.step(action);
    const CompactState next = env.observe();
    q_update(q, state, action, reward, next);
    log.push_back({k, state, action, reward});
    state = next;
  }
  return log;
}

namespace {

class FixedPolicy : public ProvisioningPolicy {
 public:
  explicit FixedPolicy(int workers) : workers_(workers) {
    if (workers < 0) throw std::invalid_argument("fixed worker count must be >= 0");
  }
  int decide(const ProvisioningContext& c) override { return workers_ - c.workers; }
  std::string name() const override { return "FP(" + std::to_string(workers_) + ")"; }

 private:
  int workers_;
};

class ArrivalRatePolicy : public ProvisioningPolicy {
 public:
  explicit ArrivalRatePolicy(double coefficient) : coefficient_(coefficient) {
    if (!(coefficient > 0.0)) throw std::invalid_argument("ARP coefficient must be > 0");
  }
  int decide(const ProvisioningContext& c) override {
    return static_cast<int>(std::lround(coefficient_ * c.arrival_per_min)) - c.workers;
  }
  std::string name() const override {
    std::ostringstream s;
    s << "ARP(" << coefficient_ << ")";
    return s.str();
  }

 private:
  double coefficient_;
};

class LearnedPolicy : public ProvisioningPolicy {
 public:
  explicit LearnedPolicy(std::shared_ptr<const QTable> table) : table_(std::move(table)) {
    if (!table_) throw std::invalid_argument("learned policy needs a Q-table");
  }
  int decide(const ProvisioningContext& c) override {
    return table_->greedy_action(c.state);
  }
  std::string name() const override { return "LRP"; }

 private:
  std::shared_ptr<const QTable> table_;
};

}  // namespace

std::unique_ptr<ProvisioningPolicy> fixed_policy(int workers) {
  return std::make_unique<FixedPolicy>(workers);
}

std::unique_ptr<ProvisioningPolicy> arrival_rate_policy(double workers_per_task_per_min) {
  return std::make_unique<ArrivalRatePolicy>(workers_per_task_per_min);
}

std::unique_ptr<ProvisioningPolicy> learned_policy(std::shared_ptr<const QTable> table) {
  return std::make_unique<LearnedPolicy>(std::move(table));
}

void write_qtable(std::ostream& out, const QTable& q) {
  const StateBins& b = q.bins();
  const auto old_precision = out.precision(17);
  out << "omega_bin,m,lambda_bin,action,q_value\n";
  for (int w = 0; w < b.omega.bins(); ++w) {
    for (int m = 0; m <= b.max_workers; ++m) {
      for (int l = 0; l < b.lambda_per_min.bins(); ++l) {
        for (int a : q.actions()) {
          out << w << ',' << m << ',' << l << ',' << a << ',' << q.value({w, m, l}, a) << '\n';
        }
      }
    }
  }
  out.precision(old_precision);
}

void read_qtable(std::istream& in, QTable& q) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("omega_bin,m,lambda_bin,action,q_value", 0) != 0) {
    throw ParseError("row 1: expected Q-table header", 1);
  }
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    int w = 0, m = 0, l = 0, a = 0;
    double v = 0.0;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    if (!(ls >> w >> c1 >> m >> c2 >> l >> c3 >> a >> c4 >> v) || c1 != ',' || c2 != ',' ||
        c3 != ',' || c4 != ',') {
      throw ParseError("row " + std::to_string(row) + ": malformed Q-table row", row);
    }
    try {
      q.set_value({w, m, l}, a, v);
    } catch (const std::out_of_range&) {
      throw ParseError("row " + std::to_string(row) + ": entry outside the table shape", row);
    }
  }
}

void write_reward_log(std::ostream& out, const std::vector<TrainingStep>& log) {
  const auto old_precision = out.precision(17);
  out << "epoch,omega_bin,m,lambda_bin,action,reward\n";
  for (const TrainingStep& s : log) {
    out << s.epoch << ',' << s.state.omega_bin << ',' << s.state.workers << ','
        << s.state.lambda_bin << ',' << s.action << ',' << s.reward << '\n';
  }
  out.precision(old_precision);
}

}  // namespace vtsim
