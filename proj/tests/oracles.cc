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

#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace vtsim::oracle {

double mc_block_completion(int m, double F, int g, int draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> residual(0.0, F);
  double sum = 0.0;
  for (int d = 0; d < draws; ++d) {
    std::priority_queue<double, std::vector<double>, std::greater<>> idle_at;
    idle_at.push(0.0);
    for (int w = 1; w < m; ++w) idle_at.push(residual(rng));
    double dispatch = 0.0;
    for (int k = 0; k < g; ++k) {
      dispatch = idle_at.top();
      idle_at.pop();
      idle_at.push(dispatch + F);
    }
    sum += dispatch + F;
  }
  return sum / draws;
}

double closed_form_completion(int m, double F, int g) { return F / m * (g - 1) + F; }

double order_revenue(std::span<const ValuedTask> order, double F, int m, double t0) {
  double revenue = 0.0;
  long blocks = 0;
  for (const ValuedTask& vt : order) {
    blocks += vt.task.block_count - vt.task.blocks_dispatched;
    const double f = t0 + F / m * static_cast<double>(blocks - 1) + F;
    const auto& e = std::get<ExponentialValuation>(vt.valuation);
    revenue += std::pow(e.alpha_slot, f - static_cast<double>(vt.task.arrival)) *
               e.price_per_slot * e.duration_slots;
  }
  return revenue;
}

double best_revenue(std::vector<ValuedTask> tasks, double F, int m, double t0) {
  std::sort(tasks.begin(), tasks.end(),
            [](const ValuedTask& a, const ValuedTask& b) { return a.task.id < b.task.id; });
  double best = -std::numeric_limits<double>::infinity();
  do {
    best = std::max(best, order_revenue(tasks, F, m, t0));
  } while (std::next_permutation(
      tasks.begin(), tasks.end(),
      [](const ValuedTask& a, const ValuedTask& b) { return a.task.id < b.task.id; }));
  return best;
}

ValuedTask random_exponential_task(std::mt19937_64& rng, std::uint64_t id, double F,
                                   int max_blocks, double max_arrival,
                                   const PricingConfig& pricing) {
  std::uniform_int_distribution<int> blocks(1, max_blocks);
  std::uniform_real_distribution<double> fill(0.05, 1.0);
  std::uniform_int_distribution<long> arrival(0, static_cast<long>(max_arrival));
  std::uniform_int_distribution<int> level(0, 2);
  const int b = blocks(rng);
  // Estimated duration somewhere inside the last block.
  const double D = F * (b - 1) + F * fill(rng);
  ValuedTask vt;
  vt.task.id = id;
  vt.task.arrival = arrival(rng);
  vt.task.block_count = b;
  vt.task.estimated_slots = D;
  const double price_per_slot = pricing.price_per_min[static_cast<std::size_t>(level(rng))] / 60.0;
  vt.valuation = ExponentialValuation{pricing.alpha_per_s, price_per_slot, D};
  return vt;
}

std::vector<double> SyntheticMdp::next_omega(int omega, int m_next) const {
  // More workers drain the backlog faster.
  const double up = 0.55 - 0.15 * m_next;
  const double down = 0.1 + 0.2 * m_next;
  std::vector<double> p(static_cast<std::size_t>(omega_bins), 0.0);
  const int hi = std::min(omega + 1, omega_bins - 1);
  const int lo = std::max(omega - 1, 0);
  const double up_p = std::max(0.0, up);
  const double down_p = std::min(down, 1.0 - up_p);
  p[static_cast<std::size_t>(hi)] += up_p;
  p[static_cast<std::size_t>(lo)] += down_p;
  p[static_cast<std::size_t>(omega)] += 1.0 - up_p - down_p;
  return p;
}

double SyntheticMdp::reward(int omega, int m_next) const {
  // Best served by one worker more than the backlog level.
  const double miss = m_next - (omega + 1.0);
  return 2.0 - 0.8 * miss * miss - 0.5 * omega;
}

StateBins SyntheticMdp::bins() const {
  StateBins b;
  b.omega.edges.clear();
  for (int i = 0; i <= omega_bins; ++i) b.omega.edges.push_back(i);
  b.lambda_per_min.edges = {0.0, 1.0};
  b.max_workers = max_workers;
  return b;
}

std::vector<std::vector<double>> value_iteration(const SyntheticMdp& mdp, double gamma,
                                                 double tolerance) {
  const int actions = 2 * mdp.max_step + 1;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> q(static_cast<std::size_t>(mdp.states()),
                                     std::vector<double>(static_cast<std::size_t>(actions), nan));
  std::vector<double> v(static_cast<std::size_t>(mdp.states()), 0.0);
  for (int iter = 0; iter < 100000; ++iter) {
    double change = 0.0;
    for (int omega = 0; omega < mdp.omega_bins; ++omega) {
      for (int m = 0; m <= mdp.max_workers; ++m) {
        const auto s = static_cast<std::size_t>(mdp.index(omega, m));
        for (int a = -mdp.max_step; a <= mdp.max_step; ++a) {
          if (!mdp.feasible(m, a)) continue;
          const int m2 = m + a;
          const std::vector<double> p = mdp.next_omega(omega, m2);
          double expected = 0.0;
          for (int o2 = 0; o2 < mdp.omega_bins; ++o2) {
            expected += p[static_cast<std::size_t>(o2)] * v[static_cast<std::size_t>(mdp.index(o2, m2))];
          }
          const double value = mdp.reward(omega, m2) + gamma * expected;
          auto& slot = q[s][static_cast<std::size_t>(a + mdp.max_step)];
          if (!std::isnan(slot)) change = std::max(change, std::abs(value - slot));
          else change = std::max(change, std::abs(value));
          slot = value;
        }
      }
    }
    for (std::size_t s = 0; s < v.size(); ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (double x : q[s]) {
        if (!std::isnan(x)) best = std::max(best, x);
      }
      v[s] = best;
    }
    if (change < tolerance) return q;
  }
  throw std::runtime_error("value iteration did not converge");
}

SyntheticMdpEnvironment::SyntheticMdpEnvironment(const SyntheticMdp& mdp, std::uint64_t seed)
    : mdp_(mdp), rng_(seed) {}

CompactState SyntheticMdpEnvironment::observe() { return CompactState{omega_, m_, 0}; }

double SyntheticMdpEnvironment::step(int action) {
  if (!mdp_.feasible(m_, action)) throw std::invalid_argument("infeasible action");
  const int m2 = m_ + action;
  double r = mdp_.reward(omega_, m2);
  if (mdp_.reward_noise > 0.0) {
    r += std::uniform_real_distribution<double>(-mdp_.reward_noise, mdp_.reward_noise)(rng_);
  }
  const std::vector<double> p = mdp_.next_omega(omega_, m2);
  std::discrete_distribution<int> pick(p.begin(), p.end());
  omega_ = pick(rng_);
  m_ = m2;
  return r;
}

}  // namespace vtsim::oracle
