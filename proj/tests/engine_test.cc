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

#include "vtsim/engine.h"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "oracles.h"

namespace vtsim {
namespace {

DurationEstimator constant_seconds(double s) {
  return [s](const MediaFeatures&) { return s; };
}

const MediaFeatures kClip{600, 2000, 30, 1920.0 * 1080, 1280.0 * 720};

SimConfig small_config() {
  SimConfig c;
  c.epoch_slots = 600;
  c.block_slots = 60;
  c.horizon_epochs = 6;
  c.initial_workers = 2;
  c.rates_per_min = {0.5, 1.0, 2.0};
  c.seed = 7;
  return c;
}

double exp_value(const PricingConfig& p, ServiceLevel level, double d_slots, double delay) {
  return std::pow(p.alpha_per_s, delay) * p.price_for(level) / 60.0 * d_slots;
}

std::string report_text(const RunReport& r) {
  std::ostringstream out;
  write_run_report(out, r);
  return out.str();
}

TEST(Engine, NoWorkersQueueGrowsWithoutRevenue) {
  SimConfig c = small_config();
  c.initial_workers = 0;
  auto fp = fixed_policy(0);
  const RunReport r = run(c, *fp, constant_seconds(300));
  EXPECT_EQ(r.revenue, Money());
  EXPECT_EQ(r.cost, Money());
  std::size_t prev = 0;
  for (const EpochReport& e : r.epochs) {
    EXPECT_GE(e.queue_length, prev);
    EXPECT_EQ(e.tasks_completed, 0);
    prev = e.queue_length;
  }
  EXPECT_GT(prev, 0u);
}

TEST(Engine, SingleBlockRevenueBookedAfterF) {
  SimConfig c = small_config();
  c.block_slots = 3;
  c.initial_workers = 1;
  c.rates_per_min = {0.0};
  Simulator sim(c, constant_seconds(2));
  sim.submit(ServiceLevel::kLevel1, kClip);
  std::vector<SlotEvent> all;
  for (int t = 0; t < 6; ++t) {
    auto ev = sim.step_slot();
    all.insert(all.end(), ev.begin(), ev.end());
  }
  int completions = 0;
  for (const SlotEvent& e : all) {
    if (e.kind == SlotEvent::Kind::kBlockDispatched) EXPECT_EQ(e.slot, 0);
    if (e.kind == SlotEvent::Kind::kTaskCompleted) {
      ++completions;
      EXPECT_EQ(e.slot, 3);
    }
  }
  EXPECT_EQ(completions, 1);
  EXPECT_EQ(sim.total_revenue(),
            Money::from_dollars(exp_value(c.pricing, ServiceLevel::kLevel1, 2.0, 3.0)));
}

TEST(Engine, HandTraceWithPreloadedWorkers) {
  SimConfig c = small_config();
  c.block_slots = 3;
  c.initial_workers = 3;
  c.rates_per_min = {0.0};
  Simulator sim(c, constant_seconds(3));
  const std::vector<Slot> residuals{1, 2, 3};
  sim.preload_workers(residuals);
  const ServiceLevel levels[] = {ServiceLevel::kLevel3, ServiceLevel::kLevel1,
                                 ServiceLevel::kLevel2, ServiceLevel::kLevel3,
                                 ServiceLevel::kLevel1};
  std::map<std::uint64_t, ServiceLevel> level_of;
  for (ServiceLevel l : levels) level_of[sim.submit(l, kClip)] = l;

  std::map<std::uint64_t, Slot> done;
  for (int t = 0; t < 12; ++t) {
    for (const SlotEvent& e : sim.step_slot()) {
      if (e.kind == SlotEvent::Kind::kTaskCompleted) done[e.task_id] = e.slot;
    }
  }
  ASSERT_EQ(done.size(), 5u);
  // Workers free at slots 0, 1, 2, then 3 and 4; higher prices go first.
  std::multimap<ServiceLevel, Slot> by_level;
  for (const auto& [id, slot] : done) by_level.emplace(level_of[id], slot);
  std::vector<Slot> order;
  for (const auto& [l, slot] : by_level) order.push_back(slot);
  std::vector<Slot> sorted_l1{order[0], order[1]};
  std::sort(sorted_l1.begin(), sorted_l1.end());
  EXPECT_EQ(sorted_l1, (std::vector<Slot>{3, 4}));
  EXPECT_EQ(order[2], 5);
  std::vector<Slot> sorted_l3{order[3], order[4]};
  std::sort(sorted_l3.begin(), sorted_l3.end());
  EXPECT_EQ(sorted_l3, (std::vector<Slot>{6, 7}));

  Money expected;
  for (const auto& [id, slot] : done) {
    expected += Money::from_dollars(
        exp_value(c.pricing, level_of[id], 3.0, static_cast<double>(slot)));
  }
  EXPECT_EQ(sim.total_revenue(), expected);
}

TEST(Engine, ZeroArrivalsCostOnly) {
  SimConfig c;
  c.rates_per_min = {0.0};
  c.horizon_epochs = 1;
  c.initial_workers = 0;
  auto none = fixed_policy(0);
  EXPECT_EQ(run(c, *none, constant_seconds(60)).profit, Money());
  c.initial_workers = 10;
  auto ten = fixed_policy(10);
  const RunReport r = run(c, *ten, constant_seconds(60));
  EXPECT_EQ(r.profit, Money::from_dollars(-2.52));
  ASSERT_EQ(r.epochs.size(), 1u);
  EXPECT_EQ(r.epochs[0].workers, 10);
}

TEST(Engine, HorizonOneProducesOneEpoch) {
  SimConfig c = small_config();
  c.horizon_epochs = 1;
  auto fp = fixed_policy(2);
  const RunReport r = run(c, *fp, constant_seconds(200));
  ASSERT_EQ(r.epochs.size(), 1u);
  EXPECT_DOUBLE_EQ(r.discounted_profit, r.profit.dollars());
}

TEST(Engine, FewerWorkersWinAtLowLoad) {
  SimConfig c;
  c.rates_per_min = {0.1};
  c.horizon_epochs = 6;
  auto fp10 = fixed_policy(10);
  auto fp15 = fixed_policy(15);
  const RunReport a = run(c, *fp10, constant_seconds(600));
  const RunReport b = run(c, *fp15, constant_seconds(600));
  EXPECT_GT(a.profit, b.profit);
  EXPECT_EQ(b.cost.nanos() * 10, a.cost.nanos() * 15);
}

TEST(Engine, DeterministicReports) {
  SimConfig c = small_config();
  auto fp = fixed_policy(3);
  const std::string first = report_text(run(c, *fp, constant_seconds(250)));
  EXPECT_EQ(first, report_text(run(c, *fp, constant_seconds(250))));
  c.seed = 8;
  EXPECT_NE(first, report_text(run(c, *fp, constant_seconds(250))));
}

TEST(Engine, AccountingAndWorkConservation) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (SchedulerKind kind : {SchedulerKind::kValueBased, SchedulerKind::kHighestValueFirst}) {
      SimConfig c = small_config();
      c.seed = seed;
      c.scheduler = kind;
      auto arp = arrival_rate_policy(4);
      const RunReport r = run(c, *arp, constant_seconds(170));
      Money revenue;
      Money cost;
      Money profit;
      for (const EpochReport& e : r.epochs) {
        EXPECT_EQ(e.profit, e.revenue - e.cost);
        revenue += e.revenue;
        cost += e.cost;
        profit += e.profit;
      }
      EXPECT_EQ(revenue, r.revenue);
      EXPECT_EQ(cost, r.cost);
      EXPECT_EQ(profit, r.profit);
      EXPECT_EQ(r.profit, r.revenue - r.cost);
      EXPECT_EQ(r.completed_blocks * c.block_slots + r.in_flight_work_slots, r.busy_worker_slots);
      EXPECT_GT(r.completed_blocks, 0);
    }
  }
}

TEST(Engine, RevenueOnlyFromCompletions) {
  SimConfig c = small_config();
  auto fp = fixed_policy(1);
  const RunReport r = run(c, *fp, constant_seconds(400));
  for (const EpochReport& e : r.epochs) {
    if (e.tasks_completed == 0) EXPECT_EQ(e.revenue, Money());
    if (e.revenue > Money()) EXPECT_GT(e.tasks_completed, 0);
  }
}

TEST(Engine, QueueShrinksWithMoreWorkers) {
  for (SchedulerKind kind : {SchedulerKind::kValueBased, SchedulerKind::kHighestValueFirst}) {
    SimConfig c = small_config();
    c.rates_per_min = {3.0};
    c.horizon_epochs = 1;
    c.scheduler = kind;
    c.valuation.kind = ValuationKind::kLinear;  // nothing expires
    std::vector<std::size_t> prev;
    for (int m : {1, 2, 4, 8}) {
      c.initial_workers = m;
      Simulator sim(c, constant_seconds(120));
      std::vector<std::size_t> lengths;
      for (Slot t = 0; t < c.epoch_slots; ++t) {
        sim.step_slot();
        lengths.push_back(sim.queue().size());
      }
      if (!prev.empty()) {
        for (std::size_t t = 0; t < lengths.size(); ++t) {
          ASSERT_LE(lengths[t], prev[t]) << "m=" << m << " slot " << t;
        }
      }
      prev = lengths;
    }
  }
}

TEST(Engine, ExpectedBlockCompletionMatchesClosedForm) {
  const Slot F = 180;
  const int draws = 3000;
  for (int m : {1, 3, 5}) {
    std::map<int, double> sums;
    std::mt19937_64 rng(static_cast<std::uint64_t>(m));
    std::uniform_int_distribution<Slot> residual(1, F);
    for (int d = 0; d < draws; ++d) {
      SimConfig c;
      c.block_slots = F;
      c.initial_workers = m;
      c.rates_per_min = {0.0};
      Simulator sim(c, constant_seconds(12.0 * F));
      std::vector<Slot> res;
      for (int i = 0; i < m - 1; ++i) res.push_back(residual(rng));
      sim.preload_workers(res);
      const std::uint64_t id = sim.submit(ServiceLevel::kLevel1, kClip);
      int seen = 0;
      while (seen < 12) {
        for (const SlotEvent& e : sim.step_slot()) {
          if (e.kind != SlotEvent::Kind::kBlockCompleted || e.task_id != id) continue;
          sums[e.block_index + 1] += static_cast<double>(e.slot);
          ++seen;
        }
      }
    }
    for (int g : {1, 4, 12}) {
      const double mean = sums[g] / draws;
      const double expected = oracle::closed_form_completion(m, static_cast<double>(F), g);
      EXPECT_NEAR(mean, expected, 0.01 * expected) << "m=" << m << " g=" << g;
    }
  }
}

TEST(Engine, WorthlessQueuedTasksExpire) {
  SimConfig c = small_config();
  c.initial_workers = 0;
  c.valuation.kind = ValuationKind::kStep;
  c.valuation.step_deadline_s = 100;
  auto none = fixed_policy(0);
  const RunReport step = run(c, *none, constant_seconds(300));
  EXPECT_GT(step.expired_tasks, 0);
  EXPECT_LT(step.epochs.back().queue_length, 10u);

  c.valuation.kind = ValuationKind::kLinear;
  const RunReport linear = run(c, *none, constant_seconds(300));
  EXPECT_EQ(linear.expired_tasks, 0);
  EXPECT_GT(linear.epochs.back().queue_length, step.epochs.back().queue_length);
}

TEST(Engine, RetiringWorkerFinishesItsBlock) {
  SimConfig c = small_config();
  c.block_slots = 3;
  c.initial_workers = 1;
  c.rates_per_min = {0.0};
  Simulator sim(c, constant_seconds(3));
  sim.submit(ServiceLevel::kLevel1, kClip);
  sim.step_slot();  // dispatched at slot 0
  sim.set_workers(0);
  EXPECT_EQ(sim.workers(), 0);
  sim.submit(ServiceLevel::kLevel1, kClip);
  int completed = 0;
  for (int t = 0; t < 10; ++t) {
    for (const SlotEvent& e : sim.step_slot()) {
      completed += e.kind == SlotEvent::Kind::kTaskCompleted;
      EXPECT_NE(e.kind, SlotEvent::Kind::kBlockDispatched);
    }
  }
  EXPECT_EQ(completed, 1);
  EXPECT_EQ(sim.queue().size(), 1u);
  // Growing again restarts service.
  sim.set_workers(1);
  for (int t = 0; t < 5; ++t) sim.step_slot();
  EXPECT_EQ(sim.queue().size(), 0u);
}

TEST(Engine, ContextReflectsState) {
  SimConfig c = small_config();
  Simulator sim(c, constant_seconds(100));
  EXPECT_EQ(sim.context().workers, 2);
  EXPECT_DOUBLE_EQ(sim.context().arrival_per_min, 0.5);
  EXPECT_DOUBLE_EQ(sim.arrival_per_min(4), 1.0);
  EXPECT_DOUBLE_EQ(sim.pending_value(), 0.0);
  sim.submit(ServiceLevel::kLevel2, kClip);
  EXPECT_NEAR(sim.pending_value(), exp_value(c.pricing, ServiceLevel::kLevel2, 100, 0), 1e-12);
}

TEST(Engine, InvalidConfigRejected) {
  SimConfig c = small_config();
  c.block_slots = 0;
  EXPECT_THROW(Simulator(c, constant_seconds(1)), std::invalid_argument);
  c = small_config();
  EXPECT_THROW(Simulator(c, DurationEstimator{}), std::invalid_argument);
  Simulator sim(small_config(), constant_seconds(1));
  const std::vector<Slot> too_long{61};
  EXPECT_THROW(sim.preload_workers(too_long), std::invalid_argument);
  sim.step_slot();
  EXPECT_THROW(sim.run_epoch(0), std::logic_error);
}

TEST(Engine, SimulationEnvironmentRepeatsProfile) {
  SimConfig c = small_config();
  c.horizon_epochs = 1;
  SimulationEnvironment env(c, constant_seconds(100));
  for (int k = 0; k < 7; ++k) {
    const CompactState s = env.observe();
    EXPECT_GE(s.workers, 0);
    EXPECT_TRUE(std::isfinite(env.step(k % 2 == 0 ? 1 : -1)));
  }
  EXPECT_EQ(env.simulator().epoch(), 7);
}

TEST(Engine, RunReportFormat) {
  SimConfig c = small_config();
  auto fp = fixed_policy(2);
  const std::string text = report_text(run(c, *fp, constant_seconds(100)));
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("epoch,action,workers,", 0), 0u);
  int rows = 0;
  std::string last;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, 7);
  EXPECT_EQ(last.rfind("# summary,policy=FP(2),", 0), 0u);
}

}  // namespace
}  // namespace vtsim
