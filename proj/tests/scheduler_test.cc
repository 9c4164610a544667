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

#include "vtsim/scheduler.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "oracles.h"

namespace vtsim {
namespace {

ValuedTask exp_task(std::uint64_t id, Slot arrival, int blocks, double price_per_slot, double D,
                    double alpha = 0.999) {
  ValuedTask vt;
  vt.task.id = id;
  vt.task.arrival = arrival;
  vt.task.block_count = blocks;
  vt.task.estimated_slots = D;
  vt.valuation = ExponentialValuation{alpha, price_per_slot, D};
  return vt;
}

QueueState queue_of(std::vector<ValuedTask> tasks, Slot F, int m) {
  QueueState q;
  q.tasks = std::move(tasks);
  q.block_slots = F;
  q.workers = m;
  return q;
}

std::vector<std::uint64_t> ids(const QueueState& q) {
  std::vector<std::uint64_t> out;
  for (const auto& vt : q.tasks) out.push_back(vt.task.id);
  return out;
}

TEST(ExpectedCompletion, SingleWorkerPrefixSums) {
  const QueueState q = queue_of({exp_task(1, 0, 2, 0.001, 300), exp_task(2, 0, 3, 0.001, 500)}, 180, 1);
  const ScheduleEstimate est = expected_completion(q, 1000);
  ASSERT_EQ(est.size(), 2u);
  EXPECT_DOUBLE_EQ(est[0].expected_completion, 1000 + 180 * 2);
  EXPECT_DOUBLE_EQ(est[1].expected_completion, 1000 + 180 * 5);
  EXPECT_EQ(est[0].cumulative_blocks, 2);
  EXPECT_EQ(est[1].cumulative_blocks, 5);
  EXPECT_DOUBLE_EQ(est[1].gap, 180.0 * 3);
}

TEST(ExpectedCompletion, FirstSingleBlockTask) {
  const QueueState q = queue_of({exp_task(1, 0, 1, 0.001, 100)}, 180, 10);
  EXPECT_DOUBLE_EQ(expected_completion(q, 50)[0].expected_completion, 50 + 180);
}

TEST(ExpectedCompletion, MatchesMonteCarlo) {
  const QueueState q = queue_of({exp_task(1, 0, 2, 0.001, 300), exp_task(2, 0, 2, 0.001, 300)}, 180, 3);
  const ScheduleEstimate est = expected_completion(q, 0);
  // Task completion is the completion of its last block, g = 2 and g = 4.
  const double mc1 = oracle::mc_block_completion(3, 180, 2, 100000, 1);
  const double mc2 = oracle::mc_block_completion(3, 180, 4, 100000, 2);
  EXPECT_NEAR(est[0].expected_completion, mc1, 0.01 * mc1);
  EXPECT_NEAR(est[1].expected_completion, mc2, 0.01 * mc2);
}

TEST(ExpectedCompletion, ZeroWorkersThrows) {
  const QueueState q = queue_of({exp_task(1, 0, 1, 0.001, 100)}, 180, 0);
  EXPECT_THROW(expected_completion(q, 0), NoCapacityError);
}

TEST(ExpectedCompletion, CountsOnlyUndispatchedBlocks) {
  QueueState q = queue_of({exp_task(1, 0, 3, 0.001, 500), exp_task(2, 0, 1, 0.001, 100)}, 100, 1);
  q.tasks[0].task.blocks_dispatched = 2;
  q.head_locked = true;
  const ScheduleEstimate est = expected_completion(q, 0);
  EXPECT_EQ(est[0].cumulative_blocks, 1);
  EXPECT_EQ(est[1].cumulative_blocks, 2);
}

TEST(Weight, IdenticalTasksHaveEqualWeight) {
  const ValuedTask a = exp_task(1, 10, 3, 0.0003, 500);
  const ValuedTask b = exp_task(2, 10, 3, 0.0003, 500);
  EXPECT_DOUBLE_EQ(weight(a.valuation, a.task, 180, 4), weight(b.valuation, b.task, 180, 4));
}

TEST(Weight, ExponentialFormula) {
  const ValuedTask a = exp_task(1, 20, 2, 0.0003, 300, 0.99);
  const double d = 180.0 / 3 * 2;
  const double expected = std::pow(0.99, d - 20) * 0.0003 * 300 / (1 - std::pow(0.99, d));
  EXPECT_NEAR(weight(a.valuation, a.task, 180, 3), expected, 1e-12 * expected);
  EXPECT_NEAR(std::exp(log_weight(a.valuation, a.task, 180, 3)), expected, 1e-10 * expected);
}

TEST(Weight, LinearAndStep) {
  Task t;
  t.block_count = 1;
  EXPECT_DOUBLE_EQ(weight(LinearValuation{1.0, 0.002}, t, 36, 1), 0.002 / 36);
  EXPECT_DOUBLE_EQ(weight(StepValuation{1.0, 100}, t, 10, 1), 0.1);
}

TEST(Weight, DegenerateCases) {
  Task t;
  t.block_count = 1;
  EXPECT_THROW(weight(ExponentialValuation{1.0, 0.001, 10}, t, 10, 1), DegenerateWeightError);
  t.block_count = 0;
  EXPECT_THROW(weight(StepValuation{1.0, 10}, t, 10, 1), DegenerateWeightError);
}

TEST(Reorder, SortedQueueUnchanged) {
  QueueState q = queue_of({exp_task(1, 0, 1, 0.001, 150), exp_task(2, 0, 2, 0.0005, 300),
                           exp_task(3, 0, 5, 0.0001, 900)},
                          180, 2);
  reorder(q, 0);
  const auto first = ids(q);
  reorder(q, 0);
  EXPECT_EQ(ids(q), first);
  EXPECT_EQ(first, (std::vector<std::uint64_t>{1, 2, 3}));
}

TEST(Reorder, SixTasksMatchExhaustiveSearch) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ValuedTask> tasks;
    for (std::uint64_t i = 1; i <= 6; ++i) {
      tasks.push_back(oracle::random_exponential_task(rng, i, 180, 6, 1200));
    }
    QueueState q = queue_of(tasks, 180, 3);
    reorder(q, 1200);
    const double got = oracle::order_revenue(q.tasks, 180, 3, 1200);
    const double best = oracle::best_revenue(tasks, 180, 3, 1200);
    EXPECT_NEAR(got, best, 1e-9 * best);
  }
}

TEST(Reorder, StartedHeadStays) {
  QueueState q = queue_of({exp_task(1, 0, 9, 0.00001, 1600), exp_task(2, 0, 1, 0.001, 100),
                           exp_task(3, 0, 2, 0.001, 300)},
                          180, 2);
  q.tasks[0].task.blocks_dispatched = 1;
  q.head_locked = true;
  reorder(q, 0);
  EXPECT_EQ(ids(q), (std::vector<std::uint64_t>{1, 3, 2}));
  q.head_locked = false;
  q.tasks[0].task.blocks_dispatched = 0;
  reorder(q, 0);
  EXPECT_EQ(q.tasks.back().task.id, 1u);
}

TEST(Reorder, ExponentialOrderIndependentOfTime) {
  std::mt19937_64 rng(23);
  std::vector<ValuedTask> tasks;
  for (std::uint64_t i = 1; i <= 12; ++i) tasks.push_back(oracle::random_exponential_task(rng, i, 180, 8, 3000));
  QueueState a = queue_of(tasks, 180, 4);
  QueueState b = a;
  reorder(a, 3000);
  reorder(b, 9000);
  EXPECT_EQ(ids(a), ids(b));
}

TEST(Reorder, TiesByArrivalThenId) {
  QueueState q = queue_of({exp_task(5, 10, 2, 0.001, 300), exp_task(3, 10, 2, 0.001, 300),
                           exp_task(4, 10, 2, 0.001, 300)},
                          180, 2);
  // Same weight needs the same arrival, so arrival ties are broken by id.
  reorder(q, 10);
  EXPECT_EQ(ids(q), (std::vector<std::uint64_t>{3, 4, 5}));
}

TEST(NextBlock, WalksHeadThenNextTask) {
  QueueState q = queue_of({exp_task(1, 0, 3, 0.001, 500), exp_task(2, 0, 1, 0.001, 100)}, 180, 2);
  auto g = next_block(q);
  ASSERT_TRUE(g);
  EXPECT_EQ(g->task_id, 1u);
  EXPECT_EQ(g->block_index, 0);
  EXPECT_TRUE(q.head_locked);
  next_block(q);
  g = next_block(q);
  EXPECT_TRUE(g->last_block);
  ASSERT_TRUE(g->released);
  EXPECT_EQ(g->released->task.blocks_dispatched, 3);
  EXPECT_FALSE(q.head_locked);
  g = next_block(q);
  EXPECT_EQ(g->task_id, 2u);
  EXPECT_EQ(g->block_index, 0);
  EXPECT_TRUE(q.empty());
  EXPECT_FALSE(next_block(q));
}

TEST(NextBlock, DispatchConservation) {
  std::mt19937_64 rng(2);
  std::vector<ValuedTask> tasks;
  int total = 0;
  for (std::uint64_t i = 1; i <= 30; ++i) {
    tasks.push_back(oracle::random_exponential_task(rng, i, 180, 6, 100));
    total += tasks.back().task.block_count;
  }
  QueueState q = queue_of(tasks, 180, 3);
  std::map<std::uint64_t, std::set<int>> seen;
  int handed = 0;
  while (auto g = next_block(q)) {
    EXPECT_TRUE(seen[g->task_id].insert(g->block_index).second);
    ++handed;
    if (handed % 7 == 0) reorder(q, 100);
  }
  EXPECT_EQ(handed, total);
}

TEST(Hvf, EqualValuesKeepArrivalOrder) {
  auto flat = [](std::uint64_t id, Slot arrival) {
    ValuedTask vt = exp_task(id, arrival, 1, 0.001, 100);
    vt.valuation = StepValuation{0.1, 1000};
    return vt;
  };
  QueueState q = queue_of({flat(2, 5), flat(1, 5), flat(3, 4)}, 180, 1);
  hvf_order(q, 10);
  EXPECT_EQ(ids(q), (std::vector<std::uint64_t>{3, 1, 2}));
}

TEST(Hvf, DominantValueFirst) {
  QueueState q = queue_of({exp_task(1, 0, 1, 0.001, 100), exp_task(2, 0, 8, 0.01, 1400)}, 180, 1);
  hvf_order(q, 0);
  EXPECT_EQ(q.tasks.front().task.id, 2u);
}

TEST(Hvf, ValueBasedBeatsHvfOnLargeCheapTask) {
  // One long task worth the most, three short tasks worth a bit less each.
  std::vector<ValuedTask> tasks = {exp_task(1, 0, 20, 0.0003, 3600), exp_task(2, 0, 1, 0.0006, 150),
                                   exp_task(3, 0, 1, 0.0006, 160), exp_task(4, 0, 1, 0.0006, 170)};
  QueueState vbs = queue_of(tasks, 180, 2);
  QueueState hvf = vbs;
  reorder(vbs, 0);
  hvf_order(hvf, 0);
  EXPECT_EQ(hvf.tasks.front().task.id, 1u);
  EXPECT_GT(oracle::order_revenue(vbs.tasks, 180, 2, 0), oracle::order_revenue(hvf.tasks, 180, 2, 0));
}

TEST(BruteForce, SingleTask) {
  const std::vector<ValuedTask> t = {exp_task(4, 0, 2, 0.001, 300)};
  const BruteForceResult r = brute_force_best(t, 180, 1, 0);
  EXPECT_EQ(r.order, (std::vector<std::uint64_t>{4}));
}

TEST(BruteForce, PairAgreesWithPairwiseRule) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<ValuedTask> t = {oracle::random_exponential_task(rng, 1, 180, 5, 600),
                                       oracle::random_exponential_task(rng, 2, 180, 5, 600)};
    const double w1 = weight(t[0].valuation, t[0].task, 180, 2);
    const double w2 = weight(t[1].valuation, t[1].task, 180, 2);
    const BruteForceResult r = brute_force_best(t, 180, 2, 600);
    if (std::abs(w1 - w2) > 1e-9 * std::max(w1, w2)) {
      EXPECT_EQ(r.order.front(), w1 > w2 ? 1u : 2u);
    }
  }
}

TEST(BruteForce, BeatsRandomOrdersAndMatchesModel) {
  std::mt19937_64 rng(8);
  std::vector<ValuedTask> t;
  for (std::uint64_t i = 1; i <= 6; ++i) t.push_back(oracle::random_exponential_task(rng, i, 180, 4, 300));
  const BruteForceResult r = brute_force_best(t, 180, 2, 300);
  EXPECT_NEAR(r.revenue, oracle::best_revenue(t, 180, 2, 300), 1e-12);
  for (int k = 0; k < 50; ++k) {
    std::shuffle(t.begin(), t.end(), rng);
    EXPECT_GE(r.revenue + 1e-15, model_revenue(t, 180, 2, 300));
    EXPECT_NEAR(model_revenue(t, 180, 2, 300), oracle::order_revenue(t, 180, 2, 300), 1e-15);
  }
}

TEST(BruteForce, TooManyTasksThrows) {
  std::vector<ValuedTask> t;
  for (std::uint64_t i = 1; i <= kBruteForceLimit + 1; ++i) t.push_back(exp_task(i, 0, 1, 0.001, 100));
  EXPECT_THROW(brute_force_best(t, 180, 1, 0), std::length_error);
}

TEST(StepKind, SlackDeadlinesMatchBruteForce) {
  std::vector<ValuedTask> t;
  for (std::uint64_t i = 1; i <= 5; ++i) {
    ValuedTask vt;
    vt.task.id = i;
    vt.task.block_count = static_cast<int>(i);
    vt.valuation = StepValuation{0.1 * static_cast<double>(i), 1e9};
    t.push_back(vt);
  }
  QueueState q = queue_of(t, 180, 2);
  reorder(q, 0);
  const BruteForceResult best = brute_force_best(t, 180, 2, 0);
  EXPECT_NEAR(model_revenue(q.tasks, 180, 2, 0), best.revenue, 1e-12);
  QueueState again = queue_of(t, 180, 2);
  reorder(again, 0);
  EXPECT_EQ(ids(q), ids(again));
}

}  // namespace
}  // namespace vtsim
