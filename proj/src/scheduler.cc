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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vtsim {
namespace {

double gap_slots(const Task& task, Slot block_slots, int workers) {
  return static_cast<double>(block_slots) / workers * task.block_count;
}

// Sorts tasks[first..] by decreasing key; ties go to earlier arrival, then
// smaller id.
template <typename KeyFn>
void sort_tail(QueueState& queue, std::size_t first, KeyFn key) {
  if (queue.tasks.size() <= first + 1) return;
  struct Keyed {
    double key;
    ValuedTask item;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(queue.tasks.size() - first);
  for (std::size_t i = first; i < queue.tasks.size(); ++i) {
    keyed.push_back({key(queue.tasks[i]), std::move(queue.tasks[i])});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& x, const Keyed& y) {
    if (x.key != y.key) return x.key > y.key;
    if (x.item.task.arrival != y.item.task.arrival) {
      return x.item.task.arrival < y.item.task.arrival;
    }
    return x.item.task.id < y.item.task.id;
  });
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    queue.tasks[first + i] = std::move(keyed[i].item);
  }
}

}  // namespace

ScheduleEstimate expected_completion(const QueueState& queue, double t0) {
  if (queue.workers < 1) throw NoCapacityError("no active workers");
  if (queue.block_slots < 1) throw std::invalid_argument("block length must be >= 1 slot");
  const double spacing = static_cast<double>(queue.block_slots) / queue.workers;
  ScheduleEstimate estimate;
  estimate.reserve(queue.tasks.size());
  std::int64_t g = 0;
  for (const ValuedTask& vt : queue.tasks) {
    const int blocks = vt.task.blocks_remaining();
    g += blocks;
    ScheduleEntry e;
    e.task_id = vt.task.id;
    e.cumulative_blocks = g;
    e.expected_completion =
        t0 + spacing * static_cast<double>(g - 1) + static_cast<double>(queue.block_slots);
    e.gap = spacing * blocks;
    estimate.push_back(e);
  }
  return estimate;
}

double model_revenue(std::span<const ValuedTask> order, Slot block_slots, int workers,
                     double t0) {
  if (workers < 1) throw NoCapacityError("no active workers");
  const double spacing = static_cast<double>(block_slots) / workers;
  double revenue = 0.0;
  std::int64_t g = 0;
  for (const ValuedTask& vt : order) {
    g += vt.task.blocks_remaining();
    const double f = t0 + spacing * static_cast<double>(g - 1) + static_cast<double>(block_slots);
    revenue += value_at(vt.valuation, static_cast<double>(vt.task.arrival), f);
  }
  return revenue;
}

double log_weight(const ValuationSpec& spec, const Task& task, Slot block_slots,
                  int workers, double arrival_origin) {
  if (workers < 1) throw NoCapacityError("no active workers");
  const double d = gap_slots(task, block_slots, workers);
  if (!(d > 0.0)) throw DegenerateWeightError("task has zero processing gap");
  if (const auto* e = std::get_if<ExponentialValuation>(&spec)) {
    const double log_alpha = std::log(e->alpha_slot);
    // 1 - alpha^d, accurate for small d.
    const double one_minus = -std::expm1(d * log_alpha);
    if (!(one_minus > 0.0)) {
      throw DegenerateWeightError("1 - alpha^d vanishes for task " + std::to_string(task.id));
    }
    const double a = static_cast<double>(task.arrival) - arrival_origin;
    return (d - a) * log_alpha + std::log(e->price_per_slot * e->duration_slots) -
           std::log(one_minus);
  }
  if (const auto* l = std::get_if<LinearValuation>(&spec)) {
    return std::log(l->decay_per_slot / d);
  }
  const auto& s = std::get<StepValuation>(spec);
  return std::log(s.reward / d);
}

double weight(const ValuationSpec& spec, const Task& task, Slot block_slots, int workers,
              double arrival_origin) {
  if (workers < 1) throw NoCapacityError("no active workers");
  const double d = gap_slots(task, block_slots, workers);
  if (!(d > 0.0)) throw DegenerateWeightError("task has zero processing gap");
  if (const auto* e = std::get_if<ExponentialValuation>(&spec)) {
    const double one_minus = -std::expm1(d * std::log(e->alpha_slot));
    if (!(one_minus > 0.0)) {
      throw DegenerateWeightError("1 - alpha^d vanishes for task " + std::to_string(task.id));
    }
    const double a = static_cast<double>(task.arrival) - arrival_origin;
    return std::pow(e->alpha_slot, d - a) * e->price_per_slot * e->duration_slots / one_minus;
  }
  if (const auto* l = std::get_if<LinearValuation>(&spec)) return l->decay_per_slot / d;
  return std::get<StepValuation>(spec).reward / d;
}

void reorder(QueueState& queue, double now) {
  if (queue.workers < 1) return;
  const std::size_t first = queue.head_locked ? 1 : 0;
  sort_tail(queue, first, [&](const ValuedTask& vt) {
    return log_weight(vt.valuation, vt.task, queue.block_slots, queue.workers, now);
  });
}

void hvf_order(QueueState& queue, double now) {
  const std::size_t first = queue.head_locked ? 1 : 0;
  sort_tail(queue, first, [&](const ValuedTask& vt) {
    return value_at(vt.valuation, static_cast<double>(vt.task.arrival), now);
  });
}

std::optional<BlockGrant> next_block(QueueState& queue) {
  if (queue.tasks.empty()) return std::nullopt;
  Task& head = queue.tasks.front().task;
  BlockGrant grant;
  grant.task_id = head.id;
  grant.block_index = head.blocks_dispatched;
  ++head.blocks_dispatched;
  grant.last_block = head.blocks_dispatched >= head.block_count;
  if (grant.last_block) {
    grant.released = std::move(queue.tasks.front());
    queue.tasks.erase(queue.tasks.begin());
    queue.head_locked = false;
  } else {
    queue.head_locked = true;
  }
  return grant;
}

BruteForceResult brute_force_best(std::span<const ValuedTask> tasks, Slot block_slots,
                                  int workers, double t0) {
  if (tasks.size() > kBruteForceLimit) {
    throw std::length_error("brute force limited to " + std::to_string(kBruteForceLimit) +
                            " tasks");
  }
  std::vector<std::size_t> perm(tasks.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<ValuedTask> ordered(tasks.begin(), tasks.end());

  BruteForceResult best;
  best.revenue = -std::numeric_limits<double>::infinity();
  do {
    for (std::size_t i = 0; i < perm.size(); ++i) ordered[i] = tasks[perm[i]];
    const double r = model_revenue(ordered, block_slots, workers, t0);
    if (r > best.revenue) {
      best.revenue = r;
      best.order.clear();
      for (std::size_t i : perm) best.order.push_back(tasks[i].task.id);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (tasks.empty()) best.revenue = 0.0;
  return best;
}

}  // namespace vtsim
