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

#ifndef VTSIM_SCHEDULER_H_
#define VTSIM_SCHEDULER_H_

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "vtsim/valuation.h"
#include "vtsim/workload.h"

namespace vtsim {

class NoCapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateWeightError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Pending tasks in transcoding order. Once the head task has dispatched a
// block it is locked at position 1 until all of its blocks are out.
struct QueueState {
  std::vector<ValuedTask> tasks;
  bool head_locked = false;
  Slot block_slots = 1;  // F
  int workers = 1;       // m

  bool empty() const { return tasks.empty(); }
  std::size_t size() const { return tasks.size(); }
};

struct ScheduleEntry {
  std::uint64_t task_id = 0;
  std::int64_t cumulative_blocks = 0;  // g_i
  double expected_completion = 0.0;    // E{f_i}
  double gap = 0.0;                    // d_i = (F / m) * b_i
};

using ScheduleEstimate = std::vector<ScheduleEntry>;

// E{f_i} = t0 + (F/m)(g_i - 1) + F along the queue order, where g_i counts
// the undispatched blocks at positions <= o_i. Throws NoCapacityError for
// m = 0.
ScheduleEstimate expected_completion(const QueueState& queue, double t0);

// Total revenue of serving `order` front to back under the expected
// completion times above.
double model_revenue(std::span<const ValuedTask> order, Slot block_slots, int workers,
                     double t0);

// Ordering weight P_i of one task.
//   exponential: alpha^(d_i - a_i) R_i D_i / (1 - alpha^d_i)
//   linear:      beta_i / d_i
//   step:        w_i / d_i
// with d_i = (F/m) b_i. Arrival a_i is measured from `arrival_origin`; a
// common shift scales every exponential weight by the same factor, so any
// origin gives the same order.
double weight(const ValuationSpec& spec, const Task& task, Slot block_slots,
              int workers, double arrival_origin = 0.0);

// log(P_i), finite over the whole range where P_i itself would overflow.
double log_weight(const ValuationSpec& spec, const Task& task, Slot block_slots,
                  int workers, double arrival_origin = 0.0);

// Sorts the unlocked part of the queue by decreasing P_i, ties by earlier
// arrival then smaller id. A queue with zero workers is left untouched.
void reorder(QueueState& queue, double now);

// Highest-value-first: decreasing value_at(spec, a_i, now), same ties and
// head lock as reorder().
void hvf_order(QueueState& queue, double now);

struct BlockGrant {
  std::uint64_t task_id = 0;
  int block_index = 0;  // 0-based
  bool last_block = false;
  // The task leaves the queue with its last block.
  std::optional<ValuedTask> released;
};

// Hands out the next block of the head task, or nullopt on an empty queue.
std::optional<BlockGrant> next_block(QueueState& queue);

struct BruteForceResult {
  std::vector<std::uint64_t> order;
  double revenue = 0.0;
};

inline constexpr std::size_t kBruteForceLimit = 8;

// Exhaustive search over all orders of at most kBruteForceLimit tasks.
// Throws std::length_error beyond that.
BruteForceResult brute_force_best(std::span<const ValuedTask> tasks, Slot block_slots,
                                  int workers, double t0);

}  // namespace vtsim

#endif  // VTSIM_SCHEDULER_H_
