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

#ifndef VTSIM_ENGINE_H_
#define VTSIM_ENGINE_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vtsim/provisioner.h"
#include "vtsim/scheduler.h"
#include "vtsim/valuation.h"
#include "vtsim/workload.h"

namespace vtsim {

enum class SchedulerKind { kValueBased, kHighestValueFirst };

// Estimated transcoding seconds for a request.
using DurationEstimator = std::function<double(const MediaFeatures&)>;

struct SimConfig {
  double slot_seconds = 1.0;
  Slot epoch_slots = 3600;  // T
  Slot block_slots = 180;   // F
  std::int64_t horizon_epochs = 24;
  int initial_workers = 10;
  PricingConfig pricing;
  ValuationOptions valuation;
  // Per-epoch arrival rates, repeated cyclically past the end. Ignored when
  // `trace` is set.
  std::vector<double> rates_per_min = diurnal_rates_per_min();
  // Replayed requests; each record becomes one task.
  std::optional<std::vector<TraceRecord>> trace;
  MediaMix media;
  SchedulerKind scheduler = SchedulerKind::kValueBased;
  StateBins bins;
  double gamma = 0.5;  // discount for the cumulative discounted profit
  std::uint64_t seed = 1;

  TimeBase time() const { return TimeBase{slot_seconds}; }
  void validate() const;
};

struct SlotEvent {
  enum class Kind { kBlockCompleted, kTaskCompleted, kTaskArrived, kBlockDispatched };
  Kind kind = Kind::kBlockCompleted;
  Slot slot = 0;
  std::uint64_t task_id = 0;
  int block_index = -1;
  int worker = -1;
  double revenue = 0.0;
};

struct EpochReport {
  std::int64_t epoch = 0;
  int action = 0;
  int workers = 0;  // m_k
  double arrival_per_min = 0.0;
  CompactState state;  // phi_k observed before the action
  std::int64_t arrivals = 0;
  Money revenue;
  Money cost;
  Money profit;
  std::int64_t tasks_completed = 0;
  double mean_delay_s = 0.0;
  std::size_t queue_length = 0;     // at epoch end
  std::size_t tasks_in_service = 0; // started, not finished, at epoch end
};

struct RunReport {
  std::string policy;
  std::vector<EpochReport> epochs;
  double discounted_profit = 0.0;  // sum gamma^k R_k
  Money profit;
  Money revenue;
  Money cost;
  // Work still queued or in service at the horizon; never booked.
  std::int64_t unfinished_tasks = 0;
  double unfinished_value = 0.0;
  // Queued tasks dropped because their value had decayed to zero.
  std::int64_t expired_tasks = 0;
  // Work conservation ledger, in slots.
  std::int64_t busy_worker_slots = 0;
  std::int64_t completed_blocks = 0;
  std::int64_t in_flight_work_slots = 0;
};

class Simulator {
 public:
  Simulator(SimConfig config, DurationEstimator estimator);

  Slot now() const { return now_; }
  std::int64_t epoch() const { return now_ / config_.epoch_slots; }
  // Workers that accept new blocks (excludes retiring ones).
  int workers() const { return active_workers_; }
  const QueueState& queue() const { return queue_; }
  const SimConfig& config() const { return config_; }

  // Arrival rate of epoch k, per minute.
  double arrival_per_min(std::int64_t epoch) const;
  // omega: current value of every queued or in-service task.
  double pending_value() const;
  ProvisioningContext context() const;

  // One fast-timescale slot: completions, arrivals, dispatch. Advances now().
  std::vector<SlotEvent> step_slot();
  // Applies nu at the current epoch boundary and simulates T slots.
  EpochReport run_epoch(int action);

  // Sets the active worker count directly. Shrinking retires idle workers
  // first; busy ones finish their current block and then leave.
  void set_workers(int workers);
  // Occupies the first residuals.size() workers with work that belongs to
  // no task, leaving `residual` slots on each.
  void preload_workers(std::span<const Slot> residuals);
  // Enqueues a request arriving now; returns its task id.
  std::uint64_t submit(ServiceLevel level, const MediaFeatures& features);

  Money total_revenue() const { return total_revenue_; }
  Money total_cost() const { return total_cost_; }
  std::int64_t busy_worker_slots() const { return busy_worker_slots_; }
  std::int64_t completed_blocks() const { return completed_blocks_; }
  std::int64_t in_flight_work_slots() const;
  std::int64_t unfinished_tasks() const;
  std::int64_t expired_tasks() const { return expired_tasks_; }

 private:
  struct Worker {
    Slot residual = 0;
    bool busy = false;
    bool retiring = false;
    std::optional<std::uint64_t> task;  // nullopt for preloaded work
    int block = -1;
  };

  void advance(std::vector<SlotEvent>* events);
  void prepare_arrivals(std::int64_t epoch);
  void enqueue(ServiceLevel level, const MediaFeatures& features,
               std::vector<SlotEvent>* events);
  void order_queue();
  void expire_worthless();

  SimConfig config_;
  DurationEstimator estimator_;
  ArrivalProfile profile_;
  std::vector<double> trace_rates_per_min_;
  Slot now_ = 0;
  QueueState queue_;
  std::map<std::uint64_t, ValuedTask> in_service_;
  std::vector<Worker> workers_;
  int active_workers_ = 0;
  std::uint64_t next_id_ = 1;

  struct PendingArrival {
    Slot slot;
    ServiceLevel level;
    MediaFeatures features;
  };
  std::vector<PendingArrival> arrivals_;
  std::size_t next_arrival_ = 0;
  std::int64_t arrivals_prepared_for_ = -1;
  std::size_t trace_cursor_ = 0;

  Money total_revenue_;
  Money total_cost_;
  std::int64_t busy_worker_slots_ = 0;
  std::int64_t completed_blocks_ = 0;
  std::int64_t expired_tasks_ = 0;

  // Per-epoch tallies.
  Money epoch_revenue_;
  std::int64_t epoch_arrivals_ = 0;
  std::int64_t epoch_completed_ = 0;
  double epoch_delay_sum_ = 0.0;
};

// Simulates config.horizon_epochs epochs under `policy`.
RunReport run(const SimConfig& config, ProvisioningPolicy& policy,
              const DurationEstimator& estimator);

// Continuing simulation exposed to the Q-learner; the rate profile repeats
// forever.
class SimulationEnvironment : public ProvisioningEnvironment {
 public:
  SimulationEnvironment(SimConfig config, DurationEstimator estimator);
  CompactState observe() override;
  double step(int action) override;
  const Simulator& simulator() const { return sim_; }

 private:
  Simulator sim_;
};

// Per-epoch CSV followed by a "# summary" line.
void write_run_report(std::ostream& out, const RunReport& report);

}  // namespace vtsim

#endif  // VTSIM_ENGINE_H_
