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

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace vtsim {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void SimConfig::validate() const {
  if (!(slot_seconds > 0.0) || !std::isfinite(slot_seconds)) {
    throw std::invalid_argument("slot length must be positive");
  }
  if (block_slots < 1) throw std::invalid_argument("block length must be >= 1 slot");
  if (epoch_slots < block_slots) {
    throw std::invalid_argument("epoch must be at least one block long");
  }
  if (horizon_epochs < 1) throw std::invalid_argument("horizon must be >= 1 epoch");
  if (initial_workers < 0) throw std::invalid_argument("initial workers must be >= 0");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  pricing.validate();
  bins.validate();
  for (double r : rates_per_min) {
    if (!std::isfinite(r) || r < 0.0) throw std::invalid_argument("arrival rates must be >= 0");
  }
  if (!(media.min_duration_s > 0.0 && media.min_duration_s <= media.max_duration_s) ||
      !(media.min_bitrate_kbps > 0.0 && media.min_bitrate_kbps <= media.max_bitrate_kbps)) {
    throw std::invalid_argument("media mix ranges must be positive and ordered");
  }
}

Simulator::Simulator(SimConfig config, DurationEstimator estimator)
    : config_(std::move(config)), estimator_(std::move(estimator)) {
  config_.validate();
  if (!estimator_) throw std::invalid_argument("simulator needs a duration estimator");
  if (!config_.rates_per_min.empty()) {
    profile_ = profile_from_per_minute(config_.rates_per_min, config_.epoch_slots,
                                       config_.slot_seconds);
  }
  if (config_.trace) {
    const double epoch_min = config_.epoch_slots * config_.slot_seconds / 60.0;
    for (const TraceRecord& r : *config_.trace) {
      const auto slot = static_cast<Slot>(std::floor(r.arrival_s / config_.slot_seconds));
      const auto k = static_cast<std::size_t>(slot / config_.epoch_slots);
      if (trace_rates_per_min_.size() <= k) trace_rates_per_min_.resize(k + 1, 0.0);
      trace_rates_per_min_[k] += 1.0 / epoch_min;
    }
  }
  queue_.block_slots = config_.block_slots;
  queue_.workers = 0;
  set_workers(config_.initial_workers);
}

double Simulator::arrival_per_min(std::int64_t epoch) const {
  if (config_.trace) {
    const auto k = static_cast<std::size_t>(epoch);
    return k < trace_rates_per_min_.size() ? trace_rates_per_min_[k] : 0.0;
  }
  if (config_.rates_per_min.empty()) return 0.0;
  return config_.rates_per_min[static_cast<std::size_t>(epoch) % config_.rates_per_min.size()];
}

double Simulator::pending_value() const {
  const double now = static_cast<double>(now_);
  double sum = pending_valuation_sum(queue_.tasks, now);
  for (const auto& [id, vt] : in_service_) {
    sum += value_at(vt.valuation, static_cast<double>(vt.task.arrival), now);
  }
  return sum;
}

ProvisioningContext Simulator::context() const {
  ProvisioningContext c;
  c.epoch = epoch();
  c.workers = active_workers_;
  c.arrival_per_min = arrival_per_min(c.epoch);
  c.pending_value = pending_value();
  c.state = compact(c.pending_value, c.workers, c.arrival_per_min, config_.bins);
  return c;
}

void Simulator::set_workers(int target) {
  if (target < 0) throw std::invalid_argument("worker count must be >= 0");
  int delta = target - active_workers_;
  // Growing: reactivate retiring workers before starting new ones.
  for (auto& w : workers_) {
    if (delta <= 0) break;
    if (w.retiring) {
      w.retiring = false;
      --delta;
    }
  }
  for (; delta > 0; --delta) workers_.push_back(Worker{});
  // Shrinking: idle workers leave now, busy ones after their current block.
  for (auto it = workers_.end(); delta < 0 && it != workers_.begin();) {
    --it;
    if (!it->busy && !it->retiring) {
      it = workers_.erase(it);
      ++delta;
    }
  }
  for (auto it = workers_.rbegin(); delta < 0 && it != workers_.rend(); ++it) {
    if (!it->retiring) {
      it->retiring = true;
      ++delta;
    }
  }
  active_workers_ = target;
  queue_.workers = target;
}

void Simulator::preload_workers(std::span<const Slot> residuals) {
  if (residuals.size() > workers_.size()) {
    throw std::invalid_argument("more residuals than workers");
  }
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    if (residuals[i] < 0 || residuals[i] > config_.block_slots) {
      throw std::invalid_argument("residual must lie in [0, F]");
    }
    Worker& w = workers_[i];
    w.busy = residuals[i] > 0;
    w.residual = residuals[i];
    w.task.reset();
    w.block = -1;
  }
}

std::uint64_t Simulator::submit(ServiceLevel level, const MediaFeatures& features) {
  const std::uint64_t id = next_id_;
  enqueue(level, features, nullptr);
  order_queue();
  return id;
}

std::int64_t Simulator::in_flight_work_slots() const {
  std::int64_t work = 0;
  for (const Worker& w : workers_) {
    if (w.busy && w.task) work += config_.block_slots - w.residual;
  }
  return work;
}

std::int64_t Simulator::unfinished_tasks() const {
  return static_cast<std::int64_t>(queue_.size() + in_service_.size()) -
         static_cast<std::int64_t>(std::count_if(
             queue_.tasks.begin(), queue_.tasks.end(),
             [&](const ValuedTask& vt) { return in_service_.count(vt.task.id) > 0; }));
}

void Simulator::enqueue(ServiceLevel level, const MediaFeatures& features,
                        std::vector<SlotEvent>* events) {
  const double seconds = estimator_(features);
  const TimeBase time = config_.time();
  ValuedTask vt;
  vt.task = make_task(next_id_++, now_, level, features, time.seconds_to_slots(seconds),
                      config_.block_slots);
  vt.valuation = make_valuation(vt.task, config_.pricing, time, config_.valuation);
  if (events) {
    events->push_back({SlotEvent::Kind::kTaskArrived, now_, vt.task.id, -1, -1, 0.0});
  }
  queue_.tasks.push_back(std::move(vt));
  ++epoch_arrivals_;
}

// A waiting task whose value rounds to zero nanodollars can never earn
// anything again under the exponential and step kinds, so it is dropped.
// Linear values keep falling below zero and stay queued.
void Simulator::expire_worthless() {
  if (config_.valuation.kind == ValuationKind::kLinear) return;
  const double now = static_cast<double>(now_);
  expired_tasks_ += static_cast<std::int64_t>(std::erase_if(queue_.tasks, [&](const ValuedTask& vt) {
    return !vt.task.started() &&
           Money::from_dollars(value_at(vt.valuation, static_cast<double>(vt.task.arrival), now))
                   .nanos() == 0;
  }));
}

void Simulator::order_queue() {
  const double now = static_cast<double>(now_);
  expire_worthless();
  if (config_.scheduler == SchedulerKind::kValueBased) {
    reorder(queue_, now);
  } else {
    hvf_order(queue_, now);
  }
}

void Simulator::prepare_arrivals(std::int64_t epoch) {
  arrivals_.clear();
  next_arrival_ = 0;
  arrivals_prepared_for_ = epoch;
  const Slot first = epoch * config_.epoch_slots;
  const Slot end = first + config_.epoch_slots;

  if (config_.trace) {
    const auto& trace = *config_.trace;
    while (trace_cursor_ < trace.size()) {
      const TraceRecord& r = trace[trace_cursor_];
      const auto slot = static_cast<Slot>(std::floor(r.arrival_s / config_.slot_seconds));
      if (slot >= end) break;
      if (slot >= first) arrivals_.push_back({slot, r.level, r.features});
      ++trace_cursor_;
    }
    return;
  }
  if (profile_.epochs() == 0) return;

  const auto n = static_cast<std::int64_t>(profile_.epochs());
  const std::int64_t cycle = epoch / n;
  const std::size_t index = static_cast<std::size_t>(epoch % n);
  const std::uint64_t cycle_seed =
      cycle == 0 ? config_.seed : splitmix64(config_.seed ^ splitmix64(cycle));
  const Slot shift = cycle * n * config_.epoch_slots;

  std::seed_seq seq{static_cast<std::uint32_t>(config_.seed),
                    static_cast<std::uint32_t>(config_.seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32),
                    0x3edu};
  std::mt19937_64 media_rng(seq);
  for (Slot s : sample_arrivals(profile_, index, cycle_seed)) {
    const MediaSample m = sample_media(media_rng, config_.media);
    arrivals_.push_back({s + shift, sample_service_level(media_rng), m.features});
  }
}

std::vector<SlotEvent> Simulator::step_slot() {
  std::vector<SlotEvent> events;
  advance(&events);
  return events;
}

void Simulator::advance(std::vector<SlotEvent>* events) {
  const Slot t = now_;
  const std::int64_t k = t / config_.epoch_slots;
  if (k != arrivals_prepared_for_) prepare_arrivals(k);

  // (1) progress on every busy worker.
  for (Worker& w : workers_) {
    if (!w.busy) continue;
    --w.residual;
    if (w.task) ++busy_worker_slots_;
  }

  // (2) block completions; a task's last block books its revenue.
  for (std::size_t i = 0; i < workers_.size(); ++i) {
    Worker& w = workers_[i];
    if (!w.busy || w.residual > 0) continue;
    w.busy = false;
    if (!w.task) continue;
    ++completed_blocks_;
    auto it = in_service_.find(*w.task);
    if (it == in_service_.end()) throw std::logic_error("completed block of unknown task");
    Task& task = it->second.task;
    ++task.blocks_completed;
    if (events) {
      events->push_back({SlotEvent::Kind::kBlockCompleted, t, task.id, w.block,
                         static_cast<int>(i), 0.0});
    }
    if (task.blocks_completed == task.block_count) {
      const double value =
          value_at(it->second.valuation, static_cast<double>(task.arrival), static_cast<double>(t));
      const Money booked = Money::from_dollars(value);
      total_revenue_ += booked;
      epoch_revenue_ += booked;
      ++epoch_completed_;
      epoch_delay_sum_ += static_cast<double>(t - task.arrival) * config_.slot_seconds;
      if (events) {
        events->push_back({SlotEvent::Kind::kTaskCompleted, t, task.id, -1,
                           static_cast<int>(i), booked.dollars()});
      }
      in_service_.erase(it);
    }
    w.task.reset();
    w.block = -1;
  }
  std::erase_if(workers_, [](const Worker& w) { return w.retiring && !w.busy; });

  // (3) arrivals due this slot.
  bool arrived = false;
  while (next_arrival_ < arrivals_.size() && arrivals_[next_arrival_].slot <= t) {
    const PendingArrival& a = arrivals_[next_arrival_++];
    enqueue(a.level, a.features, events);
    arrived = true;
  }
  const bool time_varying_order = config_.scheduler == SchedulerKind::kHighestValueFirst &&
                                  config_.valuation.kind != ValuationKind::kExponential;
  bool has_idle = false;
  for (const Worker& w : workers_) has_idle |= !w.busy && !w.retiring;
  if (arrived || (time_varying_order && has_idle && !queue_.empty())) order_queue();

  // (4) idle workers pull blocks from the head of the queue.
  for (std::size_t i = 0; i < workers_.size() && !queue_.empty(); ++i) {
    Worker& w = workers_[i];
    if (w.busy || w.retiring) continue;
    const std::uint64_t head_id = queue_.tasks.front().task.id;
    if (!in_service_.count(head_id)) in_service_.emplace(head_id, queue_.tasks.front());
    std::optional<BlockGrant> grant = next_block(queue_);
    in_service_[grant->task_id].task.blocks_dispatched = grant->block_index + 1;
    w.busy = true;
    w.residual = config_.block_slots;
    w.task = grant->task_id;
    w.block = grant->block_index;
    if (events) {
      events->push_back({SlotEvent::Kind::kBlockDispatched, t, grant->task_id,
                         grant->block_index, static_cast<int>(i), 0.0});
    }
  }
  ++now_;
}

EpochReport Simulator::run_epoch(int action) {
  if (now_ % config_.epoch_slots != 0) {
    throw std::logic_error("run_epoch called off an epoch boundary");
  }
  const ProvisioningContext ctx = context();
  EpochReport r;
  r.epoch = ctx.epoch;
  r.action = action;
  r.arrival_per_min = ctx.arrival_per_min;
  r.state = ctx.state;

  const int target = std::max(0, active_workers_ + action);
  if (target != active_workers_) {
    set_workers(target);
    order_queue();
  }
  r.workers = active_workers_;
  r.cost = epoch_cost(active_workers_,
                      cost_from_pricing(config_.pricing,
                                        config_.epoch_slots * config_.slot_seconds));
  total_cost_ += r.cost;

  epoch_revenue_ = Money();
  epoch_arrivals_ = 0;
  epoch_completed_ = 0;
  epoch_delay_sum_ = 0.0;
  for (Slot j = 0; j < config_.epoch_slots; ++j) advance(nullptr);

  r.arrivals = epoch_arrivals_;
  r.revenue = epoch_revenue_;
  r.profit = r.revenue - r.cost;
  r.tasks_completed = epoch_completed_;
  r.mean_delay_s = epoch_completed_ > 0 ? epoch_delay_sum_ / epoch_completed_ : 0.0;
  r.queue_length = queue_.size();
  r.tasks_in_service = in_service_.size();
  return r;
}

RunReport run(const SimConfig& config, ProvisioningPolicy& policy,
              const DurationEstimator& estimator) {
  Simulator sim(config, estimator);
  RunReport report;
  report.policy = policy.name();
  double discount = 1.0;
  for (std::int64_t k = 0; k < config.horizon_epochs; ++k) {
    const int action = policy.decide(sim.context());
    EpochReport e = sim.run_epoch(action);
    report.discounted_profit += discount * e.profit.dollars();
    discount *= config.gamma;
    report.profit += e.profit;
    report.revenue += e.revenue;
    report.cost += e.cost;
    report.epochs.push_back(e);
  }
  report.unfinished_tasks = sim.unfinished_tasks();
  report.unfinished_value = sim.pending_value();
  report.expired_tasks = sim.expired_tasks();
  report.busy_worker_slots = sim.busy_worker_slots();
  report.completed_blocks = sim.completed_blocks();
  report.in_flight_work_slots = sim.in_flight_work_slots();
  return report;
}

SimulationEnvironment::SimulationEnvironment(SimConfig config, DurationEstimator estimator)
    : sim_(std::move(config), std::move(estimator)) {}

CompactState SimulationEnvironment::observe() { return sim_.context().state; }

double SimulationEnvironment::step(int action) {
  return sim_.run_epoch(action).profit.dollars();
}

void write_run_report(std::ostream& out, const RunReport& report) {
  const auto old_precision = out.precision(12);
  out << "epoch,action,workers,arrival_per_min,omega_bin,m_prev,lambda_bin,arrivals,revenue,"
         "cost,profit,tasks_completed,mean_delay_s,queue_length,tasks_in_service\n";
  for (const EpochReport& e : report.epochs) {
    out << e.epoch << ',' << e.action << ',' << e.workers << ',' << e.arrival_per_min << ','
        << e.state.omega_bin << ',' << e.state.workers << ',' << e.state.lambda_bin << ','
        << e.arrivals << ',' << e.revenue.to_string() << ',' << e.cost.to_string() << ','
        << e.profit.to_string() << ',' << e.tasks_completed << ',' << e.mean_delay_s << ','
        << e.queue_length << ',' << e.tasks_in_service << '\n';
  }
  out << "# summary,policy=" << report.policy
      << ",discounted_profit=" << report.discounted_profit
      << ",profit=" << report.profit.to_string() << ",revenue=" << report.revenue.to_string()
      << ",cost=" << report.cost.to_string() << ",unfinished_tasks=" << report.unfinished_tasks
      << ",unfinished_value=" << report.unfinished_value
      << ",expired_tasks=" << report.expired_tasks << '\n';
  out.precision(old_precision);
}

}  // namespace vtsim
