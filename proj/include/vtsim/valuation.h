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

#ifndef VTSIM_VALUATION_H_
#define VTSIM_VALUATION_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <variant>

#include "vtsim/workload.h"

namespace vtsim {

// Fixed-point money in nano-dollars. Booked revenues and costs are rounded
// once on entry, so sums over epochs are exact.
class Money {
 public:
  constexpr Money() = default;
  static Money from_dollars(double dollars);
  static constexpr Money from_nanos(std::int64_t nanos) { return Money(nanos); }

  constexpr std::int64_t nanos() const { return nanos_; }
  double dollars() const { return static_cast<double>(nanos_) * 1e-9; }
  // Exact decimal rendering, e.g. "-2.520000000".
  std::string to_string() const;

  constexpr Money operator+(Money o) const { return Money(nanos_ + o.nanos_); }
  constexpr Money operator-(Money o) const { return Money(nanos_ - o.nanos_); }
  constexpr Money operator*(std::int64_t k) const { return Money(nanos_ * k); }
  constexpr Money& operator+=(Money o) {
    nanos_ += o.nanos_;
    return *this;
  }
  constexpr Money& operator-=(Money o) {
    nanos_ -= o.nanos_;
    return *this;
  }
  constexpr auto operator<=>(const Money&) const = default;

 private:
  constexpr explicit Money(std::int64_t nanos) : nanos_(nanos) {}
  std::int64_t nanos_ = 0;
};

// Converts between wall-clock units and simulator slots.
struct TimeBase {
  double slot_seconds = 1.0;

  double seconds_to_slots(double seconds) const { return seconds / slot_seconds; }
  double slots_to_seconds(double slots) const { return slots * slot_seconds; }
  double per_minute_to_per_slot(double per_minute) const {
    return per_minute * slot_seconds / 60.0;
  }
  // alpha is quoted per second; one slot discounts by alpha^slot_seconds.
  double slot_discount(double alpha_per_s) const;
};

struct PricingConfig {
  double alpha_per_s = 0.999;
  // Initial marginal price per minute of transcoding time, levels I..III.
  std::array<double, 3> price_per_min = {0.018, 0.012, 0.006};
  double vm_per_hour = 0.252;

  double price_for(ServiceLevel level) const {
    return price_per_min[static_cast<int>(level) - 1];
  }
  void validate() const;
  bool operator==(const PricingConfig&) const = default;
};

// U(t) = alpha^(t - a) * R * D.
struct ExponentialValuation {
  double alpha_slot = 0.999;
  double price_per_slot = 0.0;   // R_i
  double duration_slots = 0.0;   // D_i
};

// U(t) = w - beta * (t - a). Negative values are penalties and are kept.
struct LinearValuation {
  double initial = 0.0;          // w_i
  double decay_per_slot = 0.0;   // beta_i
};

// U(t) = w while t <= a + tau, otherwise 0.
struct StepValuation {
  double reward = 0.0;           // w_i
  double deadline_slots = 0.0;   // tau_i
};

using ValuationSpec =
    std::variant<ExponentialValuation, LinearValuation, StepValuation>;

enum class ValuationKind { kExponential, kLinear, kStep };

ValuationKind kind_of(const ValuationSpec& spec);
// Throws std::invalid_argument when the active alternative breaks its
// parameter constraints.
void validate(const ValuationSpec& spec);

// Revenue of a task that arrived at `arrival` and completes at `completion`.
// Throws std::invalid_argument if completion < arrival.
double value_at(const ValuationSpec& spec, double arrival, double completion);

struct ValuedTask {
  Task task;
  ValuationSpec valuation;
};

// Sum of value_at(spec, a_i, now) over tasks that are not fully completed.
double pending_valuation_sum(std::span<const ValuedTask> tasks, double now);

// Parameters for the non-exponential kinds, expressed against the
// exponential base value R_i * D_i so all kinds share one price table.
struct ValuationOptions {
  ValuationKind kind = ValuationKind::kExponential;
  // Linear: beta_i = w_i * linear_decay_per_s per second.
  double linear_decay_per_s = 0.001;
  // Step: tau_i in seconds.
  double step_deadline_s = 1800.0;

  bool operator==(const ValuationOptions&) const = default;
};

ValuationSpec make_valuation(const Task& task, const PricingConfig& pricing,
                             const TimeBase& time, const ValuationOptions& options);

}  // namespace vtsim

#endif  // VTSIM_VALUATION_H_
