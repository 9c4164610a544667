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

#include "vtsim/valuation.h"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace vtsim {

Money Money::from_dollars(double dollars) {
  if (!std::isfinite(dollars)) throw std::invalid_argument("money must be finite");
  return Money(std::llround(dollars * 1e9));
}

std::string Money::to_string() const {
  const std::int64_t abs = nanos_ < 0 ? -nanos_ : nanos_;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%s%lld.%09lld", nanos_ < 0 ? "-" : "",
                static_cast<long long>(abs / 1000000000),
                static_cast<long long>(abs % 1000000000));
  return buf;
}

double TimeBase::slot_discount(double alpha_per_s) const {
  return std::pow(alpha_per_s, slot_seconds);
}

void PricingConfig::validate() const {
  if (!(alpha_per_s > 0.0 && alpha_per_s < 1.0)) {
    throw std::invalid_argument("pricing.alpha_per_s must lie in (0, 1)");
  }
  for (double p : price_per_min) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("service prices must be >= 0");
    }
  }
  if (!std::isfinite(vm_per_hour) || vm_per_hour < 0.0) {
    throw std::invalid_argument("pricing.vm_per_hour must be >= 0");
  }
}

ValuationKind kind_of(const ValuationSpec& spec) {
  return static_cast<ValuationKind>(spec.index());
}

void validate(const ValuationSpec& spec) {
  if (const auto* e = std::get_if<ExponentialValuation>(&spec)) {
    if (!(e->alpha_slot > 0.0 && e->alpha_slot < 1.0)) {
      throw std::invalid_argument("exponential valuation needs 0 < alpha < 1");
    }
    if (e->price_per_slot < 0.0 || e->duration_slots <= 0.0) {
      throw std::invalid_argument("exponential valuation needs R >= 0 and D > 0");
    }
  } else if (const auto* l = std::get_if<LinearValuation>(&spec)) {
    if (!(l->decay_per_slot > 0.0)) {
      throw std::invalid_argument("linear valuation needs beta > 0");
    }
  } else if (const auto* s = std::get_if<StepValuation>(&spec)) {
    if (s->deadline_slots < 0.0) {
      throw std::invalid_argument("step valuation needs tau >= 0");
    }
  }
}

double value_at(const ValuationSpec& spec, double arrival, double completion) {
  if (completion < arrival) {
    throw std::invalid_argument("completion precedes arrival");
  }
  const double delay = completion - arrival;
  if (const auto* e = std::get_if<ExponentialValuation>(&spec)) {
    return std::pow(e->alpha_slot, delay) * e->price_per_slot * e->duration_slots;
  }
  if (const auto* l = std::get_if<LinearValuation>(&spec)) {
    return l->initial - l->decay_per_slot * delay;
  }
  const auto& s = std::get<StepValuation>(spec);
  return delay <= s.deadline_slots ? s.reward : 0.0;
}

double pending_valuation_sum(std::span<const ValuedTask> tasks, double now) {
  double sum = 0.0;
  for (const ValuedTask& vt : tasks) {
    if (vt.task.blocks_completed >= vt.task.block_count) continue;
    sum += value_at(vt.valuation, static_cast<double>(vt.task.arrival), now);
  }
  return sum;
}

ValuationSpec make_valuation(const Task& task, const PricingConfig& pricing,
                             const TimeBase& time, const ValuationOptions& options) {
  const double price_per_slot = time.per_minute_to_per_slot(pricing.price_for(task.level));
  const double base = price_per_slot * task.estimated_slots;
  switch (options.kind) {
    case ValuationKind::kExponential:
      return ExponentialValuation{time.slot_discount(pricing.alpha_per_s), price_per_slot,
                                  task.estimated_slots};
    case ValuationKind::kLinear:
      return LinearValuation{base, base * options.linear_decay_per_s * time.slot_seconds};
    case ValuationKind::kStep:
      return StepValuation{base, time.seconds_to_slots(options.step_deadline_s)};
  }
  throw std::logic_error("unknown valuation kind");
}

}  // namespace vtsim
