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

#include <gtest/gtest.h>

#include <cmath>

namespace vtsim {
namespace {

TEST(Money, ExactArithmetic) {
  const Money a = Money::from_dollars(0.1);
  Money sum;
  for (int i = 0; i < 10; ++i) sum += a;
  EXPECT_EQ(sum, Money::from_dollars(1.0));
  EXPECT_EQ((a * 3).nanos(), 300000000);
  EXPECT_EQ(Money::from_dollars(-2.52).to_string(), "-2.520000000");
  EXPECT_THROW(Money::from_dollars(std::nan("")), std::invalid_argument);
}

TEST(ValueAt, ExponentialAtArrivalIsBaseValue) {
  const PricingConfig pricing;
  const TimeBase time{1.0};
  const double per_slot = time.per_minute_to_per_slot(pricing.price_per_min[0]);
  const ValuationSpec spec = ExponentialValuation{0.999, per_slot, 1800.0};
  EXPECT_NEAR(value_at(spec, 10, 10), 0.54, 1e-12);
}

TEST(ValueAt, ExponentialDelay) {
  const ValuationSpec spec = ExponentialValuation{0.999, 0.018 / 60.0, 1800.0};
  EXPECT_NEAR(value_at(spec, 0, 100), 0.54 * std::pow(0.999, 100), 1e-12);
}

TEST(ValueAt, ExponentialIsMultiplicative) {
  const ValuationSpec spec = ExponentialValuation{0.995, 0.01, 500.0};
  for (double t : {0.0, 3.0, 50.0}) {
    for (double s : {1.0, 7.0, 120.0}) {
      EXPECT_NEAR(value_at(spec, 0, t + s), std::pow(0.995, s) * value_at(spec, 0, t), 1e-12);
    }
  }
  EXPECT_GT(value_at(spec, 0, 10), value_at(spec, 0, 11));
}

TEST(ValueAt, LinearMayGoNegative) {
  const ValuationSpec spec = LinearValuation{1.0, 0.01};
  EXPECT_DOUBLE_EQ(value_at(spec, 5, 5), 1.0);
  EXPECT_NEAR(value_at(spec, 5, 6), 0.99, 1e-15);
  EXPECT_NEAR(value_at(spec, 0, 150), -0.5, 1e-12);
}

TEST(ValueAt, StepBoundary) {
  const ValuationSpec spec = StepValuation{2.0, 30.0};
  EXPECT_DOUBLE_EQ(value_at(spec, 10, 40), 2.0);
  EXPECT_DOUBLE_EQ(value_at(spec, 10, 41), 0.0);
}

TEST(ValueAt, CompletionBeforeArrivalThrows) {
  EXPECT_THROW(value_at(ExponentialValuation{0.999, 1, 1}, 10, 9), std::invalid_argument);
}

TEST(PendingSum, EmptyIsZero) {
  EXPECT_DOUBLE_EQ(pending_valuation_sum({}, 0), 0.0);
}

TEST(PendingSum, AdditiveAndSkipsFinished) {
  std::vector<ValuedTask> tasks(3);
  tasks[0].task.arrival = 0;
  tasks[0].task.block_count = 2;
  tasks[0].valuation = ExponentialValuation{0.999, 0.0003, 600};
  tasks[1].task.arrival = 50;
  tasks[1].task.block_count = 1;
  tasks[1].valuation = LinearValuation{1.0, 0.001};
  tasks[2].task.arrival = 0;
  tasks[2].task.block_count = 1;
  tasks[2].task.blocks_completed = 1;
  tasks[2].valuation = StepValuation{5.0, 1000};
  const double expected = value_at(tasks[0].valuation, 0, 120) + value_at(tasks[1].valuation, 50, 120);
  EXPECT_NEAR(pending_valuation_sum(tasks, 120), expected, 1e-15);
  EXPECT_NEAR(pending_valuation_sum(std::span(tasks).first(1), 0), 0.0003 * 600, 1e-15);
}

TEST(TimeBase, PerMinuteRoundTrip) {
  for (double slot : {0.5, 1.0, 2.0, 10.0}) {
    const TimeBase tb{slot};
    const double per_slot = tb.per_minute_to_per_slot(0.018);
    const double minute = per_slot * (60.0 / slot);
    EXPECT_NEAR(minute, 0.018, 1e-12 * 0.018);
  }
}

TEST(TimeBase, SlotDiscountInvariantToSlotLength) {
  const TimeBase ten{10.0};
  EXPECT_NEAR(ten.slot_discount(0.999), std::pow(0.999, 10), 1e-15);
  const ValuationSpec fine = ExponentialValuation{0.999, 0.001, 100};
  const ValuationSpec coarse = ExponentialValuation{ten.slot_discount(0.999), 0.01, 10};
  EXPECT_NEAR(value_at(fine, 0, 300), value_at(coarse, 0, 30), 1e-12);
}

TEST(MakeValuation, KindsUseTaskBaseValue) {
  PricingConfig pricing;
  const TimeBase time{1.0};
  Task task;
  task.level = ServiceLevel::kLevel3;
  task.estimated_slots = 1200;
  ValuationOptions opts;
  const auto e = std::get<ExponentialValuation>(make_valuation(task, pricing, time, opts));
  EXPECT_NEAR(e.price_per_slot * e.duration_slots, 0.006 * 20, 1e-12);
  opts.kind = ValuationKind::kLinear;
  const auto l = std::get<LinearValuation>(make_valuation(task, pricing, time, opts));
  EXPECT_NEAR(l.initial, 0.12, 1e-12);
  EXPECT_GT(l.decay_per_slot, 0.0);
  opts.kind = ValuationKind::kStep;
  const auto s = std::get<StepValuation>(make_valuation(task, pricing, time, opts));
  EXPECT_NEAR(s.reward, 0.12, 1e-12);
  EXPECT_DOUBLE_EQ(s.deadline_slots, 1800);
}

TEST(PricingConfig, ValidationRejectsBadValues) {
  PricingConfig p;
  EXPECT_NO_THROW(p.validate());
  p.alpha_per_s = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = PricingConfig{};
  p.price_per_min[1] = -0.1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace vtsim
