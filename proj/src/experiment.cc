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

#include "vtsim/experiment.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace vtsim {
namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument("expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

std::int64_t to_int(std::string_view s) {
  s = trim(s);
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

double positive(std::string_view s) {
  const double v = to_double(s);
  if (!(v > 0.0)) throw std::invalid_argument("must be positive");
  return v;
}

double non_negative(std::string_view s) {
  const double v = to_double(s);
  if (v < 0.0) throw std::invalid_argument("must be >= 0");
  return v;
}

std::int64_t at_least(std::string_view s, std::int64_t lo) {
  const std::int64_t v = to_int(s);
  if (v < lo) throw std::invalid_argument("must be >= " + std::to_string(lo));
  return v;
}

double open_unit(std::string_view s) {
  const double v = to_double(s);
  if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("must lie in (0, 1)");
  return v;
}

std::vector<double> to_doubles(std::string_view s) {
  std::vector<double> out;
  for (std::string_view item : split_list(s)) out.push_back(to_double(item));
  return out;
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += fmt(values[i]);
  }
  return out;
}

Slot seconds_to_whole_slots(double seconds, double slot_seconds) {
  const double slots = seconds / slot_seconds;
  const double rounded = std::round(slots);
  if (std::abs(slots - rounded) > 1e-9 * std::max(1.0, rounded) || rounded < 1.0) {
    throw std::invalid_argument("must be a positive whole number of slots");
  }
  return static_cast<Slot>(rounded);
}

struct Field {
  const char* key;
  std::function<void(ExperimentSpec&, std::string_view)> set;
  std::function<std::string(const ExperimentSpec&)> get;
};

const char* scheduler_label(SchedulerKind s) {
  return s == SchedulerKind::kValueBased ? "VBS" : "HVF";
}

const char* source_label(ArrivalSource s) {
  switch (s) {
    case ArrivalSource::kProfile: return "profile";
    case ArrivalSource::kTraceReplay: return "trace";
    case ArrivalSource::kTraceProfile: return "trace-profile";
  }
  return "profile";
}

const char* kind_label(ValuationKind k) {
  switch (k) {
    case ValuationKind::kExponential: return "exponential";
    case ValuationKind::kLinear: return "linear";
    case ValuationKind::kStep: return "step";
  }
  return "exponential";
}

// Applied in this order, so slot_seconds is known before any duration that
// is converted to slots.
const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"sim.slot_seconds", [](ExperimentSpec& s, std::string_view v) { s.sim.slot_seconds = positive(v); },
       [](const ExperimentSpec& s) { return fmt(s.sim.slot_seconds); }},
      {"sim.epoch_seconds",
       [](ExperimentSpec& s, std::string_view v) {
         s.sim.epoch_slots = seconds_to_whole_slots(positive(v), s.sim.slot_seconds);
       },
       [](const ExperimentSpec& s) { return fmt(s.sim.epoch_slots * s.sim.slot_seconds); }},
      {"sim.block_seconds",
       [](ExperimentSpec& s, std::string_view v) {
         s.sim.block_slots = seconds_to_whole_slots(positive(v), s.sim.slot_seconds);
       },
       [](const ExperimentSpec& s) { return fmt(s.sim.block_slots * s.sim.slot_seconds); }},
      {"sim.horizon_epochs", [](ExperimentSpec& s, std::string_view v) { s.sim.horizon_epochs = at_least(v, 1); },
       [](const ExperimentSpec& s) { return std::to_string(s.sim.horizon_epochs); }},
      {"sim.initial_workers",
       [](ExperimentSpec& s, std::string_view v) { s.sim.initial_workers = static_cast<int>(at_least(v, 0)); },
       [](const ExperimentSpec& s) { return std::to_string(s.sim.initial_workers); }},
      {"sim.seed",
       [](ExperimentSpec& s, std::string_view v) { s.sim.seed = static_cast<std::uint64_t>(at_least(v, 0)); },
       [](const ExperimentSpec& s) { return std::to_string(s.sim.seed); }},
      {"sim.gamma", [](ExperimentSpec& s, std::string_view v) { s.sim.gamma = open_unit(v); },
       [](const ExperimentSpec& s) { return fmt(s.sim.gamma); }},

      {"pricing.alpha_per_s", [](ExperimentSpec& s, std::string_view v) { s.sim.pricing.alpha_per_s = open_unit(v); },
       [](const ExperimentSpec& s) { return fmt(s.sim.pricing.alpha_per_s); }},
      {"pricing.level1_per_min",
       [](ExperimentSpec& s, std::string_view v) { s.sim.pricing.price_per_min[0] = non_negative(v); },
       [](const ExperimentSpec& s) { return fmt(s.sim.pricing.price_per_min[0]); }},
      {"pricing.level2_per_min",
       [](ExperimentSpec& s, std::string_view v) { s.sim.pricing.price_per_min[1] = non_negative(v); },
       [](const ExperimentSpec& s) { return fmt(s.sim.pricing.price_per_min[1]); }},
      {"pricing.level3_per_min",
       [](ExperimentSpec& s, std::string_view v) { s.sim.pricing.price_per_min[2] = non_negative(v); },
       [](const ExperimentSpec& s) { return fmt(s.sim.pricing.price_per_min[2]); }},
      {"pricing.vm_per_hour", [](ExperimentSpec& s, std::string_view v) { s.sim.pricing.vm_per_hour = non_negative(v); },
       [](const ExperimentSpec& s) { return fmt(s.sim.pricing.vm_per_hour); }},

      {"valuation.kind",
       [](ExperimentSpec& s, std::string_view v) {
         v = trim(v);
         if (v == "exponential") s.sim.valuation.kind = ValuationKind::kExponential;
         else if (v == "linear") s.sim.valuation.kind = ValuationKind::kLinear;
         else if (v == "step") s.sim.valuation.kind = ValuationKind::kStep;
         else throw std::invalid_argument("expected exponential, linear or step");
       },
       [](const ExperimentSpec& s) { return std::string(kind_label(s.sim.valuation.kind)); }},
      {"valuation.linear_decay_per_s",
       [](ExperimentSpec& s, std::string_view v) { s.sim.valuation.linear_decay_per_s = positive(v); },
       [](const ExperimentSpec& s) { return fmt(s.sim.valuation.linear_decay_per_s); }},
      {"valuation.step_deadline_s",
       [](ExperimentSpec& s, std::string_view v) { s.sim.valuation.step_deadline_s = non_negative(v); },
       [](const ExperimentSpec& s) { return fmt(s.sim.valuation.step_deadline_s); }},

      {"arrival.source",
       [](ExperimentSpec& s, std::string_view v) {
         v = trim(v);
         if (v == "profile") s.arrival_source = ArrivalSource::kProfile;
         else if (v == "trace") s.arrival_source = ArrivalSource::kTraceReplay;
         else if (v == "trace-profile") s.arrival_source = ArrivalSource::kTraceProfile;
         else throw std::invalid_argument("expected profile, trace or trace-profile");
       },
       [](const ExperimentSpec& s) { return std::string(source_label(s.arrival_source)); }},
      {"arrival.rates_per_min",
       [](ExperimentSpec& s, std::string_view v) {
         auto rates = to_doubles(v);
         if (rates.empty()) throw std::invalid_argument("needs at least one rate");
         for (double r : rates) {
           if (r < 0.0) throw std::invalid_argument("rates must be >= 0");
         }
         s.sim.rates_per_min = std::move(rates);
       },
       [](const ExperimentSpec& s) { return join(s.sim.rates_per_min); }},
      {"arrival.trace", [](ExperimentSpec& s, std::string_view v) { s.trace_path = std::string(trim(v)); },
       [](const ExperimentSpec& s) { return s.trace_path.string(); }},
      {"arrival.trace_min_per_min",
       [](ExperimentSpec& s, std::string_view v) { s.trace_scaling.min_per_min = non_negative(v); },
       [](const ExperimentSpec& s) { return fmt(s.trace_scaling.min_per_min); }},
      {"arrival.trace_max_per_min",
       [](ExperimentSpec& s, std::string_view v) { s.trace_scaling.max_per_min = non_negative(v); },
       [](const ExperimentSpec& s) { return fmt(s.trace_scaling.max_per_min); }},
      {"arrival.trace_fold_s",
       [](ExperimentSpec& s, std::string_view v) {
         const double fold = non_negative(v);
         s.trace_scaling.fold_period_s = fold > 0.0 ? std::optional<double>(fold) : std::nullopt;
       },
       [](const ExperimentSpec& s) { return fmt(s.trace_scaling.fold_period_s.value_or(0.0)); }},

      {"media.min_duration_s", [](ExperimentSpec& s, std::string_view v) { s.sim.media.min_duration_s = positive(v); },
       [](const ExperimentSpec& s) { return fmt(s.sim.media.min_duration_s); }},
      {"media.max_duration_s", [](ExperimentSpec& s, std::string_view v) { s.sim.media.max_duration_s = positive(v); },
       [](const ExperimentSpec& s) { return fmt(s.sim.media.max_duration_s); }},
      {"media.min_bitrate_kbps",
       [](ExperimentSpec& s, std::string_view v) { s.sim.media.min_bitrate_kbps = positive(v); },
       [](const ExperimentSpec& s) { return fmt(s.sim.media.min_bitrate_kbps); }},
      {"media.max_bitrate_kbps",
       [](ExperimentSpec& s, std::string_view v) { s.sim.media.max_bitrate_kbps = positive(v); },
       [](const ExperimentSpec& s) { return fmt(s.sim.media.max_bitrate_kbps); }},

      {"state.omega_edges",
       [](ExperimentSpec& s, std::string_view v) {
         BinEdges e{to_doubles(v)};
         e.validate();
         s.sim.bins.omega = std::move(e);
       },
       [](const ExperimentSpec& s) { return join(s.sim.bins.omega.edges); }},
      {"state.lambda_edges",
       [](ExperimentSpec& s, std::string_view v) {
         BinEdges e{to_doubles(v)};
         e.validate();
         s.sim.bins.lambda_per_min = std::move(e);
       },
       [](const ExperimentSpec& s) { return join(s.sim.bins.lambda_per_min.edges); }},
      {"state.max_workers",
       [](ExperimentSpec& s, std::string_view v) { s.sim.bins.max_workers = static_cast<int>(at_least(v, 1)); },
       [](const ExperimentSpec& s) { return std::to_string(s.sim.bins.max_workers); }},

      {"learning.loops", [](ExperimentSpec& s, std::string_view v) { s.training.loops = at_least(v, 1); },
       [](const ExperimentSpec& s) { return std::to_string(s.training.loops); }},
      {"learning.max_step",
       [](ExperimentSpec& s, std::string_view v) { s.training.max_step = static_cast<int>(at_least(v, 1)); },
       [](const ExperimentSpec& s) { return std::to_string(s.training.max_step); }},
      {"learning.epsilon_start",
       [](ExperimentSpec& s, std::string_view v) {
         const double e = non_negative(v);
         if (e > 1.0) throw std::invalid_argument("must lie in [0, 1]");
         s.training.epsilon.start = e;
       },
       [](const ExperimentSpec& s) { return fmt(s.training.epsilon.start); }},
      {"learning.epsilon_end",
       [](ExperimentSpec& s, std::string_view v) {
         const double e = non_negative(v);
         if (e > 1.0) throw std::invalid_argument("must lie in [0, 1]");
         s.training.epsilon.end = e;
       },
       [](const ExperimentSpec& s) { return fmt(s.training.epsilon.end); }},
      {"learning.rate",
       [](ExperimentSpec& s, std::string_view v) {
         v = trim(v);
         if (v == "inverse-visits") s.training.learning_rate.kind = LearningRate::Kind::kInverseVisits;
         else if (v == "constant") s.training.learning_rate.kind = LearningRate::Kind::kConstant;
         else if (v == "polynomial") s.training.learning_rate.kind = LearningRate::Kind::kPolynomial;
         else throw std::invalid_argument("expected inverse-visits, constant or polynomial");
       },
       [](const ExperimentSpec& s) {
         switch (s.training.learning_rate.kind) {
           case LearningRate::Kind::kConstant: return std::string("constant");
           case LearningRate::Kind::kPolynomial: return std::string("polynomial");
           default: return std::string("inverse-visits");
         }
       }},
      {"learning.rate_exponent",
       [](ExperimentSpec& s, std::string_view v) {
         const double e = to_double(v);
         if (!(e > 0.5 && e <= 1.0)) throw std::invalid_argument("must lie in (0.5, 1]");
         s.training.learning_rate.exponent = e;
       },
       [](const ExperimentSpec& s) { return fmt(s.training.learning_rate.exponent); }},
      {"learning.rate_constant",
       [](ExperimentSpec& s, std::string_view v) {
         const double r = positive(v);
         if (r > 1.0) throw std::invalid_argument("must lie in (0, 1]");
         s.training.learning_rate.constant = r;
       },
       [](const ExperimentSpec& s) { return fmt(s.training.learning_rate.constant); }},
      {"learning.initial_value",
       [](ExperimentSpec& s, std::string_view v) { s.training.initial_value = to_double(v); },
       [](const ExperimentSpec& s) { return fmt(s.training.initial_value); }},

      {"experiment.policies",
       [](ExperimentSpec& s, std::string_view v) {
         std::vector<PolicySpec> policies;
         for (std::string_view item : split_list(v)) policies.push_back(parse_policy(item));
         if (policies.empty()) throw std::invalid_argument("needs at least one policy");
         s.policies = std::move(policies);
       },
       [](const ExperimentSpec& s) {
         std::string out;
         for (std::size_t i = 0; i < s.policies.size(); ++i) {
           if (i) out += ',';
           out += s.policies[i].name();
         }
         return out;
       }},
      {"experiment.replications",
       [](ExperimentSpec& s, std::string_view v) { s.replications = static_cast<int>(at_least(v, 1)); },
       [](const ExperimentSpec& s) { return std::to_string(s.replications); }},
      {"experiment.threads",
       [](ExperimentSpec& s, std::string_view v) { s.threads = static_cast<int>(at_least(v, 0)); },
       [](const ExperimentSpec& s) { return std::to_string(s.threads); }},
      {"experiment.output_dir", [](ExperimentSpec& s, std::string_view v) { s.output_dir = std::string(trim(v)); },
       [](const ExperimentSpec& s) { return s.output_dir.string(); }},
      {"experiment.estimator_model",
       [](ExperimentSpec& s, std::string_view v) { s.estimator_model = std::string(trim(v)); },
       [](const ExperimentSpec& s) { return s.estimator_model.string(); }},

      {"estimator.samples",
       [](ExperimentSpec& s, std::string_view v) {
         s.estimator.samples = static_cast<std::size_t>(at_least(v, static_cast<std::int64_t>(kMinTrainingSamples)));
       },
       [](const ExperimentSpec& s) { return std::to_string(s.estimator.samples); }},
      {"estimator.hidden",
       [](ExperimentSpec& s, std::string_view v) { s.estimator.train.hidden = static_cast<int>(at_least(v, 1)); },
       [](const ExperimentSpec& s) { return std::to_string(s.estimator.train.hidden); }},
      {"estimator.optimizer",
       [](ExperimentSpec& s, std::string_view v) {
         v = trim(v);
         if (v == "adam") s.estimator.train.optimizer = Optimizer::kAdam;
         else if (v == "gd") s.estimator.train.optimizer = Optimizer::kGradientDescent;
         else throw std::invalid_argument("expected adam or gd");
       },
       [](const ExperimentSpec& s) {
         return std::string(s.estimator.train.optimizer == Optimizer::kAdam ? "adam" : "gd");
       }},
      {"estimator.learning_rate",
       [](ExperimentSpec& s, std::string_view v) { s.estimator.train.learning_rate = positive(v); },
       [](const ExperimentSpec& s) { return fmt(s.estimator.train.learning_rate); }},
      {"estimator.max_iterations",
       [](ExperimentSpec& s, std::string_view v) {
         s.estimator.train.max_iterations = static_cast<int>(at_least(v, 1));
       },
       [](const ExperimentSpec& s) { return std::to_string(s.estimator.train.max_iterations); }},
      {"estimator.check_every",
       [](ExperimentSpec& s, std::string_view v) { s.estimator.train.check_every = static_cast<int>(at_least(v, 1)); },
       [](const ExperimentSpec& s) { return std::to_string(s.estimator.train.check_every); }},
      {"estimator.patience",
       [](ExperimentSpec& s, std::string_view v) { s.estimator.train.patience = static_cast<int>(at_least(v, 1)); },
       [](const ExperimentSpec& s) { return std::to_string(s.estimator.train.patience); }},
      {"estimator.train_fraction",
       [](ExperimentSpec& s, std::string_view v) { s.estimator.train.train_fraction = open_unit(v); },
       [](const ExperimentSpec& s) { return fmt(s.estimator.train.train_fraction); }},
      {"estimator.validation_fraction",
       [](ExperimentSpec& s, std::string_view v) { s.estimator.train.validation_fraction = open_unit(v); },
       [](const ExperimentSpec& s) { return fmt(s.estimator.train.validation_fraction); }},
  };
  return table;
}

void run_parallel(std::vector<std::function<void()>>& jobs, int threads) {
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        jobs[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  int n = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n = std::clamp(n, 1, static_cast<int>(std::max<std::size_t>(1, jobs.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  // Report the first failure in job order so the message is reproducible.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Per-epoch empirical rates of a trace, used as the training profile when
// the evaluation replays the trace itself.
std::vector<double> trace_epoch_rates(const std::vector<TraceRecord>& trace, const SimConfig& sim) {
  const double epoch_s = sim.epoch_slots * sim.slot_seconds;
  std::vector<double> rates;
  for (const TraceRecord& r : trace) {
    const auto k = static_cast<std::size_t>(std::floor(r.arrival_s / epoch_s));
    if (rates.size() <= k) rates.resize(k + 1, 0.0);
    rates[k] += 60.0 / epoch_s;
  }
  if (rates.empty()) rates.push_back(0.0);
  return rates;
}

}  // namespace

std::string PolicySpec::name() const {
  switch (kind) {
    case Kind::kLearned:
      return std::string("LRP-") + scheduler_label(scheduler);
    case Kind::kFixed:
    case Kind::kArrivalRate: {
      std::string out = (kind == Kind::kFixed ? "FP(" : "ARP(") + fmt(parameter) + ")";
      if (scheduler == SchedulerKind::kHighestValueFirst) out += "-HVF";
      return out;
    }
  }
  return "?";
}

PolicySpec parse_policy(std::string_view text) {
  text = trim(text);
  const std::string original(text);
  PolicySpec p;
  auto take_scheduler = [&](std::string_view suffix) {
    if (suffix == "VBS") {
      p.scheduler = SchedulerKind::kValueBased;
    } else if (suffix == "HVF") {
      p.scheduler = SchedulerKind::kHighestValueFirst;
    } else {
      throw std::invalid_argument("unknown scheduler in policy '" + original + "'");
    }
  };
  if (text.starts_with("LRP")) {
    p.kind = PolicySpec::Kind::kLearned;
    p.parameter = 0.0;
    if (text == "LRP") return p;
    if (text.size() < 5 || text[3] != '-') throw std::invalid_argument("unknown policy '" + original + "'");
    take_scheduler(text.substr(4));
    return p;
  }
  if (text.starts_with("FP(")) {
    p.kind = PolicySpec::Kind::kFixed;
    text.remove_prefix(3);
  } else if (text.starts_with("ARP(")) {
    p.kind = PolicySpec::Kind::kArrivalRate;
    text.remove_prefix(4);
  } else {
    throw std::invalid_argument("unknown policy '" + original + "'");
  }
  const auto close = text.find(')');
  if (close == std::string_view::npos) throw std::invalid_argument("unbalanced policy '" + original + "'");
  p.parameter = to_double(text.substr(0, close));
  if (p.parameter < 0.0) throw std::invalid_argument("negative parameter in policy '" + original + "'");
  if (p.kind == PolicySpec::Kind::kFixed && p.parameter != std::floor(p.parameter)) {
    throw std::invalid_argument("FP needs a whole worker count in '" + original + "'");
  }
  std::string_view rest = text.substr(close + 1);
  if (!rest.empty()) {
    if (rest.front() != '-') throw std::invalid_argument("unknown policy '" + original + "'");
    take_scheduler(rest.substr(1));
  }
  return p;
}

ExperimentSpec::ExperimentSpec()
    : policies{parse_policy("LRP-VBS"), parse_policy("LRP-HVF"), parse_policy("FP(10)"),
               parse_policy("FP(15)"), parse_policy("ARP(30)")} {}

void ExperimentSpec::validate() const {
  try {
    sim.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid simulation settings: ") + e.what(), "", 0);
  }
  if (policies.empty()) throw ConfigError("at least one policy is required", "experiment.policies", 0);
  for (std::size_t i = 0; i < policies.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (policies[i].name() == policies[j].name()) {
        throw ConfigError("duplicate policy " + policies[i].name(), "experiment.policies", 0);
      }
    }
    if (policies[i].kind == PolicySpec::Kind::kFixed && policies[i].parameter > sim.bins.max_workers) {
      throw ConfigError(policies[i].name() + " exceeds state.max_workers", "experiment.policies", 0);
    }
  }
  if (replications < 1) throw ConfigError("replications must be >= 1", "experiment.replications", 0);
  if (sim.initial_workers > sim.bins.max_workers) {
    throw ConfigError("initial workers exceed state.max_workers", "sim.initial_workers", 0);
  }
  if (arrival_source != ArrivalSource::kProfile && trace_path.empty()) {
    throw ConfigError("trace arrivals need arrival.trace", "arrival.trace", 0);
  }
  if (trace_scaling.min_per_min > trace_scaling.max_per_min) {
    throw ConfigError("trace_min_per_min exceeds trace_max_per_min", "arrival.trace_min_per_min", 0);
  }
  if (sim.media.min_duration_s > sim.media.max_duration_s) {
    throw ConfigError("min_duration_s exceeds max_duration_s", "media.min_duration_s", 0);
  }
  if (sim.media.min_bitrate_kbps > sim.media.max_bitrate_kbps) {
    throw ConfigError("min_bitrate_kbps exceeds max_bitrate_kbps", "media.min_bitrate_kbps", 0);
  }
  if (estimator.train.train_fraction + estimator.train.validation_fraction >= 1.0) {
    throw ConfigError("train and validation fractions leave no test split",
                      "estimator.validation_fraction", 0);
  }
}

bool operator==(const EstimatorSpec& a, const EstimatorSpec& b) {
  const TrainOptions& x = a.train;
  const TrainOptions& y = b.train;
  return a.samples == b.samples && x.hidden == y.hidden && x.train_fraction == y.train_fraction &&
         x.validation_fraction == y.validation_fraction && x.optimizer == y.optimizer &&
         x.learning_rate == y.learning_rate && x.max_iterations == y.max_iterations &&
         x.check_every == y.check_every && x.patience == y.patience && x.seed == y.seed &&
         a.rule.c1 == b.rule.c1 && a.rule.c2 == b.rule.c2 && a.rule.noise == b.rule.noise;
}

bool operator==(const ExperimentSpec& a, const ExperimentSpec& b) {
  // Every configurable field has a key, so comparing the rendered text is
  // a complete comparison.
  std::ostringstream x;
  std::ostringstream y;
  format_config(x, a);
  format_config(y, b);
  return x.str() == y.str();
}

ExperimentSpec parse_config(std::istream& in) {
  struct Entry {
    std::string value;
    long line;
  };
  std::map<std::string, Entry> entries;
  std::string raw;
  long line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value", "", line_no);
    }
    const std::string key(trim(line.substr(0, eq)));
    const bool known = std::any_of(fields().begin(), fields().end(),
                                   [&](const Field& f) { return key == f.key; });
    if (!known) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'", key,
                        line_no);
    }
    if (entries.count(key)) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'", key,
                        line_no);
    }
    entries[key] = Entry{std::string(trim(line.substr(eq + 1))), line_no};
  }
  ExperimentSpec spec;
  for (const Field& f : fields()) {
    const auto it = entries.find(f.key);
    if (it == entries.end()) continue;
    try {
      f.set(spec, it->second.value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("line " + std::to_string(it->second.line) + ": " + f.key + ": " + e.what(),
                        f.key, it->second.line);
    }
  }
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    const auto it = entries.find(e.key());
    throw ConfigError(e.what(), e.key(), it == entries.end() ? 0 : it->second.line);
  }
  return spec;
}

ExperimentSpec parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string(), "", 0);
  return parse_config(in);
}

void format_config(std::ostream& out, const ExperimentSpec& spec) {
  for (const Field& f : fields()) out << f.key << '=' << f.get(spec) << '\n';
}

SimConfig resolve_sim_config(const ExperimentSpec& spec) {
  SimConfig sim = spec.sim;
  if (spec.arrival_source == ArrivalSource::kProfile) return sim;
  std::vector<TraceRecord> trace = load_trace(spec.trace_path);
  if (spec.arrival_source == ArrivalSource::kTraceReplay) {
    sim.trace = std::move(trace);
    return sim;
  }
  TraceScaling scaling = spec.trace_scaling;
  scaling.slot_seconds = sim.slot_seconds;
  scaling.bucket_s = sim.epoch_slots * sim.slot_seconds;
  const ArrivalProfile profile = scale_trace_to_rates(trace, scaling);
  sim.rates_per_min.clear();
  for (double r : profile.rates_per_slot) sim.rates_per_min.push_back(r * 60.0 / sim.slot_seconds);
  return sim;
}

DurationEstimator make_estimator(const ExperimentSpec& spec) {
  if (spec.estimator_model.empty()) {
    const SyntheticTimeRule rule = spec.estimator.rule;
    return [rule](const MediaFeatures& f) { return reference_transcode_seconds(f, rule); };
  }
  auto model = std::make_shared<const NeuralModel>(load_model(spec.estimator_model));
  return [model](const MediaFeatures& f) { return predict(*model, f); };
}

TrainedPolicy train_lrp(const ExperimentSpec& spec, SchedulerKind scheduler) {
  SimConfig sim = resolve_sim_config(spec);
  if (sim.trace) {
    sim.rates_per_min = trace_epoch_rates(*sim.trace, sim);
    sim.trace.reset();
  }
  sim.scheduler = scheduler;
  // Training traffic comes from a seed stream no evaluation replication uses.
  sim.seed = spec.sim.seed ^ 0x9e3779b97f4a7c15ULL;

  QLearningConfig q;
  q.gamma = spec.sim.gamma;
  q.max_step = spec.training.max_step;
  q.initial_value = spec.training.initial_value;
  q.learning_rate = spec.training.learning_rate;

  TrainedPolicy trained;
  trained.table = std::make_shared<QTable>(sim.bins, q);
  SimulationEnvironment env(sim, make_estimator(spec));
  trained.log = train_policy(env, *trained.table, spec.training.loops, spec.training.epsilon,
                             spec.sim.seed);
  if (!trained.table->all_finite()) {
    throw std::runtime_error("Q-learning diverged for LRP-" + std::string(scheduler_label(scheduler)));
  }
  return trained;
}

std::unique_ptr<ProvisioningPolicy> make_policy(const PolicySpec& policy,
                                                std::shared_ptr<const QTable> table) {
  switch (policy.kind) {
    case PolicySpec::Kind::kLearned:
      if (!table) throw std::invalid_argument(policy.name() + " needs a trained Q-table");
      return learned_policy(std::move(table));
    case PolicySpec::Kind::kFixed:
      return fixed_policy(static_cast<int>(policy.parameter));
    case PolicySpec::Kind::kArrivalRate:
      return arrival_rate_policy(policy.parameter);
  }
  throw std::logic_error("unknown policy kind");
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const SimConfig sim = resolve_sim_config(spec);
  const DurationEstimator estimator = make_estimator(spec);

  ExperimentResult result;
  std::map<SchedulerKind, TrainedPolicy> trained;
  for (const PolicySpec& p : spec.policies) {
    if (p.kind == PolicySpec::Kind::kLearned) trained[p.scheduler];
  }
  std::vector<std::function<void()>> jobs;
  for (auto& [scheduler, slot] : trained) {
    jobs.push_back([&spec, scheduler = scheduler, &slot = slot] { slot = train_lrp(spec, scheduler); });
  }
  run_parallel(jobs, spec.threads);

  for (const PolicySpec& p : spec.policies) {
    PolicyRuns runs;
    runs.policy = p;
    runs.runs.resize(static_cast<std::size_t>(spec.replications));
    if (p.kind == PolicySpec::Kind::kLearned) {
      runs.table = trained[p.scheduler].table;
      runs.training_log = trained[p.scheduler].log;
    }
    result.policies.push_back(std::move(runs));
  }
  jobs.clear();
  for (PolicyRuns& runs : result.policies) {
    for (int r = 0; r < spec.replications; ++r) {
      jobs.push_back([&sim, &estimator, &runs, r] {
        SimConfig config = sim;
        config.scheduler = runs.policy.scheduler;
        config.seed = sim.seed + static_cast<std::uint64_t>(r);
        auto policy = make_policy(runs.policy, runs.table);
        runs.runs[static_cast<std::size_t>(r)] = run(config, *policy, estimator);
      });
    }
  }
  run_parallel(jobs, spec.threads);
  return result;
}

PolicySummary summarize(const PolicyRuns& runs) {
  PolicySummary s;
  s.policy = runs.policy.name();
  s.replications = static_cast<int>(runs.runs.size());
  if (runs.runs.empty()) return s;
  const double n = static_cast<double>(runs.runs.size());
  double p = 0, p2 = 0, d = 0, d2 = 0, rev = 0, cost = 0;
  for (const RunReport& r : runs.runs) {
    const double profit = r.profit.dollars();
    p += profit;
    p2 += profit * profit;
    d += r.discounted_profit;
    d2 += r.discounted_profit * r.discounted_profit;
    rev += r.revenue.dollars();
    cost += r.cost.dollars();
  }
  s.mean_profit = p / n;
  s.mean_discounted_profit = d / n;
  s.mean_revenue = rev / n;
  s.mean_cost = cost / n;
  if (runs.runs.size() > 1) {
    s.std_profit = std::sqrt(std::max(0.0, (p2 - n * s.mean_profit * s.mean_profit) / (n - 1)));
    s.std_discounted_profit = std::sqrt(
        std::max(0.0, (d2 - n * s.mean_discounted_profit * s.mean_discounted_profit) / (n - 1)));
    s.se_profit = s.std_profit / std::sqrt(n);
  }
  return s;
}

std::string file_label(const std::string& policy) {
  std::string out;
  for (char c : policy) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.') {
      out += c;
    } else if (c == '-') {
      out += '-';
    } else if (c == '(') {
      out += '_';
    }
  }
  return out;
}

void emit_report(const ExperimentResult& result, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

  auto comparison = open_output(out_dir / "comparison.csv");
  comparison << "policy,replications,mean_profit,std_profit,se_profit,mean_discounted_profit,"
                "std_discounted_profit,mean_revenue,mean_cost\n";
  auto cumulative = open_output(out_dir / "cumulative_profit.csv");
  cumulative << "policy,replication,epoch,profit,cumulative_profit\n";
  auto instances = open_output(out_dir / "instances.csv");
  instances << "policy,replication,epoch,workers,arrival_per_min\n";

  for (const PolicyRuns& runs : result.policies) {
    const PolicySummary s = summarize(runs);
    const std::string label = file_label(s.policy);
    comparison << s.policy << ',' << s.replications << ',' << fmt(s.mean_profit) << ','
               << fmt(s.std_profit) << ',' << fmt(s.se_profit) << ','
               << fmt(s.mean_discounted_profit) << ',' << fmt(s.std_discounted_profit) << ','
               << fmt(s.mean_revenue) << ',' << fmt(s.mean_cost) << '\n';
    for (std::size_t r = 0; r < runs.runs.size(); ++r) {
      const RunReport& report = runs.runs[r];
      Money total;
      for (const EpochReport& e : report.epochs) {
        total += e.profit;
        cumulative << s.policy << ',' << r << ',' << e.epoch << ',' << e.profit.to_string() << ','
                   << total.to_string() << '\n';
        instances << s.policy << ',' << r << ',' << e.epoch << ',' << e.workers << ','
                  << fmt(e.arrival_per_min) << '\n';
      }
      auto out = open_output(out_dir / ("report_" + label + "_r" + std::to_string(r) + ".csv"));
      write_run_report(out, report);
    }
    if (runs.table) {
      auto q = open_output(out_dir / ("qtable_" + label + ".csv"));
      write_qtable(q, *runs.table);
      auto log = open_output(out_dir / ("training_" + label + ".csv"));
      write_reward_log(log, runs.training_log);
    }
  }
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

EstimatorEvaluation evaluate_estimator(std::span<const Sample> dataset, const TrainOptions& options,
                                       NeuralModel* model) {
  TrainResult trained = train(dataset, options);
  std::vector<Sample> train_split;
  for (std::size_t i : trained.train_indices) train_split.push_back(dataset[i]);
  const LinearModel linear = fit_linear(train_split);

  EstimatorEvaluation eval;
  eval.iterations = trained.iterations;
  std::vector<double> nn_abs;
  std::vector<double> lin_abs;
  std::size_t within = 0;
  for (std::size_t i : trained.test_indices) {
    const Sample& s = dataset[i];
    const double nn = normalized_error(predict(trained.model, s.features), s.seconds);
    const double lin = normalized_error(predict(linear, s.features), s.seconds);
    eval.nn_errors.push_back(nn);
    eval.linear_errors.push_back(lin);
    nn_abs.push_back(std::abs(nn));
    lin_abs.push_back(std::abs(lin));
    if (std::abs(nn) <= kErrorBand) ++within;
  }
  if (nn_abs.empty()) throw std::invalid_argument("test split is empty");
  eval.nn_median_abs = median(nn_abs);
  eval.linear_median_abs = median(lin_abs);
  eval.nn_within_band = static_cast<double>(within) / static_cast<double>(nn_abs.size());
  if (model) *model = std::move(trained.model);
  return eval;
}

}  // namespace vtsim
