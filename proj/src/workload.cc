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

#include "vtsim/workload.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

namespace vtsim {
namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view field, const char* name, long row) {
  field = trim(field);
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError("row " + std::to_string(row) + ": cannot parse " + name +
                         " from '" + std::string(field) + "'",
                     row);
  }
  return value;
}

std::seed_seq make_seed(std::uint64_t seed, std::uint64_t stream,
                        std::uint64_t salt) {
  return std::seed_seq{static_cast<std::uint32_t>(seed),
                       static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(stream),
                       static_cast<std::uint32_t>(stream >> 32),
                       static_cast<std::uint32_t>(salt)};
}

constexpr Resolution kSourceResolutions[] = {
    {3840, 2160}, {2560, 1440}, {1920, 1080}, {1280, 720}, {854, 480}};
constexpr Resolution kTargetResolutions[] = {{854, 480}, {640, 360}, {426, 240}};
constexpr double kFrameRates[] = {24.0, 25.0, 30.0, 50.0, 60.0};

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

}  // namespace

std::optional<ServiceLevel> service_level_from_int(long value) {
  switch (value) {
    case 1: return ServiceLevel::kLevel1;
    case 2: return ServiceLevel::kLevel2;
    case 3: return ServiceLevel::kLevel3;
    default: return std::nullopt;
  }
}

void validate(const MediaFeatures& f) {
  auto check = [](double v, const char* name) {
    if (!positive_finite(v)) {
      throw std::invalid_argument(std::string("media feature ") + name +
                                  " must be positive");
    }
  };
  check(f.duration_s, "duration_s");
  check(f.bitrate_kbps, "bitrate_kbps");
  check(f.framerate_fps, "framerate_fps");
  check(f.source_pixels, "source_pixels");
  check(f.target_pixels, "target_pixels");
}

Task make_task(std::uint64_t id, Slot arrival, ServiceLevel level,
               const MediaFeatures& features, double estimated_slots,
               Slot block_slots) {
  if (!positive_finite(estimated_slots)) {
    throw std::invalid_argument("estimated duration must be positive");
  }
  if (block_slots <= 0) {
    throw std::invalid_argument("block length must be positive");
  }
  Task task;
  task.id = id;
  task.arrival = arrival;
  task.level = level;
  task.features = features;
  task.estimated_slots = estimated_slots;
  task.block_count = static_cast<int>(
      std::max<double>(1.0, std::ceil(estimated_slots / static_cast<double>(block_slots))));
  return task;
}

void ArrivalProfile::validate() const {
  if (rates_per_slot.empty()) {
    throw std::invalid_argument("arrival profile has no epochs");
  }
  if (epoch_slots < 1) {
    throw std::invalid_argument("epoch length must be at least one slot");
  }
  for (double r : rates_per_slot) {
    if (!std::isfinite(r) || r < 0.0) {
      throw std::invalid_argument("arrival rates must be finite and >= 0");
    }
  }
}

ArrivalProfile profile_from_per_minute(std::span<const double> rates_per_min,
                                       Slot epoch_slots, double slot_seconds) {
  ArrivalProfile profile;
  profile.epoch_slots = epoch_slots;
  profile.rates_per_slot.reserve(rates_per_min.size());
  for (double r : rates_per_min) {
    profile.rates_per_slot.push_back(r * slot_seconds / 60.0);
  }
  profile.validate();
  return profile;
}

std::vector<double> diurnal_rates_per_min(double low, double high) {
  std::vector<double> rates(24);
  const double mid = 0.5 * (low + high);
  const double amp = 0.5 * (high - low);
  for (int h = 0; h < 24; ++h) {
    rates[h] = mid - amp * std::cos(2.0 * std::numbers::pi * (h - 4) / 24.0);
  }
  return rates;
}

std::vector<Slot> sample_arrivals(const ArrivalProfile& profile,
                                  std::size_t epoch_index, std::uint64_t seed) {
  if (epoch_index >= profile.epochs()) {
    throw std::out_of_range("epoch index " + std::to_string(epoch_index) +
                            " outside profile of " +
                            std::to_string(profile.epochs()) + " epochs");
  }
  const double rate = profile.rates_per_slot[epoch_index];
  std::vector<Slot> arrivals;
  if (rate <= 0.0) return arrivals;

  std::seed_seq seq = make_seed(seed, epoch_index, 0xa441);
  std::mt19937_64 rng(seq);
  std::poisson_distribution<int> per_slot(rate);
  const Slot first = static_cast<Slot>(epoch_index) * profile.epoch_slots;
  for (Slot j = 0; j < profile.epoch_slots; ++j) {
    for (int n = per_slot(rng); n > 0; --n) arrivals.push_back(first + j);
  }
  return arrivals;
}

TraceRecord parse_trace_row(std::string_view line, long row, std::span<double> extra) {
  auto fields = split_csv(line);
  const std::size_t expected = 9 + extra.size();
  if (fields.size() != expected) {
    throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(expected) +
                         " fields, got " + std::to_string(fields.size()),
                     row);
  }
  TraceRecord rec;
  rec.arrival_s = parse_number<double>(fields[0], "arrival_time_s", row);
  auto level = service_level_from_int(parse_number<long>(fields[1], "service_level", row));
  if (!level) {
    throw ParseError("row " + std::to_string(row) + ": service_level must be 1, 2 or 3", row);
  }
  rec.level = *level;
  rec.features.duration_s = parse_number<double>(fields[2], "duration_s", row);
  rec.features.bitrate_kbps = parse_number<double>(fields[3], "bitrate_kbps", row);
  rec.features.framerate_fps = parse_number<double>(fields[4], "framerate_fps", row);
  const long sw = parse_number<long>(fields[5], "src_width", row);
  const long sh = parse_number<long>(fields[6], "src_height", row);
  const long dw = parse_number<long>(fields[7], "dst_width", row);
  const long dh = parse_number<long>(fields[8], "dst_height", row);
  rec.source = Resolution{sw, sh};
  rec.target = Resolution{dw, dh};
  rec.features.source_pixels = rec.source.pixels();
  rec.features.target_pixels = rec.target.pixels();
  if (!std::isfinite(rec.arrival_s) || rec.arrival_s < 0.0) {
    throw ParseError("row " + std::to_string(row) + ": arrival_time_s must be >= 0", row);
  }
  if (sw <= 0 || sh <= 0 || dw <= 0 || dh <= 0) {
    throw ParseError("row " + std::to_string(row) + ": resolutions must be positive", row);
  }
  try {
    validate(rec.features);
  } catch (const std::invalid_argument& e) {
    throw ParseError("row " + std::to_string(row) + ": " + e.what(), row);
  }
  for (std::size_t i = 0; i < extra.size(); ++i) {
    extra[i] = parse_number<double>(fields[9 + i], "extra column", row);
  }
  return rec;
}

std::vector<TraceRecord> load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace " + path.string(), 0);

  std::string line;
  if (!std::getline(in, line) || trim(line) != kTraceHeader) {
    throw ParseError("row 1: expected header '" + std::string(kTraceHeader) + "'", 1);
  }

  std::vector<TraceRecord> records;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    TraceRecord rec = parse_trace_row(line, row);
    if (!records.empty() && rec.arrival_s < records.back().arrival_s) {
      throw ParseError("row " + std::to_string(row) + ": arrival times must be non-decreasing",
                       row);
    }
    records.push_back(rec);
  }
  return records;
}

void write_trace(const std::filesystem::path& path, std::span<const TraceRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kTraceHeader << '\n';
  out.precision(17);
  for (const TraceRecord& r : records) {
    write_trace_fields(out, r);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_trace_fields(std::ostream& out, const TraceRecord& r) {
  // Unknown dimensions are written as pixels x 1 so the products survive.
  const Resolution src = r.source.width > 0 ? r.source
                                            : Resolution{std::lround(r.features.source_pixels), 1};
  const Resolution dst = r.target.width > 0 ? r.target
                                            : Resolution{std::lround(r.features.target_pixels), 1};
  out << r.arrival_s << ',' << static_cast<int>(r.level) << ',' << r.features.duration_s << ','
      << r.features.bitrate_kbps << ',' << r.features.framerate_fps << ',' << src.width << ','
      << src.height << ',' << dst.width << ',' << dst.height;
}

ArrivalProfile scale_trace_to_rates(std::span<const TraceRecord> records,
                                    const TraceScaling& scaling) {
  if (records.empty()) throw std::invalid_argument("cannot scale an empty trace");
  if (!(scaling.min_per_min < scaling.max_per_min) || scaling.min_per_min < 0.0) {
    throw std::invalid_argument("rate range must satisfy 0 <= min < max");
  }
  if (!(scaling.bucket_s > 0.0) || !(scaling.slot_seconds > 0.0)) {
    throw std::invalid_argument("bucket and slot lengths must be positive");
  }
  const double last = records.back().arrival_s;
  std::size_t buckets = 0;
  double periods = 1.0;
  if (scaling.fold_period_s) {
    const double period = *scaling.fold_period_s;
    if (!(period >= scaling.bucket_s)) {
      throw std::invalid_argument("fold period must cover at least one bucket");
    }
    buckets = static_cast<std::size_t>(std::ceil(period / scaling.bucket_s));
    periods = std::floor(last / period) + 1.0;
  } else {
    buckets = static_cast<std::size_t>(std::floor(last / scaling.bucket_s)) + 1;
  }

  std::vector<double> counts(buckets, 0.0);
  for (const TraceRecord& r : records) {
    double t = r.arrival_s;
    if (scaling.fold_period_s) t = std::fmod(t, *scaling.fold_period_s);
    auto b = static_cast<std::size_t>(std::floor(t / scaling.bucket_s));
    counts[std::min(b, buckets - 1)] += 1.0;
  }
  const double bucket_min = scaling.bucket_s / 60.0;
  std::vector<double> per_min(buckets);
  for (std::size_t i = 0; i < buckets; ++i) per_min[i] = counts[i] / (periods * bucket_min);

  const auto [lo_it, hi_it] = std::minmax_element(per_min.begin(), per_min.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> scaled(buckets);
  if (hi == lo) {
    std::clog << "warning: trace has identical bucket rates; using constant profile\n";
    std::fill(scaled.begin(), scaled.end(), 0.5 * (scaling.min_per_min + scaling.max_per_min));
  } else {
    const double span = scaling.max_per_min - scaling.min_per_min;
    for (std::size_t i = 0; i < buckets; ++i) {
      double v = scaling.min_per_min + (per_min[i] - lo) / (hi - lo) * span;
      scaled[i] = std::clamp(v, scaling.min_per_min, scaling.max_per_min);
    }
  }

  const double epoch = scaling.bucket_s / scaling.slot_seconds;
  const auto epoch_slots = static_cast<Slot>(std::llround(epoch));
  if (epoch_slots < 1 || std::abs(epoch - static_cast<double>(epoch_slots)) > 1e-9) {
    throw std::invalid_argument("bucket length must be a whole number of slots");
  }
  return profile_from_per_minute(scaled, epoch_slots, scaling.slot_seconds);
}

MediaSample sample_media(std::mt19937_64& rng, const MediaMix& mix) {
  MediaSample s;
  std::uniform_int_distribution<std::size_t> pick_src(0, std::size(kSourceResolutions) - 1);
  s.source = kSourceResolutions[pick_src(rng)];
  // Targets never exceed the source resolution.
  std::vector<Resolution> targets;
  for (const Resolution& r : kTargetResolutions) {
    if (r.pixels() <= s.source.pixels()) targets.push_back(r);
  }
  std::uniform_int_distribution<std::size_t> pick_dst(0, targets.size() - 1);
  s.target = targets[pick_dst(rng)];
  std::uniform_int_distribution<std::size_t> pick_fps(0, std::size(kFrameRates) - 1);

  s.features.duration_s = log_uniform(rng, mix.min_duration_s, mix.max_duration_s);
  s.features.bitrate_kbps = log_uniform(rng, mix.min_bitrate_kbps, mix.max_bitrate_kbps);
  s.features.framerate_fps = kFrameRates[pick_fps(rng)];
  s.features.source_pixels = s.source.pixels();
  s.features.target_pixels = s.target.pixels();
  return s;
}

ServiceLevel sample_service_level(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(1, 3);
  return *service_level_from_int(pick(rng));
}

}  // namespace vtsim
