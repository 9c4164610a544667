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

#ifndef VTSIM_WORKLOAD_H_
#define VTSIM_WORKLOAD_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vtsim {

// Fast-timescale tick index. Slot t belongs to epoch floor(t / T).
using Slot = std::int64_t;

enum class ServiceLevel : int { kLevel1 = 1, kLevel2 = 2, kLevel3 = 3 };

// Parses "1", "2" or "3". Returns nullopt for anything else.
std::optional<ServiceLevel> service_level_from_int(long value);

// Raw inputs of the transcoding-time estimator. Pixel counts are
// width * height products.
struct MediaFeatures {
  double duration_s = 0.0;
  double bitrate_kbps = 0.0;
  double framerate_fps = 0.0;
  double source_pixels = 0.0;
  double target_pixels = 0.0;

  bool operator==(const MediaFeatures&) const = default;
};

// Throws std::invalid_argument if any field is non-positive or non-finite.
void validate(const MediaFeatures& features);

// One transcoding request. Durations are in slots.
struct Task {
  std::uint64_t id = 0;
  Slot arrival = 0;
  ServiceLevel level = ServiceLevel::kLevel1;
  MediaFeatures features;
  double estimated_slots = 0.0;  // D_i
  int block_count = 0;           // b_i
  int blocks_dispatched = 0;
  int blocks_completed = 0;

  int blocks_remaining() const { return block_count - blocks_dispatched; }
  bool started() const { return blocks_dispatched > 0; }
};

// Splits a task of `estimated_slots` compute into ceil(D / F) blocks of F
// slots each; the last block is padded to a full F.
Task make_task(std::uint64_t id, Slot arrival, ServiceLevel level,
               const MediaFeatures& features, double estimated_slots,
               Slot block_slots);

// Non-stationary Poisson arrivals: one constant rate per epoch.
struct ArrivalProfile {
  std::vector<double> rates_per_slot;  // lambda_k, one per epoch
  Slot epoch_slots = 1;                // T

  std::size_t epochs() const { return rates_per_slot.size(); }
  void validate() const;
};

// Builds a profile from per-minute rates.
ArrivalProfile profile_from_per_minute(std::span<const double> rates_per_min,
                                       Slot epoch_slots, double slot_seconds);

// 24 hourly rates following a cosine day curve between `low` and `high`
// tasks per minute, trough at 04:00 and peak at 16:00.
std::vector<double> diurnal_rates_per_min(double low = 0.1, double high = 0.7);

// Arrival slots (absolute, sorted, repeated for multiple arrivals in one
// slot) for epoch `epoch_index`. Each slot receives a Poisson(lambda_k)
// count. Deterministic in (seed, epoch_index).
std::vector<Slot> sample_arrivals(const ArrivalProfile& profile,
                                  std::size_t epoch_index, std::uint64_t seed);

struct Resolution {
  long width = 0;
  long height = 0;
  double pixels() const { return static_cast<double>(width) * height; }
  bool operator==(const Resolution&) const = default;
};

struct TraceRecord {
  double arrival_s = 0.0;
  ServiceLevel level = ServiceLevel::kLevel1;
  MediaFeatures features;
  Resolution source;
  Resolution target;

  bool operator==(const TraceRecord&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long row)
      : std::runtime_error(what), row_(row) {}
  // 1-based file line; the header is row 1. 0 when not row-specific.
  long row() const { return row_; }

 private:
  long row_;
};

inline constexpr const char* kTraceHeader =
    "arrival_time_s,service_level,duration_s,bitrate_kbps,framerate_fps,"
    "src_width,src_height,dst_width,dst_height";

std::vector<TraceRecord> load_trace(const std::filesystem::path& path);

// Parses one trace CSV line (without header). `extra` receives any numeric
// columns after the nine trace columns; the line must have exactly
// 9 + extra.size() fields.
TraceRecord parse_trace_row(std::string_view line, long row, std::span<double> extra = {});

void write_trace(const std::filesystem::path& path, std::span<const TraceRecord> records);
// Writes the nine trace columns of `record` without a line ending.
void write_trace_fields(std::ostream& out, const TraceRecord& record);

struct TraceScaling {
  double min_per_min = 0.1;
  double max_per_min = 0.7;
  double bucket_s = 3600.0;
  // When set, buckets are folded modulo this period and averaged over the
  // periods the trace covers (hour-of-day averaging for 86400).
  std::optional<double> fold_period_s;
  double slot_seconds = 1.0;
};

// Affinely maps per-bucket empirical rates onto [min, max] per minute. A
// trace whose buckets all have the same rate yields a constant profile at
// the midpoint and a warning on std::clog.
ArrivalProfile scale_trace_to_rates(std::span<const TraceRecord> records,
                                    const TraceScaling& scaling);

// Synthetic media mix used for both estimator datasets and simulated
// arrivals.
struct MediaMix {
  double min_duration_s = 120.0;
  double max_duration_s = 2400.0;
  double min_bitrate_kbps = 500.0;
  double max_bitrate_kbps = 8000.0;
};

struct MediaSample {
  MediaFeatures features;
  Resolution source;
  Resolution target;
};

MediaSample sample_media(std::mt19937_64& rng, const MediaMix& mix);
ServiceLevel sample_service_level(std::mt19937_64& rng);

}  // namespace vtsim

#endif  // VTSIM_WORKLOAD_H_
