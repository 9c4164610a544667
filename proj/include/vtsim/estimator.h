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

#ifndef VTSIM_ESTIMATOR_H_
#define VTSIM_ESTIMATOR_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "vtsim/workload.h"

namespace vtsim {

// duration, bitrate, framerate, source pixels, target pixels.
inline constexpr std::size_t kFeatureCount = 5;
using FeatureVector = std::array<double, kFeatureCount>;

FeatureVector raw_features(const MediaFeatures& features);

struct FeatureBounds {
  FeatureVector min{};
  FeatureVector max{};

  // Per-feature min/max over `samples`.
  static FeatureBounds fit(std::span<const MediaFeatures> samples);
  // Throws std::invalid_argument unless min < max for every feature.
  void validate() const;
  bool operator==(const FeatureBounds&) const = default;
};

// Min-max normalizes each raw feature and clamps it to [0, 1].
FeatureVector featurize(const MediaFeatures& features, const FeatureBounds& bounds);

// One-hidden-layer regression network:
//   y = b2 + sum_j w2[j] * tanh(b1[j] + sum_i x[i] * w1[i][j])
// The output is in normalized log-time; predict() maps it back to seconds.
struct NeuralModel {
  int hidden = 20;
  std::vector<double> w1;  // kFeatureCount x hidden, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;
  FeatureBounds bounds;
  double log_seconds_min = 0.0;
  double log_seconds_max = 1.0;

  // Zero-initialized network of the given width.
  static NeuralModel zeros(int hidden, const FeatureBounds& bounds, double log_seconds_min,
                           double log_seconds_max);

  std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);

  // Network output before de-normalization.
  double forward(const FeatureVector& x) const;
  double normalize_target(double seconds) const;
  double denormalize(double y) const;

  bool operator==(const NeuralModel&) const = default;
};

inline constexpr double kMinPredictionSeconds = 1.0;

// Predicted transcoding time in seconds, floored at kMinPredictionSeconds.
double predict(const NeuralModel& model, const FeatureVector& x);
double predict(const NeuralModel& model, const MediaFeatures& features);

struct Sample {
  MediaFeatures features;
  double seconds = 0.0;
  // Kept for CSV output; a zero resolution is written as pixels x 1.
  Resolution source;
  Resolution target;
};

// Mean squared error of the network output against normalized targets.
// When `gradient` is non-null it receives dLoss/dparameters in the order of
// NeuralModel::parameters().
double training_loss(const NeuralModel& model, std::span<const FeatureVector> inputs,
                     std::span<const double> targets, std::vector<double>* gradient);

enum class Optimizer { kGradientDescent, kAdam };

struct TrainOptions {
  int hidden = 20;
  double train_fraction = 0.75;
  double validation_fraction = 0.15;  // the rest is held out for testing
  Optimizer optimizer = Optimizer::kAdam;
  double learning_rate = 0.01;
  int max_iterations = 20000;
  int check_every = 20;  // iterations between validation checks
  int patience = 50;     // non-improving checks before stopping
  std::uint64_t seed = 1;
};

struct TrainResult {
  NeuralModel model;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
  std::vector<std::size_t> test_indices;
  int iterations = 0;
  double validation_loss = 0.0;
};

inline constexpr std::size_t kMinTrainingSamples = 20;

// Full-batch gradient descent with early stopping on the validation split.
// Returns the parameters with the best validation loss.
TrainResult train(std::span<const Sample> dataset, const TrainOptions& options);

// Transcoding time as an affine function of source duration only.
struct LinearModel {
  double slope = 0.0;      // seconds per second of source video
  double intercept = 0.0;  // seconds
};

class DegenerateFitError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Ordinary least squares of measured seconds on duration. Throws
// DegenerateFitError when every duration is equal.
LinearModel fit_linear(std::span<const Sample> dataset);
double predict(const LinearModel& model, const MediaFeatures& features);

// (predicted - real) / real. Throws std::invalid_argument for real <= 0.
double normalized_error(double predicted, double real);

// Ground-truth generator for synthetic datasets:
//   seconds = duration * (c1 + c2 * (target/source)^0.8) * (bitrate/1000)^0.2
// with multiplicative Gaussian noise of relative size `noise`.
struct SyntheticTimeRule {
  double c1 = 0.3;
  double c2 = 1.2;
  double noise = 0.05;
};

double reference_transcode_seconds(const MediaFeatures& features,
                                   const SyntheticTimeRule& rule = {});

std::vector<Sample> generate_dataset(std::size_t count, const MediaMix& mix,
                                     const SyntheticTimeRule& rule, std::uint64_t seed);

// Dataset CSV: the trace columns followed by measured_s.
void write_dataset(const std::filesystem::path& path, std::span<const Sample> dataset);
std::vector<Sample> load_dataset(const std::filesystem::path& path);

// Text format, one tensor per line: "<name> <rows> <cols> <values...>".
void save_model(const NeuralModel& model, const std::filesystem::path& path);
NeuralModel load_model(const std::filesystem::path& path);

}  // namespace vtsim

#endif  // VTSIM_ESTIMATOR_H_
