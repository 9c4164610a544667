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

#include "vtsim/estimator.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

namespace vtsim {

FeatureVector raw_features(const MediaFeatures& f) {
  return {f.duration_s, f.bitrate_kbps, f.framerate_fps, f.source_pixels, f.target_pixels};
}

FeatureBounds FeatureBounds::fit(std::span<const MediaFeatures> samples) {
  if (samples.empty()) throw std::invalid_argument("cannot fit bounds to no samples");
  FeatureBounds b;
  b.min.fill(std::numeric_limits<double>::infinity());
  b.max.fill(-std::numeric_limits<double>::infinity());
  for (const MediaFeatures& f : samples) {
    const FeatureVector raw = raw_features(f);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      b.min[i] = std::min(b.min[i], raw[i]);
      b.max[i] = std::max(b.max[i], raw[i]);
    }
  }
  // A constant feature still needs a non-empty range.
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!(b.min[i] < b.max[i])) b.max[i] = b.min[i] + 1.0;
  }
  return b;
}

void FeatureBounds::validate() const {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!(std::isfinite(min[i]) && std::isfinite(max[i]) && min[i] < max[i])) {
      throw std::invalid_argument("feature bounds need min < max for feature " +
                                  std::to_string(i));
    }
  }
}

FeatureVector featurize(const MediaFeatures& features, const FeatureBounds& bounds) {
  const FeatureVector raw = raw_features(features);
  FeatureVector x{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    x[i] = std::clamp((raw[i] - bounds.min[i]) / (bounds.max[i] - bounds.min[i]), 0.0, 1.0);
  }
  return x;
}

NeuralModel NeuralModel::zeros(int hidden, const FeatureBounds& bounds,
                               double log_seconds_min, double log_seconds_max) {
  if (hidden < 1) throw std::invalid_argument("hidden layer needs at least one unit");
  NeuralModel m;
  m.hidden = hidden;
  m.w1.assign(kFeatureCount * hidden, 0.0);
  m.b1.assign(hidden, 0.0);
  m.w2.assign(hidden, 0.0);
  m.bounds = bounds;
  m.log_seconds_min = log_seconds_min;
  m.log_seconds_max = log_seconds_max;
  return m;
}

std::vector<double> NeuralModel::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  flat.insert(flat.end(), w1.begin(), w1.end());
  flat.insert(flat.end(), b1.begin(), b1.end());
  flat.insert(flat.end(), w2.begin(), w2.end());
  flat.push_back(b2);
  return flat;
}

void NeuralModel::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("parameter vector has wrong length");
  }
  auto it = flat.begin();
  std::copy_n(it, w1.size(), w1.begin());
  it += static_cast<std::ptrdiff_t>(w1.size());
  std::copy_n(it, b1.size(), b1.begin());
  it += static_cast<std::ptrdiff_t>(b1.size());
  std::copy_n(it, w2.size(), w2.begin());
  it += static_cast<std::ptrdiff_t>(w2.size());
  b2 = *it;
}

double NeuralModel::forward(const FeatureVector& x) const {
  double y = b2;
  for (int j = 0; j < hidden; ++j) {
    double z = b1[j];
    for (std::size_t i = 0; i < kFeatureCount; ++i) z += x[i] * w1[i * hidden + j];
    y += w2[j] * std::tanh(z);
  }
  return y;
}

double NeuralModel::normalize_target(double seconds) const {
  return (std::log(seconds) - log_seconds_min) / (log_seconds_max - log_seconds_min);
}

double NeuralModel::denormalize(double y) const {
  return std::exp(log_seconds_min + y * (log_seconds_max - log_seconds_min));
}

double predict(const NeuralModel& model, const FeatureVector& x) {
  return std::max(kMinPredictionSeconds, model.denormalize(model.forward(x)));
}

double predict(const NeuralModel& model, const MediaFeatures& features) {
  return predict(model, featurize(features, model.bounds));
}

double training_loss(const NeuralModel& model, std::span<const FeatureVector> inputs,
                     std::span<const double> targets, std::vector<double>* gradient) {
  if (inputs.size() != targets.size() || inputs.empty()) {
    throw std::invalid_argument("inputs and targets must be non-empty and aligned");
  }
  const int h = model.hidden;
  const std::size_t w1_off = 0;
  const std::size_t b1_off = model.w1.size();
  const std::size_t w2_off = b1_off + model.b1.size();
  const std::size_t b2_off = w2_off + model.w2.size();
  if (gradient) gradient->assign(model.parameter_count(), 0.0);

  std::vector<double> act(h);
  const double inv_n = 1.0 / static_cast<double>(inputs.size());
  double loss = 0.0;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const FeatureVector& x = inputs[s];
    double y = model.b2;
    for (int j = 0; j < h; ++j) {
      double z = model.b1[j];
      for (std::size_t i = 0; i < kFeatureCount; ++i) z += x[i] * model.w1[i * h + j];
      act[j] = std::tanh(z);
      y += model.w2[j] * act[j];
    }
    const double r = y - targets[s];
    loss += r * r * inv_n;
    if (!gradient) continue;

    const double dy = 2.0 * r * inv_n;
    std::vector<double>& g = *gradient;
    g[b2_off] += dy;
    for (int j = 0; j < h; ++j) {
      g[w2_off + j] += dy * act[j];
      const double dz = dy * model.w2[j] * (1.0 - act[j] * act[j]);
      g[b1_off + j] += dz;
      for (std::size_t i = 0; i < kFeatureCount; ++i) g[w1_off + i * h + j] += dz * x[i];
    }
  }
  return loss;
}

TrainResult train(std::span<const Sample> dataset, const TrainOptions& options) {
  if (dataset.size() < kMinTrainingSamples) {
    throw std::invalid_argument("training needs at least " +
                                std::to_string(kMinTrainingSamples) + " samples");
  }
  if (!(options.train_fraction > 0.0 && options.validation_fraction > 0.0 &&
        options.train_fraction + options.validation_fraction < 1.0)) {
    throw std::invalid_argument("split fractions must leave room for a test split");
  }
  if (options.hidden < 1) throw std::invalid_argument("hidden layer needs at least one unit");
  for (const Sample& s : dataset) {
    validate(s.features);
    if (!(s.seconds > 0.0) || !std::isfinite(s.seconds)) {
      throw std::invalid_argument("measured seconds must be positive");
    }
  }

  std::mt19937_64 rng(options.seed);
  TrainResult result;
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(dataset.size());
  const auto n_train = static_cast<std::size_t>(std::llround(n * options.train_fraction));
  const auto n_val = static_cast<std::size_t>(std::llround(n * options.validation_fraction));
  result.train_indices.assign(order.begin(), order.begin() + n_train);
  result.validation_indices.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  result.test_indices.assign(order.begin() + n_train + n_val, order.end());

  std::vector<MediaFeatures> train_features;
  double log_lo = std::numeric_limits<double>::infinity();
  double log_hi = -log_lo;
  for (std::size_t i : result.train_indices) {
    train_features.push_back(dataset[i].features);
    log_lo = std::min(log_lo, std::log(dataset[i].seconds));
    log_hi = std::max(log_hi, std::log(dataset[i].seconds));
  }
  if (!(log_lo < log_hi)) log_hi = log_lo + 1.0;

  NeuralModel model =
      NeuralModel::zeros(options.hidden, FeatureBounds::fit(train_features), log_lo, log_hi);
  const double lim1 = std::sqrt(6.0 / static_cast<double>(kFeatureCount + options.hidden));
  const double lim2 = std::sqrt(6.0 / static_cast<double>(options.hidden + 1));
  std::uniform_real_distribution<double> u1(-lim1, lim1);
  std::uniform_real_distribution<double> u2(-lim2, lim2);
  for (double& w : model.w1) w = u1(rng);
  for (double& w : model.w2) w = u2(rng);
  model.b2 = 0.5;

  auto build = [&](const std::vector<std::size_t>& idx, std::vector<FeatureVector>& xs,
                   std::vector<double>& ys) {
    for (std::size_t i : idx) {
      xs.push_back(featurize(dataset[i].features, model.bounds));
      ys.push_back(model.normalize_target(dataset[i].seconds));
    }
  };
  std::vector<FeatureVector> xt, xv;
  std::vector<double> yt, yv;
  build(result.train_indices, xt, yt);
  build(result.validation_indices, xv, yv);

  std::vector<double> params = model.parameters();
  std::vector<double> best = params;
  double best_val = training_loss(model, xv, yv, nullptr);
  std::vector<double> grad;
  // Adam moments; unused for plain gradient descent.
  std::vector<double> m1(params.size(), 0.0), m2(params.size(), 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  double beta1_t = 1.0, beta2_t = 1.0;
  int stale = 0;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    training_loss(model, xt, yt, &grad);
    if (options.optimizer == Optimizer::kAdam) {
      beta1_t *= kBeta1;
      beta2_t *= kBeta2;
      for (std::size_t p = 0; p < params.size(); ++p) {
        m1[p] = kBeta1 * m1[p] + (1.0 - kBeta1) * grad[p];
        m2[p] = kBeta2 * m2[p] + (1.0 - kBeta2) * grad[p] * grad[p];
        const double mhat = m1[p] / (1.0 - beta1_t);
        const double vhat = m2[p] / (1.0 - beta2_t);
        params[p] -= options.learning_rate * mhat / (std::sqrt(vhat) + kEps);
      }
    } else {
      for (std::size_t p = 0; p < params.size(); ++p) params[p] -= options.learning_rate * grad[p];
    }
    model.set_parameters(params);
    if ((it + 1) % options.check_every != 0) continue;
    const double val = training_loss(model, xv, yv, nullptr);
    if (!std::isfinite(val)) throw std::runtime_error("estimator training diverged");
    if (val < best_val) {
      best_val = val;
      best = params;
      stale = 0;
    } else if (++stale >= options.patience) {
      ++it;
      break;
    }
  }
  model.set_parameters(best);
  result.model = std::move(model);
  result.iterations = it;
  result.validation_loss = best_val;
  return result;
}

LinearModel fit_linear(std::span<const Sample> dataset) {
  if (dataset.size() < 2) throw DegenerateFitError("linear fit needs two samples");
  double mx = 0.0, my = 0.0;
  for (const Sample& s : dataset) {
    mx += s.features.duration_s;
    my += s.seconds;
  }
  mx /= static_cast<double>(dataset.size());
  my /= static_cast<double>(dataset.size());
  double sxx = 0.0, sxy = 0.0;
  for (const Sample& s : dataset) {
    const double dx = s.features.duration_s - mx;
    sxx += dx * dx;
    sxy += dx * (s.seconds - my);
  }
  if (!(sxx > 0.0)) throw DegenerateFitError("all durations are equal");
  LinearModel m;
  m.slope = sxy / sxx;
  m.intercept = my - m.slope * mx;
  return m;
}

double predict(const LinearModel& model, const MediaFeatures& features) {
  return model.intercept + model.slope * features.duration_s;
}

double normalized_error(double predicted, double real) {
  if (!(real > 0.0)) throw std::invalid_argument("real time must be positive");
  return (predicted - real) / real;
}

double reference_transcode_seconds(const MediaFeatures& f, const SyntheticTimeRule& rule) {
  const double scale = f.target_pixels / f.source_pixels;
  return f.duration_s * (rule.c1 + rule.c2 * std::pow(scale, 0.8)) *
         std::pow(f.bitrate_kbps / 1000.0, 0.2);
}

std::vector<Sample> generate_dataset(std::size_t count, const MediaMix& mix,
                                     const SyntheticTimeRule& rule, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, rule.noise);
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    MediaSample m = sample_media(rng, mix);
    const double factor = std::max(0.5, 1.0 + noise(rng));
    out.push_back({m.features, reference_transcode_seconds(m.features, rule) * factor,
                   m.source, m.target});
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, std::span<const Sample> dataset) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kTraceHeader << ",measured_s\n";
  out.precision(17);
  for (const Sample& s : dataset) {
    TraceRecord r;
    r.features = s.features;
    r.source = s.source;
    r.target = s.target;
    write_trace_fields(out, r);
    out << ',' << s.seconds << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<Sample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset " + path.string(), 0);
  const std::string header = std::string(kTraceHeader) + ",measured_s";
  std::string line;
  if (!std::getline(in, line)) throw ParseError("row 1: missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw ParseError("row 1: expected header '" + header + "'", 1);
  std::vector<Sample> out;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    double measured = 0.0;
    TraceRecord r = parse_trace_row(line, row, std::span<double>(&measured, 1));
    if (!(measured > 0.0)) {
      throw ParseError("row " + std::to_string(row) + ": measured_s must be positive", row);
    }
    out.push_back({r.features, measured, r.source, r.target});
  }
  return out;
}

namespace {

void write_tensor(std::ostream& out, const char* name, std::size_t rows, std::size_t cols,
                  std::span<const double> values) {
  out << name << ' ' << rows << ' ' << cols;
  for (double v : values) out << ' ' << v;
  out << '\n';
}

}  // namespace

void save_model(const NeuralModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  const auto h = static_cast<std::size_t>(model.hidden);
  write_tensor(out, "w1", kFeatureCount, h, model.w1);
  write_tensor(out, "b1", 1, h, model.b1);
  write_tensor(out, "w2", h, 1, model.w2);
  write_tensor(out, "b2", 1, 1, std::span<const double>(&model.b2, 1));
  write_tensor(out, "feature_min", 1, kFeatureCount, model.bounds.min);
  write_tensor(out, "feature_max", 1, kFeatureCount, model.bounds.max);
  const double range[2] = {model.log_seconds_min, model.log_seconds_max};
  write_tensor(out, "log_seconds_range", 1, 2, range);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

NeuralModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model " + path.string(), 0);
  std::map<std::string, std::pair<std::pair<std::size_t, std::size_t>, std::vector<double>>>
      tensors;
  std::string line;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(ls >> name >> rows >> cols)) {
      throw ParseError("line " + std::to_string(row) + ": bad tensor header", row);
    }
    std::vector<double> values(rows * cols);
    for (double& v : values) {
      if (!(ls >> v) || !std::isfinite(v)) {
        throw ParseError("line " + std::to_string(row) + ": bad value in " + name, row);
      }
    }
    tensors[name] = {{rows, cols}, std::move(values)};
  }
  auto take = [&](const char* name, std::size_t rows, std::size_t cols) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ParseError(std::string("missing tensor ") + name, 0);
    if (it->second.first != std::make_pair(rows, cols)) {
      throw ParseError(std::string("tensor ") + name + " has wrong shape", 0);
    }
    return it->second.second;
  };
  auto b1 = tensors.find("b1");
  if (b1 == tensors.end()) throw ParseError("missing tensor b1", 0);
  const std::size_t h = b1->second.first.second;
  if (h < 1) throw ParseError("hidden layer is empty", 0);

  NeuralModel m;
  m.hidden = static_cast<int>(h);
  m.w1 = take("w1", kFeatureCount, h);
  m.b1 = take("b1", 1, h);
  m.w2 = take("w2", h, 1);
  m.b2 = take("b2", 1, 1)[0];
  auto lo = take("feature_min", 1, kFeatureCount);
  auto hi = take("feature_max", 1, kFeatureCount);
  std::copy(lo.begin(), lo.end(), m.bounds.min.begin());
  std::copy(hi.begin(), hi.end(), m.bounds.max.begin());
  m.bounds.validate();
  auto range = take("log_seconds_range", 1, 2);
  m.log_seconds_min = range[0];
  m.log_seconds_max = range[1];
  return m;
}

}  // namespace vtsim
