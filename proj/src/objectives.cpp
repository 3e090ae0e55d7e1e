// Copyright 2026 The AdaQuant Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "adaquant/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "adaquant/errors.hpp"

namespace adaquant {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_shapes(const ModelSpec& spec, std::span<const double> w, const Dataset& data) {
  if (w.size() != spec.dimension()) {
    throw InvalidInput("parameter dimension " + std::to_string(w.size()) + " != model dimension " +
                       std::to_string(spec.dimension()));
  }
  if (data.feature_dim() != spec.input_dim) {
    throw InvalidInput("feature dimension " + std::to_string(data.feature_dim()) +
                       " != model input dimension " + std::to_string(spec.input_dim));
  }
}

// Views into a flattened MLP parameter vector.
struct MlpView {
  std::size_t p, h, c;
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return h * p; }
  std::size_t w2() const { return h * p + h; }
  std::size_t b2() const { return h * p + h + c * h; }
};

// Per-sample loss; when grad is non-empty, accumulates scale * d(loss)/dw.
double sample_loss(const ModelSpec& spec, std::span<const double> w, std::span<const double> x,
                   double y, std::span<double> grad, double scale,
                   std::vector<double>& scratch) {
  switch (spec.kind) {
    case ModelKind::kQuadratic: {
      const double r = dot(w, x) - y;
      if (!grad.empty()) {
        for (std::size_t j = 0; j < x.size(); ++j) grad[j] += scale * r * x[j];
      }
      return 0.5 * r * r;
    }
    case ModelKind::kLogistic: {
      const std::size_t p = spec.input_dim;
      const double z = dot(w.first(p), x) + w[p];
      if (!grad.empty()) {
        const double g = scale * (sigmoid(z) - y);
        for (std::size_t j = 0; j < p; ++j) grad[j] += g * x[j];
        grad[p] += g;
      }
      return softplus(z) - y * z;
    }
    case ModelKind::kMlp: {
      const MlpView v{spec.input_dim, spec.hidden, spec.classes};
      scratch.resize(v.h + v.c);
      std::span<double> hidden(scratch.data(), v.h);
      std::span<double> logits(scratch.data() + v.h, v.c);
      for (std::size_t k = 0; k < v.h; ++k) {
        const double pre = dot(w.subspan(v.w1() + k * v.p, v.p), x) + w[v.b1() + k];
        hidden[k] = pre > 0.0 ? pre : 0.0;
      }
      double max_logit = -INFINITY;
      for (std::size_t c = 0; c < v.c; ++c) {
        logits[c] = dot(w.subspan(v.w2() + c * v.h, v.h), hidden) + w[v.b2() + c];
        max_logit = std::max(max_logit, logits[c]);
      }
      double sum_exp = 0.0;
      for (std::size_t c = 0; c < v.c; ++c) sum_exp += std::exp(logits[c] - max_logit);
      const double log_norm = max_logit + std::log(sum_exp);
      const auto label = static_cast<std::size_t>(y);
      const double value = log_norm - logits[label];
      if (!grad.empty()) {
        for (std::size_t c = 0; c < v.c; ++c) {
          const double g_out = scale * (std::exp(logits[c] - log_norm) - (c == label ? 1.0 : 0.0));
          grad[v.b2() + c] += g_out;
          for (std::size_t k = 0; k < v.h; ++k) {
            grad[v.w2() + c * v.h + k] += g_out * hidden[k];
          }
        }
        for (std::size_t k = 0; k < v.h; ++k) {
          if (hidden[k] <= 0.0) continue;
          double g_hidden = 0.0;
          for (std::size_t c = 0; c < v.c; ++c) {
            const double g_out = scale * (std::exp(logits[c] - log_norm) - (c == label ? 1.0 : 0.0));
            g_hidden += w[v.w2() + c * v.h + k] * g_out;
          }
          grad[v.b1() + k] += g_hidden;
          for (std::size_t j = 0; j < v.p; ++j) grad[v.w1() + k * v.p + j] += g_hidden * x[j];
        }
      }
      return value;
    }
  }
  return 0.0;
}

double mean_loss(const ModelSpec& spec, std::span<const double> w, const Dataset& data,
                 std::span<const std::size_t> indices, std::span<double> grad) {
  check_shapes(spec, w, data);
  if (indices.empty()) throw InvalidInput("loss over an empty sample set");
  const double scale = 1.0 / static_cast<double>(indices.size());
  std::vector<double> scratch;
  double total = 0.0;
  for (const auto i : indices) {
    total += sample_loss(spec, w, data.features(i), data.label(i), grad, scale, scratch);
  }
  return total * scale;
}

std::vector<std::size_t> all_indices(std::size_t m) {
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

Dataset::Dataset(std::size_t feature_dim, std::vector<double> features,
                 std::vector<double> labels, std::size_t num_classes)
    : feature_dim_(feature_dim),
      features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes) {
  if (labels_.empty()) throw InvalidInput("Dataset: needs at least one sample");
  if (feature_dim_ == 0) throw InvalidInput("Dataset: feature dimension must be >= 1");
  if (features_.size() != feature_dim_ * labels_.size()) {
    throw InvalidInput("Dataset: feature buffer does not match sample count");
  }
  for (const double y : labels_) {
    if (!std::isfinite(y)) throw InvalidInput("Dataset: non-finite label");
    if (num_classes_ > 0 && (y < 0.0 || y != std::floor(y) ||
                             y >= static_cast<double>(num_classes_))) {
      throw InvalidInput("Dataset: label out of class range");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> features;
  std::vector<double> labels;
  features.reserve(indices.size() * feature_dim_);
  labels.reserve(indices.size());
  for (const auto i : indices) {
    const auto row = this->features(i);
    features.insert(features.end(), row.begin(), row.end());
    labels.push_back(labels_[i]);
  }
  return Dataset(feature_dim_, std::move(features), std::move(labels), num_classes_);
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "quadratic") return ModelKind::kQuadratic;
  if (name == "logistic") return ModelKind::kLogistic;
  if (name == "mlp") return ModelKind::kMlp;
  throw InvalidParameter("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kQuadratic: return "quadratic";
    case ModelKind::kLogistic: return "logistic";
    case ModelKind::kMlp: return "mlp";
  }
  return "?";
}

ModelSpec ModelSpec::quadratic(std::size_t input_dim) {
  return {ModelKind::kQuadratic, input_dim, 0, 0};
}

ModelSpec ModelSpec::logistic(std::size_t input_dim) {
  return {ModelKind::kLogistic, input_dim, 0, 2};
}

ModelSpec ModelSpec::mlp(std::size_t input_dim, std::size_t hidden, std::size_t classes) {
  if (hidden == 0 || classes < 2) throw InvalidParameter("mlp needs hidden >= 1 and classes >= 2");
  return {ModelKind::kMlp, input_dim, hidden, classes};
}

std::size_t ModelSpec::dimension() const {
  switch (kind) {
    case ModelKind::kQuadratic: return input_dim;
    case ModelKind::kLogistic: return input_dim + 1;
    case ModelKind::kMlp: return hidden * input_dim + hidden + classes * hidden + classes;
  }
  return 0;
}

double loss(const ModelSpec& spec, std::span<const double> w, const Dataset& data) {
  const auto idx = all_indices(data.size());
  return mean_loss(spec, w, data, idx, {});
}

double loss(const ModelSpec& spec, std::span<const double> w, const Dataset& data,
            std::span<const std::size_t> indices) {
  return mean_loss(spec, w, data, indices, {});
}

ParameterVector gradient(const ModelSpec& spec, std::span<const double> w, const Dataset& data,
                         std::span<const std::size_t> indices) {
  ParameterVector grad(spec.dimension(), 0.0);
  mean_loss(spec, w, data, indices, grad);
  return grad;
}

ParameterVector full_gradient(const ModelSpec& spec, std::span<const double> w,
                              const Dataset& data) {
  const auto idx = all_indices(data.size());
  return gradient(spec, w, data, idx);
}

std::vector<std::size_t> sample_minibatch(std::size_t m, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw InvalidParameter("batch size must be >= 1");
  if (batch_size >= m) return all_indices(m);
  // Partial Fisher-Yates: uniform without replacement.
  std::vector<std::size_t> idx = all_indices(m);
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, m - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(batch_size);
  return idx;
}

ParameterVector stochastic_gradient(const ModelSpec& spec, std::span<const double> w,
                                    const Dataset& data, std::size_t batch_size, Rng& rng) {
  const auto batch = sample_minibatch(data.size(), batch_size, rng);
  return gradient(spec, w, data, batch);
}

double accuracy(const ModelSpec& spec, std::span<const double> w, const Dataset& data) {
  check_shapes(spec, w, data);
  if (!data.is_classification()) throw InvalidInput("accuracy needs a classification dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.features(i);
    std::size_t predicted = 0;
    if (spec.kind == ModelKind::kLogistic) {
      predicted = dot(w.first(spec.input_dim), x) + w[spec.input_dim] > 0.0 ? 1 : 0;
    } else if (spec.kind == ModelKind::kMlp) {
      const MlpView v{spec.input_dim, spec.hidden, spec.classes};
      std::vector<double> hidden(v.h);
      for (std::size_t k = 0; k < v.h; ++k) {
        hidden[k] = std::max(0.0, dot(w.subspan(v.w1() + k * v.p, v.p), x) + w[v.b1() + k]);
      }
      double best = -INFINITY;
      for (std::size_t c = 0; c < v.c; ++c) {
        const double logit = dot(w.subspan(v.w2() + c * v.h, v.h), hidden) + w[v.b2() + c];
        if (logit > best) {
          best = logit;
          predicted = c;
        }
      }
    } else {
      throw InvalidInput("accuracy is undefined for the quadratic model");
    }
    if (static_cast<double>(predicted) == data.label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

ParameterVector initial_parameters(const ModelSpec& spec, std::uint64_t seed) {
  ParameterVector w(spec.dimension(), 0.0);
  if (spec.kind != ModelKind::kMlp) return w;
  Rng rng = substream(seed, StreamTag::kInit);
  const MlpView v{spec.input_dim, spec.hidden, spec.classes};
  std::uniform_real_distribution<double> layer1(-std::sqrt(6.0 / v.p), std::sqrt(6.0 / v.p));
  std::uniform_real_distribution<double> layer2(-std::sqrt(6.0 / v.h), std::sqrt(6.0 / v.h));
  for (std::size_t i = 0; i < v.h * v.p; ++i) w[v.w1() + i] = layer1(rng);
  for (std::size_t i = 0; i < v.c * v.h; ++i) w[v.w2() + i] = layer2(rng);
  return w;
}

SyntheticData generate_synthetic(const SyntheticParams& params, std::uint64_t seed) {
  if (params.samples == 0 || params.feature_dim == 0) {
    throw InvalidParameter("synthetic data needs samples >= 1 and feature_dim >= 1");
  }
  Rng rng = substream(seed, StreamTag::kDataset);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t p = params.feature_dim;
  const std::size_t m = params.samples;
  const bool classify = params.kind == SyntheticKind::kClassification;
  if (classify && params.classes < 2) throw InvalidParameter("classification needs classes >= 2");
  if (classify && (params.noise < 0.0 || params.noise > 1.0)) {
    throw InvalidParameter("label-flip probability must lie in [0, 1]");
  }
  const std::size_t rows = classify ? params.classes : 1;

  ParameterVector planted(rows * p);
  const double weight_scale = classify ? 1.0 : 1.0 / std::sqrt(static_cast<double>(p));
  for (auto& v : planted) v = weight_scale * normal(rng);

  std::vector<double> features(m * p);
  std::vector<double> labels(m);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    std::span<double> x(features.data() + i * p, p);
    for (auto& v : x) v = normal(rng);
    if (!classify) {
      labels[i] = dot(planted, x) + params.noise * normal(rng);
      continue;
    }
    std::size_t label = 0;
    double best = -INFINITY;
    for (std::size_t c = 0; c < rows; ++c) {
      const double score = dot(std::span<const double>(planted).subspan(c * p, p), x);
      if (score > best) {
        best = score;
        label = c;
      }
    }
    // Both draws always happen so the stream shape does not depend on noise.
    const double flip = unit(rng);
    std::uniform_int_distribution<std::size_t> other(1, rows - 1);
    const std::size_t offset = other(rng);
    if (flip < params.noise) label = (label + offset) % rows;
    labels[i] = static_cast<double>(label);
  }
  return {Dataset(p, std::move(features), std::move(labels), classify ? rows : 0),
          std::move(planted)};
}

PartitionMode parse_partition_mode(std::string_view name) {
  if (name == "iid") return PartitionMode::kIid;
  if (name == "sorted_label") return PartitionMode::kSortedLabel;
  throw InvalidParameter("unknown partition mode '" + std::string(name) + "'");
}

std::string_view to_string(PartitionMode mode) {
  return mode == PartitionMode::kIid ? "iid" : "sorted_label";
}

std::vector<ClientShard> partition(const Dataset& data, std::size_t n, PartitionMode mode,
                                   std::uint64_t seed) {
  const std::size_t m = data.size();
  if (n == 0 || n > m) {
    throw InvalidParameter("partition: need 1 <= n <= m (n = " + std::to_string(n) +
                           ", m = " + std::to_string(m) + ")");
  }
  std::vector<std::size_t> order = all_indices(m);
  if (mode == PartitionMode::kIid) {
    Rng rng = substream(seed, StreamTag::kPartition);
    std::shuffle(order.begin(), order.end(), rng);
  } else {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data.label(a) < data.label(b); });
  }

  std::vector<ClientShard> shards;
  shards.reserve(n);
  std::size_t begin = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t size = m / n + (i < m % n ? 1 : 0);
    std::span<const std::size_t> slice(order.data() + begin, size);
    shards.push_back({i, data.subset(slice), static_cast<double>(size) / static_cast<double>(m)});
    begin += size;
  }
  return shards;
}

Dataset load_delimited(const std::filesystem::path& path, bool classification) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open dataset file " + path.string());
  std::vector<double> features;
  std::vector<double> labels;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::vector<double> row;
    std::string token;
    while (fields >> token) {
      if (row.empty() && token.front() == '#') break;
      try {
        std::size_t used = 0;
        row.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": bad number '" +
                           token + "'");
      }
    }
    if (row.empty()) continue;
    if (row.size() < 2) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) +
                         ": need at least one feature and a label");
    }
    if (dim == 0) dim = row.size() - 1;
    if (row.size() - 1 != dim) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) +
                         ": inconsistent feature count");
    }
    labels.push_back(row.back());
    features.insert(features.end(), row.begin(), row.end() - 1);
  }
  if (labels.empty()) throw InvalidInput(path.string() + ": no samples");
  std::size_t classes = 0;
  if (classification) {
    double max_label = 0.0;
    for (const double y : labels) {
      if (y < 0.0 || y != std::floor(y)) {
        throw InvalidInput(path.string() + ": classification labels must be nonnegative integers");
      }
      max_label = std::max(max_label, y);
    }
    classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
  }
  return Dataset(dim, std::move(features), std::move(labels), classes);
}

}  // namespace adaquant
