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

#ifndef ADAQUANT_OBJECTIVES_HPP_
#define ADAQUANT_OBJECTIVES_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "adaquant/rng.hpp"

namespace adaquant {

using ParameterVector = std::vector<double>;

// Row-major samples with one label each. For classification, labels hold
// class indices 0..num_classes-1; num_classes == 0 marks a regression set.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t feature_dim, std::vector<double> features,
          std::vector<double> labels, std::size_t num_classes = 0);

  std::size_t size() const { return labels_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t num_classes() const { return num_classes_; }
  bool is_classification() const { return num_classes_ > 0; }

  std::span<const double> features(std::size_t i) const {
    return {features_.data() + i * feature_dim_, feature_dim_};
  }
  double label(std::size_t i) const { return labels_[i]; }
  const std::vector<double>& labels() const { return labels_; }

  Dataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t feature_dim_ = 0;
  std::vector<double> features_;
  std::vector<double> labels_;
  std::size_t num_classes_ = 0;
};

enum class ModelKind { kQuadratic, kLogistic, kMlp };

ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind kind);

// Parameter layouts, flattened in this order:
//   quadratic: w[0..p)                      loss 1/2 (x.w - y)^2
//   logistic:  w[0..p), bias                binary cross-entropy, labels {0,1}
//   mlp:       W1 (hidden x p, row-major), b1 (hidden),
//              W2 (classes x hidden, row-major), b2 (classes)
//              ReLU hidden layer, softmax cross-entropy output
struct ModelSpec {
  ModelKind kind = ModelKind::kLogistic;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;   // mlp only
  std::size_t classes = 2;  // mlp only; logistic is always binary

  static ModelSpec quadratic(std::size_t input_dim);
  static ModelSpec logistic(std::size_t input_dim);
  static ModelSpec mlp(std::size_t input_dim, std::size_t hidden, std::size_t classes);

  std::size_t dimension() const;
};

struct ClientShard {
  std::size_t id = 0;
  Dataset data;
  double weight = 0.0;  // p_i = m_i / sum_j m_j
};

/// Mean loss over the whole dataset.
double loss(const ModelSpec& spec, std::span<const double> w, const Dataset& data);

/// Mean loss over the listed samples.
double loss(const ModelSpec& spec, std::span<const double> w, const Dataset& data,
            std::span<const std::size_t> indices);

/// Mean gradient over the listed samples.
ParameterVector gradient(const ModelSpec& spec, std::span<const double> w,
                         const Dataset& data, std::span<const std::size_t> indices);

ParameterVector full_gradient(const ModelSpec& spec, std::span<const double> w,
                              const Dataset& data);

/// batch_size distinct indices drawn uniformly from [0, m); the whole range
/// when batch_size >= m.
std::vector<std::size_t> sample_minibatch(std::size_t m, std::size_t batch_size, Rng& rng);

/// Gradient on a uniformly sampled minibatch: an unbiased estimate of the
/// full-batch gradient.
ParameterVector stochastic_gradient(const ModelSpec& spec, std::span<const double> w,
                                    const Dataset& data, std::size_t batch_size, Rng& rng);

/// Fraction of correctly classified samples. Classification sets only.
double accuracy(const ModelSpec& spec, std::span<const double> w, const Dataset& data);

/// Zeros for the convex models; scaled uniform weights for the MLP, whose
/// zero point is a saddle.
ParameterVector initial_parameters(const ModelSpec& spec, std::uint64_t seed);

enum class SyntheticKind { kRegression, kClassification };

struct SyntheticParams {
  SyntheticKind kind = SyntheticKind::kClassification;
  std::size_t samples = 1;
  std::size_t feature_dim = 1;
  std::size_t classes = 2;  // classification only
  double noise = 0.0;       // label-flip probability, or additive noise stddev
};

struct SyntheticData {
  Dataset data;
  // Regression: the generating weights (quadratic layout).
  // Classification: one row of weights per class, row-major.
  ParameterVector planted;
};

/// Standard-normal features. Regression: y = x.w* + noise * N(0,1).
/// Classification: label = argmax_c (W* x)_c, flipped to a uniformly chosen
/// other class with probability noise.
SyntheticData generate_synthetic(const SyntheticParams& params, std::uint64_t seed);

enum class PartitionMode { kIid, kSortedLabel };

PartitionMode parse_partition_mode(std::string_view name);
std::string_view to_string(PartitionMode mode);

/// Splits data into n disjoint shards of sizes differing by at most one.
/// kIid shuffles first; kSortedLabel stable-sorts by label and splits
/// contiguously. Throws InvalidParameter when n is 0 or exceeds m.
std::vector<ClientShard> partition(const Dataset& data, std::size_t n, PartitionMode mode,
                                   std::uint64_t seed);

/// Loads a delimited text file: one sample per line, features then label,
/// separated by commas and/or whitespace. Blank lines and lines starting
/// with '#' are skipped. With classification = true, labels must be
/// nonnegative integers and num_classes is max label + 1 (at least 2).
Dataset load_delimited(const std::filesystem::path& path, bool classification);

}  // namespace adaquant

#endif  // ADAQUANT_OBJECTIVES_HPP_
