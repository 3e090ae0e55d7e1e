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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <doctest.h>

#include "adaquant/errors.hpp"
#include "adaquant/objectives.hpp"

using namespace adaquant;

namespace {

// Central finite difference of the full-data loss along coordinate j.
double fd_partial(const ModelSpec& spec, std::vector<double> w, const Dataset& data, std::size_t j,
                  double h) {
  const double x0 = w[j];
  w[j] = x0 + h;
  const double up = loss(spec, w, data);
  w[j] = x0 - h;
  const double down = loss(spec, w, data);
  return (up - down) / (2 * h);
}

std::vector<double> random_point(std::size_t d, Rng& rng, double scale = 0.5) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> w(d);
  for (auto& x : w) x = normal(rng);
  return w;
}

// Least-squares solution of X w = y through the normal equations
// (Gaussian elimination with partial pivoting).
std::vector<double> least_squares(const Dataset& data) {
  const std::size_t p = data.feature_dim();
  std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.features(i);
    for (std::size_t r = 0; r < p; ++r) {
      for (std::size_t c = 0; c < p; ++c) a[r][c] += x[r] * x[c];
      a[r][p] += x[r] * data.label(i);
    }
  }
  for (std::size_t col = 0; col < p; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < p; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= p; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> w(p);
  for (std::size_t r = 0; r < p; ++r) w[r] = a[r][p] / a[r][r];
  return w;
}

std::vector<ModelSpec> all_specs() {
  return {ModelSpec::quadratic(4), ModelSpec::logistic(4), ModelSpec::mlp(4, 5, 3)};
}

Dataset dataset_for(const ModelSpec& spec, std::size_t m, std::uint64_t seed) {
  SyntheticParams params;
  params.samples = m;
  params.feature_dim = spec.input_dim;
  params.noise = 0.1;
  if (spec.kind == ModelKind::kQuadratic) {
    params.kind = SyntheticKind::kRegression;
  } else {
    params.kind = SyntheticKind::kClassification;
    params.classes = spec.kind == ModelKind::kMlp ? spec.classes : 2;
  }
  return generate_synthetic(params, seed).data;
}

}  // namespace

TEST_SUITE("objectives") {
  TEST_CASE("model dimensions") {
    CHECK(ModelSpec::quadratic(7).dimension() == 7);
    CHECK(ModelSpec::logistic(19).dimension() == 20);
    CHECK(ModelSpec::mlp(4, 5, 3).dimension() == 5 * 4 + 5 + 3 * 5 + 3);
  }

  TEST_CASE("quadratic loss vanishes at the interpolating least-squares solution") {
    SyntheticParams params{SyntheticKind::kRegression, 50, 3, 0, 0.0};
    const auto data = generate_synthetic(params, 4).data;
    const auto spec = ModelSpec::quadratic(3);
    const auto w = least_squares(data);
    CHECK(loss(spec, w, data) < 1e-20);
    for (double g : full_gradient(spec, w, data)) CHECK(std::abs(g) < 1e-10);
  }

  TEST_CASE("noiseless regression is fit exactly by the planted weights") {
    SyntheticParams params{SyntheticKind::kRegression, 200, 6, 0, 0.0};
    const auto gen = generate_synthetic(params, 8);
    CHECK(loss(ModelSpec::quadratic(6), gen.planted, gen.data) == 0.0);
  }

  TEST_CASE("logistic loss at zero is ln 2") {
    const auto spec = ModelSpec::logistic(3);
    // Balanced binary labels.
    Dataset data(3, {1, 2, 3, -1, 0, 2, 4, 4, 4, 0, 0, 1}, {0, 1, 0, 1}, 2);
    const std::vector<double> w(4, 0.0);
    CHECK(loss(spec, w, data) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }

  TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(101);
    for (const auto& spec : all_specs()) {
      CAPTURE(to_string(spec.kind));
      const auto data = dataset_for(spec, 40, 6);
      for (int point = 0; point < 10; ++point) {
        const auto w = random_point(spec.dimension(), rng);
        const auto g = full_gradient(spec, w, data);
        for (std::size_t j = 0; j < w.size(); ++j) {
          const double fd = fd_partial(spec, w, data, j, 1e-5);
          CHECK(std::abs(g[j] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
        }
      }
    }
  }

  TEST_CASE("singleton minibatches average to the full-batch gradient") {
    Rng rng(5);
    for (const auto& spec : all_specs()) {
      const auto data = dataset_for(spec, 23, 9);
      const auto w = random_point(spec.dimension(), rng);
      std::vector<double> mean(spec.dimension(), 0.0);
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t idx[] = {i};
        const auto g = gradient(spec, w, data, idx);
        for (std::size_t j = 0; j < g.size(); ++j) mean[j] += g[j] / data.size();
      }
      const auto full = full_gradient(spec, w, data);
      for (std::size_t j = 0; j < full.size(); ++j) CHECK(mean[j] == doctest::Approx(full[j]).epsilon(1e-10));
    }
  }

  TEST_CASE("minibatch sampling draws distinct indices and covers the range uniformly") {
    Rng rng(17);
    std::vector<int> hits(10, 0);
    for (int k = 0; k < 20000; ++k) {
      auto batch = sample_minibatch(10, 3, rng);
      REQUIRE(batch.size() == 3);
      std::sort(batch.begin(), batch.end());
      CHECK(std::adjacent_find(batch.begin(), batch.end()) == batch.end());
      for (auto i : batch) ++hits[i];
    }
    // Each index appears with probability 3/10 per draw.
    const double se = std::sqrt(20000 * 0.3 * 0.7);
    for (int h : hits) CHECK(std::abs(h - 6000) < 5 * se);
    CHECK(sample_minibatch(4, 10, rng) == std::vector<std::size_t>{0, 1, 2, 3});
  }

  TEST_CASE("full-batch stochastic gradient at the optimum is zero") {
    SyntheticParams params{SyntheticKind::kRegression, 30, 3, 0, 0.0};
    const auto gen = generate_synthetic(params, 2);
    Rng rng(0);
    for (double g : stochastic_gradient(ModelSpec::quadratic(3), gen.planted, gen.data, 30, rng)) {
      CHECK(std::abs(g) < 1e-14);
    }
  }

  TEST_CASE("dimension mismatch is rejected") {
    const auto data = dataset_for(ModelSpec::logistic(4), 10, 1);
    const std::vector<double> w(3, 0.0);
    CHECK_THROWS_AS(loss(ModelSpec::logistic(4), w, data), InvalidInput);
    CHECK_THROWS_AS(full_gradient(ModelSpec::logistic(4), w, data), InvalidInput);
  }

  TEST_CASE("synthetic generation is reproducible") {
    SyntheticParams params{SyntheticKind::kClassification, 100, 5, 2, 0.1};
    CHECK(generate_synthetic(params, 42).data == generate_synthetic(params, 42).data);
    CHECK_FALSE(generate_synthetic(params, 42).data == generate_synthetic(params, 43).data);
  }

  TEST_CASE("two-class synthetic labels are roughly balanced") {
    SyntheticParams params{SyntheticKind::kClassification, 100, 5, 2, 0.0};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto data = generate_synthetic(params, seed).data;
      const auto ones = std::count(data.labels().begin(), data.labels().end(), 1.0);
      CHECK(ones >= 30);
      CHECK(ones <= 70);
    }
  }

  TEST_CASE("partition with one client returns the input") {
    const auto data = dataset_for(ModelSpec::logistic(3), 17, 3);
    const auto shards = partition(data, 1, PartitionMode::kSortedLabel, 0);
    REQUIRE(shards.size() == 1);
    CHECK(shards[0].weight == 1.0);
    CHECK(shards[0].data.size() == 17);
  }

  TEST_CASE("sorted-label partition gives single-label shards") {
    // 3 classes with 4 samples each, interleaved.
    std::vector<double> features;
    std::vector<double> labels;
    for (int i = 0; i < 12; ++i) {
      features.push_back(i);
      labels.push_back(i % 3);
    }
    const Dataset data(1, features, labels, 3);
    const auto shards = partition(data, 3, PartitionMode::kSortedLabel, 0);
    for (std::size_t k = 0; k < 3; ++k) {
      for (double y : shards[k].data.labels()) CHECK(y == static_cast<double>(k));
    }
  }

  TEST_CASE("partitions preserve the multiset of samples") {
    const auto data = dataset_for(ModelSpec::mlp(3, 2, 4), 103, 12);
    for (auto mode : {PartitionMode::kIid, PartitionMode::kSortedLabel}) {
      for (std::size_t n : {1, 2, 7, 103}) {
        const auto shards = partition(data, n, mode, 5);
        REQUIRE(shards.size() == n);
        std::multiset<std::vector<double>> in;
        std::multiset<std::vector<double>> out;
        for (std::size_t i = 0; i < data.size(); ++i) {
          auto row = std::vector<double>(data.features(i).begin(), data.features(i).end());
          row.push_back(data.label(i));
          in.insert(row);
        }
        double weight_sum = 0.0;
        for (const auto& shard : shards) {
          CHECK(std::abs(double(shard.data.size()) - double(data.size()) / n) <= 1.0);
          CHECK(shard.weight == doctest::Approx(double(shard.data.size()) / data.size()));
          weight_sum += shard.weight;
          for (std::size_t i = 0; i < shard.data.size(); ++i) {
            auto row = std::vector<double>(shard.data.features(i).begin(), shard.data.features(i).end());
            row.push_back(shard.data.label(i));
            out.insert(row);
          }
        }
        CHECK(in == out);
        CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("partition rejects more clients than samples") {
    const auto data = dataset_for(ModelSpec::logistic(2), 5, 0);
    CHECK_THROWS_AS(partition(data, 6, PartitionMode::kIid, 0), InvalidParameter);
    CHECK_THROWS_AS(partition(data, 0, PartitionMode::kIid, 0), InvalidParameter);
  }

  TEST_CASE("weighted shard losses reconstruct the union loss") {
    Rng rng(8);
    for (const auto& spec : all_specs()) {
      const auto data = dataset_for(spec, 120, 4);
      const auto w = random_point(spec.dimension(), rng);
      for (auto mode : {PartitionMode::kIid, PartitionMode::kSortedLabel}) {
        const auto shards = partition(data, 8, mode, 2);
        double weighted = 0.0;
        for (const auto& s : shards) weighted += s.weight * loss(spec, w, s.data);
        CHECK(weighted == doctest::Approx(loss(spec, w, data)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("delimited file loading") {
    const auto path = std::filesystem::temp_directory_path() / "adaquant_load_test.csv";
    {
      std::ofstream out(path);
      out << "# x1, x2, label\n1.5, 2, 0\n\n-1 3.25 1\n0,0,2\n";
    }
    const auto data = load_delimited(path, true);
    CHECK(data.size() == 3);
    CHECK(data.feature_dim() == 2);
    CHECK(data.num_classes() == 3);
    CHECK(data.features(1)[1] == 3.25);
    CHECK(data.label(2) == 2.0);
    {
      std::ofstream out(path);
      out << "1,2,0\n1,0\n";
    }
    CHECK_THROWS_AS(load_delimited(path, true), InvalidInput);
    {
      std::ofstream out(path);
      out << "1,2,0.5\n";
    }
    CHECK_THROWS_AS(load_delimited(path, true), InvalidInput);
    CHECK(load_delimited(path, false).label(0) == 0.5);
    std::filesystem::remove(path);
  }
}
