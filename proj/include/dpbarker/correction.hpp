// Copyright 2026 The dpbarker Authors.
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

// Symmetric Gaussian-mixture correction V_cor such that
// N(0, C) + V_cor is close to Logistic(0, 1).

#ifndef DPBARKER_CORRECTION_HPP_
#define DPBARKER_CORRECTION_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpbarker/random.hpp"

namespace dpbarker {

struct MixtureComponent {
  double weight = 0.0;
  double mean = 0.0;
  double sd = 1.0;

  bool operator==(const MixtureComponent&) const = default;
};

struct FitConfig {
  int half_components = 50;  // K, before mirroring
  int grid_n = 1000;
  double grid_halfwidth = 10.0;
  int iterations = 20000;
  double step_size = 0.01;
  std::uint64_t seed = 0;
  double loss_ceiling = 1.0;
  int max_attempts = 3;
};

struct FitMeta {
  int half_components = 0;
  int grid_n = 0;
  double grid_halfwidth = 0.0;
  int iterations = 0;
  double step_size = 0.0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const FitMeta&) const = default;
};

class CorrectionModel {
 public:
  // Throws kInvalidArgument when the invariants do not hold: C in
  // (0, pi^2/3), weights positive summing to 1, sds positive, components
  // closed under mean negation.
  CorrectionModel(double noise_variance,
                  std::vector<MixtureComponent> components, FitMeta meta = {});

  // Reason the triple would be rejected, or nullopt.
  static std::optional<std::string> check(
      double noise_variance, std::span<const MixtureComponent> components);

  double noise_variance() const { return noise_variance_; }
  std::span<const MixtureComponent> components() const { return components_; }
  const FitMeta& fit_meta() const { return meta_; }

  // Analytic mean and variance of V_cor.
  double mean() const;
  double variance() const;

  bool operator==(const CorrectionModel& other) const {
    return noise_variance_ == other.noise_variance_ &&
           components_ == other.components_ && meta_ == other.meta_;
  }

 private:
  double noise_variance_;
  std::vector<MixtureComponent> components_;
  std::vector<double> cumulative_;
  FitMeta meta_;

  friend double sample_correction(const CorrectionModel&, Rng&);
};

double logistic_cdf(double y);
double logistic_pdf(double y);

// Density and CDF of N(0, C) + V_cor, both in closed form.
double approx_logistic_pdf(const CorrectionModel& model, double y);
double approx_logistic_cdf(const CorrectionModel& model, double y);

// One draw of V_cor: a component index from a single uniform, then one
// normal variate.
double sample_correction(const CorrectionModel& model, Rng& rng);

// sup_y |S'(y) - S(y)| over `points` equispaced points on [-halfwidth,
// halfwidth] plus a tail allowance max(1 - S(a), 1 - S'(a), S(-a), S'(-a)).
double kolmogorov_distance(const CorrectionModel& model,
                           int points = 100001, double halfwidth = 12.0);

// Fits the mirrored mixture by minimizing the L2 distance between the
// logistic density and the convolved mixture density on the grid, with Adam.
// Retries with a fresh seed when the loss is non-finite or above the ceiling.
CorrectionModel fit_correction(double noise_variance, const FitConfig& config);

// L2 grid loss of the given model under the config's grid.
double correction_loss(const CorrectionModel& model, int grid_n,
                       double grid_halfwidth);

void save_model(const CorrectionModel& model,
                const std::filesystem::path& path);
CorrectionModel load_model(const std::filesystem::path& path);

// File name keyed by (C, K, grid, optimizer budget, seed) for the model cache.
std::string correction_cache_name(double noise_variance,
                                  const FitConfig& config);

}  // namespace dpbarker

#endif  // DPBARKER_CORRECTION_HPP_
