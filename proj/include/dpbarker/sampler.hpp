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

// The private Barker chain. A proposal is accepted when
//
//   Delta + N(0, C) + V_cor > 0                   (full data)
//   Delta* + N(0, C - s^2) + V_cor > 0             (minibatch of size b)
//
// where V_cor is drawn from a fitted CorrectionModel. Per-example log-ratios
// are clipped to +-sqrt(b) / N0 before aggregation, which is what makes each
// decision a bounded-sensitivity Gaussian release.

#ifndef DPBARKER_SAMPLER_HPP_
#define DPBARKER_SAMPLER_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dpbarker/accountant.hpp"
#include "dpbarker/correction.hpp"
#include "dpbarker/random.hpp"

namespace dpbarker {

// One datum per row.
using Dataset =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using DatumRef = Eigen::Ref<const Eigen::RowVectorXd>;
using ParamRef = Eigen::Ref<const Eigen::VectorXd>;

// Exchangeable-data model: log p(D | theta) = sum_i log p(x_i | theta).
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual int dimension() const = 0;
  virtual double log_likelihood(const DatumRef& x,
                                const ParamRef& theta) const = 0;
  virtual double log_prior(const ParamRef& theta) const = 0;
  virtual Eigen::VectorXd sample_prior(Rng& rng) const = 0;

  // Lipschitz constant of log p(x | .) in theta, when the model knows one.
  virtual std::optional<double> lipschitz_constant() const {
    return std::nullopt;
  }
};

enum class ChainMode { kFullData, kSubsampled };

// N0 = N beta / (beta + N); an infinite beta leaves N0 = N.
double tempered_size_from_beta(std::int64_t dataset_size, double beta);

struct ChainConfig {
  ChainMode mode = ChainMode::kSubsampled;
  double noise_variance = 2.0;    // C
  std::int64_t batch_size = 0;    // b; must equal N in full-data mode
  std::int64_t dataset_size = 0;  // N
  double tempered_size = 0.0;     // N0; 0 means untempered (N0 = N)
  std::int64_t iterations = 0;    // T
  Eigen::VectorXd proposal_sd;    // one entry, or one per dimension
  std::optional<double> clip;     // defaults to sqrt(b) / N0
  // Optional bounded proposal: each increment coordinate is truncated to
  // [-radius, radius]. Off by default.
  std::optional<double> proposal_radius;
  std::uint64_t seed = 0;

  // Accounting of the run.
  double delta = 1e-6;
  int alpha_max = 64;

  double effective_size() const;  // N0
  double clip_bound() const;      // clip or sqrt(b) / N0
  double max_clip_bound() const;  // sqrt(b) / N0

  // Throws kInvalidConfig or kConfigModeMismatch.
  void validate(int dimension) const;
};

struct ChainState {
  Eigen::VectorXd theta;
  std::int64_t iteration = 0;
  Rng rng;
};

struct AcceptanceRecord {
  std::int64_t iteration = 0;
  double delta_star = 0.0;       // Delta or Delta*
  double sample_var_term = 0.0;  // s^2 of Delta*
  double noise_var = 0.0;        // C - s^2
  std::int64_t clipped_count = 0;
  bool accepted = false;

  bool operator==(const AcceptanceRecord&) const = default;
};

struct ClippedRatio {
  double value = 0.0;  // log p(x|theta_new) - log p(x|theta_old), clipped
  bool clipped = false;
};

struct BatchStatistic {
  double delta = 0.0;       // (N0 / b) * sum r_i + log-prior difference
  double sample_var = 0.0;  // (N0^2 / b) * population variance of r_i
  std::int64_t clipped_count = 0;
};

// theta + N(0, diag(proposal_sd^2)), truncated per coordinate when a radius
// is configured. Symmetric, so the proposal ratio never enters Delta.
Eigen::VectorXd propose(const ParamRef& theta, const ChainConfig& config,
                        Rng& rng);

// Clipped per-example log-likelihood ratio. Tempering by N0 / N is applied
// when ratios are aggregated, so the returned value is in raw log-ratio units
// and bounded by config.clip_bound().
ClippedRatio tempered_clipped_ratio(const TargetModel& model,
                                    const DatumRef& x,
                                    const ParamRef& theta_new,
                                    const ParamRef& theta_old,
                                    const ChainConfig& config);

// Aggregates ratios over `batch` with scale N0 / |batch|. A clip of +inf
// disables clipping (non-private baselines).
BatchStatistic batch_statistic(const TargetModel& model, const Dataset& data,
                               std::span<const std::int64_t> batch,
                               const ParamRef& theta_new,
                               const ParamRef& theta_old,
                               double tempered_size, double clip);

// Delta* and s^2 over a batch of exactly b indices. Throws
// kBatchSizeMismatch and kNonFiniteLikelihood.
BatchStatistic delta_star(const TargetModel& model, const Dataset& data,
                          std::span<const std::int64_t> batch,
                          const ParamRef& theta_new, const ParamRef& theta_old,
                          const ChainConfig& config);

// b distinct indices from [0, N), uniformly without replacement. With b == N
// returns 0..N-1 in order without touching the stream.
std::vector<std::int64_t> draw_batch(std::int64_t dataset_size,
                                     std::int64_t batch_size, Rng& rng);

// Delta + N(0, C) + V_cor > 0. One normal and one correction draw per call.
bool barker_accept_full(double delta, double noise_variance,
                        const CorrectionModel& correction, Rng& rng);

// Delta* + N(0, C - s^2) + V_cor > 0 with C taken from the correction.
// Throws kVarianceGuardViolated when s^2 >= C.
bool barker_accept_subsampled(double delta_star, double sample_var,
                              const CorrectionModel& correction, Rng& rng);

// Advances the chain by one iteration and returns its audit record.
AcceptanceRecord step(ChainState& state, const ChainConfig& config,
                      const TargetModel& model, const Dataset& data,
                      const CorrectionModel& correction);

struct ChainResult {
  Eigen::MatrixXd samples;  // T x dim, post-decision theta per iteration
  std::vector<AcceptanceRecord> records;
  std::optional<BudgetReport> privacy;  // empty when nothing was released

  double acceptance_rate() const;
};

// The accounting scenario matching a chain configuration.
AccountingScenario accounting_scenario(const ChainConfig& config);

// Called with the number of completed iterations every kProgressInterval
// iterations.
using ProgressFn = std::function<void(std::int64_t done)>;
inline constexpr std::int64_t kProgressInterval = 1000;

ChainResult run_chain(const ChainConfig& config, const TargetModel& model,
                      const Dataset& data, const CorrectionModel& correction,
                      const Eigen::VectorXd& init,
                      const ProgressFn& progress = {});

}  // namespace dpbarker

#endif  // DPBARKER_SAMPLER_HPP_
