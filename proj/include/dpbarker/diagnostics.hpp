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

// Approximation-error bounds for the minibatch test, correction quality,
// clip-fraction scans and posterior-accuracy comparisons.

#ifndef DPBARKER_DIAGNOSTICS_HPP_
#define DPBARKER_DIAGNOSTICS_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "dpbarker/correction.hpp"
#include "dpbarker/sampler.hpp"

namespace dpbarker {

struct ErrorBoundReport {
  double clt_bound = 0.0;            // sup-CDF error of the normal approx.
  double correction_distance = 0.0;  // Kolmogorov distance of the correction
  double total_test_error = 0.0;     // sum of the two
  double eta = 0.0;                  // user-supplied contraction constant
  double tv_bound = 0.0;             // total_test_error / (1 - eta)
};

// (6.4 E|Z|^3 + 2 E|Z|) / sqrt(b) with Z = N0 (r - E r), expectations taken
// as plug-in means over the whole dataset. r is the unclipped log-ratio.
double clt_error_bound(const TargetModel& model, const Dataset& data,
                       const ParamRef& theta_new, const ParamRef& theta_old,
                       std::int64_t batch_size, double tempered_size = 0.0);

double correction_distance(const CorrectionModel& correction);

double total_test_error(double clt_bound, double correction_distance);

// test_error / (1 - eta). Throws kInvalidEta unless 0 <= eta < 1.
double stationary_tv_bound(double test_error, double eta);

ErrorBoundReport error_bound_report(double clt_bound,
                                    double correction_distance, double eta);

struct ClipScanConfig {
  std::int64_t batch_size = 1000;
  double tempered_size = 100.0;
  std::vector<double> proposal_sds;
  int trials = 200;
  std::int64_t warmup = 500;
  double warmup_proposal_sd = 0.05;
  // Overrides sqrt(b) / N0; +inf counts nothing as clipped.
  std::optional<double> clip;
  std::uint64_t seed = 0;
};

struct ClipFractionRow {
  double proposal_sd = 0.0;
  double clip_fraction = 0.0;   // mean over trials
  double standard_error = 0.0;  // over trials
};

// Warms up a non-private full-data Barker chain, then for each proposal sd
// draws `trials` (theta, theta', batch) triples with theta taken from the
// second half of the warm-up trajectory, and reports the fraction of batch
// log-ratios that exceed the clip bound.
std::vector<ClipFractionRow> clip_fraction_scan(const TargetModel& model,
                                                const Dataset& data,
                                                const ClipScanConfig& config,
                                                const Eigen::VectorXd& init);

struct AccuracyErrors {
  Eigen::VectorXd mean_error;  // |mean_private - mean_baseline| per dim
  Eigen::VectorXd var_error;   // |var_private - var_baseline| per dim
};

// Means and (population) variances over rows [burn_in, end) of each set.
// Throws kEmptyAfterBurnIn.
AccuracyErrors posterior_accuracy(const Eigen::MatrixXd& private_samples,
                                  const Eigen::MatrixXd& baseline_samples,
                                  std::int64_t burn_in);

// Errors of the private rows [burn_in, t) against the baseline after
// burn-in, for each checkpoint t > burn_in.
std::vector<AccuracyErrors> accuracy_trajectory(
    const Eigen::MatrixXd& private_samples,
    const Eigen::MatrixXd& baseline_samples,
    const std::vector<std::int64_t>& checkpoints, std::int64_t burn_in);

struct Fig4Config {
  int seeds = 20;
  std::uint64_t base_seed = 0;
  std::int64_t burn_in = 1000;
  std::int64_t baseline_iterations = 5000;
  std::vector<std::int64_t> checkpoints;  // empty: every 500 after burn-in
  ChainConfig chain;  // private chain; seed is replaced per run
  Eigen::VectorXd init;
  // Non-private tempered Barker reference. An empty proposal reuses the
  // private chain's; batch size 0 runs the exact full-data test.
  Eigen::VectorXd baseline_proposal_sd;
  std::int64_t baseline_batch_size = 0;
  // One long baseline shared by all seeds instead of one per seed.
  bool shared_baseline = false;
};

struct Fig4Result {
  std::vector<std::int64_t> checkpoints;
  Eigen::MatrixXd mean_error;     // checkpoints x dim, averaged over seeds
  Eigen::MatrixXd mean_error_se;  // standard error over seeds
  Eigen::MatrixXd var_error;
  Eigen::MatrixXd var_error_se;
  std::vector<double> epsilon;    // (eps, delta)-DP after t iterations

  // After burn-in, full length.
  Eigen::VectorXd final_mean_abs_diff;  // mean over seeds
  Eigen::VectorXd variance_ratio;  // pooled private var / pooled baseline var
  double private_acceptance = 0.0;
  double baseline_acceptance = 0.0;
};

// Private subsampled chains against non-private Barker baselines at the same
// temperature, one independent pair per seed unless the baseline is shared.
Fig4Result fig4_experiment(const Fig4Config& config, const TargetModel& model,
                           const Dataset& data,
                           const CorrectionModel& correction);

}  // namespace dpbarker

#endif  // DPBARKER_DIAGNOSTICS_HPP_
