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

// Target models and the non-private reference chains.

#ifndef DPBARKER_MODELS_HPP_
#define DPBARKER_MODELS_HPP_

#include <Eigen/Dense>
#include <cstdint>

#include "dpbarker/correction.hpp"
#include "dpbarker/sampler.hpp"

namespace dpbarker {

// Two-parameter mixture
//   theta_1 ~ N(0, 10), theta_2 ~ N(0, 1),
//   x ~ 0.5 N(theta_1, 2) + 0.5 N(theta_1 + theta_2, 2).
class Gmm2dModel final : public TargetModel {
 public:
  static constexpr double kSigma1Sq = 10.0;
  static constexpr double kSigma2Sq = 1.0;
  static constexpr double kSigmaXSq = 2.0;

  int dimension() const override { return 2; }
  double log_likelihood(const DatumRef& x,
                        const ParamRef& theta) const override;
  double log_prior(const ParamRef& theta) const override;
  Eigen::VectorXd sample_prior(Rng& rng) const override;
};

double gmm2d_log_likelihood(double x, double theta1, double theta2);
double gmm2d_log_prior(double theta1, double theta2);

struct SyntheticDataSpec {
  Eigen::Vector2d theta_true{0.0, 1.0};
  std::int64_t size = 100000;
  std::uint64_t seed = 0;
};

// N x 1 dataset drawn from the gmm2d likelihood at theta_true.
Dataset synthesize(const SyntheticDataSpec& spec);

// Settings shared by the non-private chains. tempered_size = 0 means N0 = N.
struct BaselineConfig {
  std::int64_t iterations = 0;
  Eigen::VectorXd proposal_sd;
  double tempered_size = 0.0;
  std::uint64_t seed = 0;
  // Minibatch size for the subsampled Barker baseline; 0 uses all data.
  std::int64_t batch_size = 0;
};

struct BaselineResult {
  Eigen::MatrixXd samples;  // iterations x dim
  std::int64_t accepted = 0;

  double acceptance_rate() const {
    return samples.rows() == 0
               ? 0.0
               : static_cast<double>(accepted) /
                     static_cast<double>(samples.rows());
  }
};

// Metropolis-Hastings with min{1, exp(Delta)} on the full (tempered) data.
BaselineResult mh_exact_chain(const TargetModel& model, const Dataset& data,
                              const BaselineConfig& config,
                              const Eigen::VectorXd& init,
                              const ProgressFn& progress = {});

// Barker chain without privacy. With batch_size 0 (or N) it tests
// Delta + Logistic(0, 1) > 0 on all data; otherwise it runs the unclipped
// minibatch test Delta* + N(0, C - s^2) + V_cor > 0, which needs `correction`.
BaselineResult barker_nonprivate_chain(const TargetModel& model,
                                       const Dataset& data,
                                       const BaselineConfig& config,
                                       const Eigen::VectorXd& init,
                                       const CorrectionModel* correction =
                                           nullptr,
                                       const ProgressFn& progress = {});

}  // namespace dpbarker

#endif  // DPBARKER_MODELS_HPP_
