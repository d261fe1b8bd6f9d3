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

// Rényi-DP arithmetic for the private Barker test: per-release costs for the
// full-data and subsampled tests, amplification by subsampling, composition
// over a chain and conversion to (epsilon, delta)-DP.
//
// Every function here is a pure function of its arguments.

#ifndef DPBARKER_ACCOUNTANT_HPP_
#define DPBARKER_ACCOUNTANT_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "dpbarker/error.hpp"

namespace dpbarker {

inline constexpr double kLogisticVariance = 3.289868133696452872;  // pi^2 / 3

// Cost curve alpha -> epsilon(alpha) over integer Rényi orders alpha >= 2.
//
// Monotonicity in alpha is not enforced: the closed-form subsampled bound is a
// valid but non-monotone upper bound (its small-alpha terms dominate).
class RdpCurve {
 public:
  RdpCurve() = default;

  // Throws kInvalidArgument for alpha < 2 or a negative / non-finite epsilon.
  void set(int alpha, double epsilon);

  // Throws kMissingOrder.
  double at(int alpha) const;
  bool contains(int alpha) const { return entries_.contains(alpha); }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::map<int, double>& entries() const { return entries_; }

  bool operator==(const RdpCurve&) const = default;

 private:
  std::map<int, double> entries_;
};

struct DpGuarantee {
  double epsilon = 0.0;
  double delta = 0.0;
  int alpha_star = 0;
};

enum class AccountingMode { kFullData, kSubsampled };

struct AccountingScenario {
  AccountingMode mode = AccountingMode::kSubsampled;
  std::int64_t dataset_size = 0;  // N
  std::int64_t batch_size = 0;    // b
  std::int64_t iterations = 1;    // T
  double noise_variance = 2.0;    // C
  double ratio_bound = 0.0;       // B, full-data mode only

  double sampling_ratio() const {
    return static_cast<double>(batch_size) / static_cast<double>(dataset_size);
  }
  // Throws kInvalidArgument / kInvalidNoiseVariance on a broken scenario.
  void validate() const;
};

struct BudgetReport {
  AccountingScenario scenario;
  double delta = 0.0;
  std::vector<int> alpha_grid;
  RdpCurve per_release;  // one accept/reject decision
  RdpCurve amplified;    // after subsampling amplification
  RdpCurve composed;     // after T-fold composition
  DpGuarantee dp;
};

struct SweepRow {
  double q = 0.0;
  std::int64_t iterations = 0;
  int alpha_star = 0;
  double epsilon = 0.0;
  double delta = 0.0;
};

// Closed-form Rényi divergence D_alpha(N(mu1, var1) || N(mu2, var2)).
template <typename Scalar>
Scalar gaussian_renyi_divergence(Scalar mu1, Scalar var1, Scalar mu2,
                                 Scalar var2, Scalar alpha) {
  using std::log;
  if (!(var1 > Scalar(0)) || !(var2 > Scalar(0)) || !(alpha > Scalar(1))) {
    throw Error(ErrorCode::kInvalidArgument,
                "variances must be positive and alpha > 1");
  }
  const Scalar var_alpha = alpha * var2 + (Scalar(1) - alpha) * var1;
  if (!(var_alpha > Scalar(0))) {
    throw Error(ErrorCode::kNonPositiveSigmaAlpha,
                "alpha * var2 + (1 - alpha) * var1 <= 0");
  }
  const Scalar diff = mu1 - mu2;
  return Scalar(0.5) * log(var2 / var1) +
         log(var2 / var_alpha) / (Scalar(2) * (alpha - Scalar(1))) +
         alpha * diff * diff / (Scalar(2) * var_alpha);
}

// Cost of one full-data decision with per-example bound B and noise C:
// 2 alpha B^2 / C.
double full_data_iteration_cost(double ratio_bound, double noise_variance,
                                int alpha);

// Cost of releasing one draw of the subsampled test statistic with C = 2 and
// per-example ratios clipped to sqrt(b) / N. Requires alpha < b / 5.
double subsampled_release_cost(std::int64_t batch_size, int alpha);

// Amplified per-iteration cost at order alpha for sampling ratio q, using the
// Gaussian-mechanism specialization of the integer-order subsampling bound.
// The series is summed in log space.
double amplify_by_subsampling(const RdpCurve& curve, double q, int alpha);

double compose(double per_iteration_epsilon, std::int64_t iterations);

RdpCurve compose(const RdpCurve& per_iteration, std::int64_t iterations);

DpGuarantee rdp_to_dp(const RdpCurve& curve, double delta);

// {2, ..., min(alpha_max, ceil(b / 5) - 1)} in subsampled mode,
// {2, ..., alpha_max} in full-data mode.
std::vector<int> alpha_grid(const AccountingScenario& scenario, int alpha_max);

BudgetReport budget_report(const AccountingScenario& scenario, double delta,
                           int alpha_max = 64);

// One row per q; the batch size is round(q * N) and the reported q is the
// realized b / N.
std::vector<SweepRow> sweep_sampling_ratio(const AccountingScenario& base,
                                           std::span<const double> qs,
                                           double delta, int alpha_max = 64);

std::vector<SweepRow> sweep_iterations(const AccountingScenario& base,
                                       std::span<const std::int64_t> ts,
                                       double delta, int alpha_max = 64);

}  // namespace dpbarker

#endif  // DPBARKER_ACCOUNTANT_HPP_
