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

#include "dpbarker/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dpbarker {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log C(n, k) through the multiplicative recurrence; exact in double while
// the coefficient stays below 2^53.
double log_binomial(int n, int k) {
  k = std::min(k, n - k);
  double c = 1.0;
  for (int i = 1; i <= k; ++i) {
    c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return std::log(c);
}

// log(e^x - 1) for x >= 0; -inf at x = 0.
double log_expm1(double x) {
  if (x == 0.0) return kNegInf;
  if (x > 30.0) return x + std::log1p(-std::exp(-x));
  return std::log(std::expm1(x));
}

void check_order(int alpha) {
  if (alpha < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "Rényi order must be an integer >= 2, got " +
                    std::to_string(alpha));
  }
}

}  // namespace

void RdpCurve::set(int alpha, double epsilon) {
  check_order(alpha);
  if (!std::isfinite(epsilon) || epsilon < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "RDP cost must be finite and nonnegative at alpha=" +
                    std::to_string(alpha));
  }
  entries_[alpha] = epsilon;
}

double RdpCurve::at(int alpha) const {
  auto it = entries_.find(alpha);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kMissingOrder,
                "curve has no entry for alpha=" + std::to_string(alpha));
  }
  return it->second;
}

void AccountingScenario::validate() const {
  if (dataset_size < 1 || batch_size < 1 || batch_size > dataset_size) {
    throw Error(ErrorCode::kInvalidArgument, "need 0 < b <= N");
  }
  if (iterations < 1) {
    throw Error(ErrorCode::kInvalidArgument, "need T >= 1");
  }
  if (mode == AccountingMode::kSubsampled) {
    if (noise_variance != 2.0) {
      throw Error(ErrorCode::kInvalidNoiseVariance,
                  "the subsampled test is accounted only for C = 2");
    }
  } else {
    if (!(noise_variance > 0.0 && noise_variance < kLogisticVariance)) {
      throw Error(ErrorCode::kInvalidNoiseVariance,
                  "C must lie in (0, pi^2/3)");
    }
    if (!(ratio_bound > 0.0) || !std::isfinite(ratio_bound)) {
      throw Error(ErrorCode::kInvalidArgument, "need B > 0");
    }
  }
}

double full_data_iteration_cost(double ratio_bound, double noise_variance,
                                int alpha) {
  check_order(alpha);
  if (!(noise_variance > 0.0 && noise_variance < kLogisticVariance)) {
    throw Error(ErrorCode::kInvalidNoiseVariance, "C must lie in (0, pi^2/3)");
  }
  if (!(ratio_bound >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "need B >= 0");
  }
  return 2.0 * alpha * ratio_bound * ratio_bound / noise_variance;
}

double subsampled_release_cost(std::int64_t batch_size, int alpha) {
  check_order(alpha);
  if (batch_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
  }
  if (5 * static_cast<std::int64_t>(alpha) >= batch_size) {
    throw Error(ErrorCode::kOrderTooLarge,
                "alpha=" + std::to_string(alpha) + " is not below b/5 for b=" +
                    std::to_string(batch_size));
  }
  const double b = static_cast<double>(batch_size);
  const double a = static_cast<double>(alpha);
  const double gap = b - 5.0 * a;
  // ln(2b / (b - 5 alpha)) = ln 2 - ln(1 - 5 alpha / b)
  const double log_ratio = std::log(2.0) - std::log1p(-5.0 * a / b);
  return 5.0 / (2.0 * b) + log_ratio / (2.0 * (a - 1.0)) + 2.0 * a / gap;
}

double amplify_by_subsampling(const RdpCurve& curve, double q, int alpha) {
  check_order(alpha);
  if (!(q > 0.0 && q <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "q must lie in (0, 1]");
  }
  const double log_q = std::log(q);
  const double eps2 = curve.at(2);
  const double log_min =
      std::min(std::log(4.0) + log_expm1(eps2), std::log(2.0) + eps2);

  std::vector<double> log_terms;
  log_terms.reserve(static_cast<std::size_t>(alpha));
  log_terms.push_back(2.0 * log_q + log_binomial(alpha, 2) + log_min);
  for (int j = 3; j <= alpha; ++j) {
    log_terms.push_back(std::log(2.0) + j * log_q + log_binomial(alpha, j) +
                        (j - 1) * curve.at(j));
  }

  // log(1 + sum_i exp(t_i))
  const double top = *std::max_element(log_terms.begin(), log_terms.end());
  double log_total;
  if (top <= 0.0) {
    double sum = 0.0;
    for (double t : log_terms) sum += std::exp(t);
    log_total = std::log1p(sum);
  } else {
    double sum = std::exp(-top);
    for (double t : log_terms) sum += std::exp(t - top);
    log_total = top + std::log(sum);
  }
  return log_total / (alpha - 1);
}

double compose(double per_iteration_epsilon, std::int64_t iterations) {
  if (iterations < 0) {
    throw Error(ErrorCode::kInvalidArgument, "iteration count is negative");
  }
  return static_cast<double>(iterations) * per_iteration_epsilon;
}

RdpCurve compose(const RdpCurve& per_iteration, std::int64_t iterations) {
  RdpCurve out;
  for (const auto& [alpha, eps] : per_iteration.entries()) {
    out.set(alpha, compose(eps, iterations));
  }
  return out;
}

DpGuarantee rdp_to_dp(const RdpCurve& curve, double delta) {
  if (curve.empty()) {
    throw Error(ErrorCode::kEmptyCurve, "cannot convert an empty RDP curve");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  }
  const double log_inv_delta = -std::log(delta);
  DpGuarantee best{std::numeric_limits<double>::infinity(), delta, 0};
  for (const auto& [alpha, eps] : curve.entries()) {
    const double candidate = eps + log_inv_delta / (alpha - 1);
    if (candidate < best.epsilon) {
      best.epsilon = candidate;
      best.alpha_star = alpha;
    }
  }
  return best;
}

std::vector<int> alpha_grid(const AccountingScenario& scenario,
                            int alpha_max) {
  if (alpha_max < 2) {
    throw Error(ErrorCode::kInvalidArgument, "alpha_max must be >= 2");
  }
  std::int64_t upper = alpha_max;
  if (scenario.mode == AccountingMode::kSubsampled) {
    // largest integer strictly below b / 5
    upper = std::min<std::int64_t>(upper, (scenario.batch_size + 4) / 5 - 1);
  }
  if (upper < 2) {
    throw Error(ErrorCode::kEmptyAlphaGrid,
                "no integer order in [2, b/5) for b=" +
                    std::to_string(scenario.batch_size));
  }
  std::vector<int> grid;
  for (int a = 2; a <= upper; ++a) grid.push_back(a);
  return grid;
}

BudgetReport budget_report(const AccountingScenario& scenario, double delta,
                           int alpha_max) {
  scenario.validate();
  BudgetReport report;
  report.scenario = scenario;
  report.delta = delta;
  report.alpha_grid = alpha_grid(scenario, alpha_max);

  for (int alpha : report.alpha_grid) {
    report.per_release.set(
        alpha, scenario.mode == AccountingMode::kSubsampled
                   ? subsampled_release_cost(scenario.batch_size, alpha)
                   : full_data_iteration_cost(scenario.ratio_bound,
                                              scenario.noise_variance, alpha));
  }

  const bool amplify = scenario.mode == AccountingMode::kSubsampled &&
                       scenario.batch_size < scenario.dataset_size;
  if (amplify) {
    const double q = scenario.sampling_ratio();
    for (int alpha : report.alpha_grid) {
      report.amplified.set(alpha,
                           amplify_by_subsampling(report.per_release, q, alpha));
    }
  } else {
    report.amplified = report.per_release;
  }
  report.composed = compose(report.amplified, scenario.iterations);
  report.dp = rdp_to_dp(report.composed, delta);
  return report;
}

std::vector<SweepRow> sweep_sampling_ratio(const AccountingScenario& base,
                                           std::span<const double> qs,
                                           double delta, int alpha_max) {
  std::vector<SweepRow> rows;
  rows.reserve(qs.size());
  for (double q : qs) {
    AccountingScenario s = base;
    s.batch_size = std::llround(q * static_cast<double>(base.dataset_size));
    const BudgetReport r = budget_report(s, delta, alpha_max);
    rows.push_back({s.sampling_ratio(), s.iterations, r.dp.alpha_star,
                    r.dp.epsilon, delta});
  }
  return rows;
}

std::vector<SweepRow> sweep_iterations(const AccountingScenario& base,
                                       std::span<const std::int64_t> ts,
                                       double delta, int alpha_max) {
  std::vector<SweepRow> rows;
  rows.reserve(ts.size());
  for (std::int64_t t : ts) {
    AccountingScenario s = base;
    s.iterations = t;
    const BudgetReport r = budget_report(s, delta, alpha_max);
    rows.push_back({s.sampling_ratio(), t, r.dp.alpha_star, r.dp.epsilon,
                    delta});
  }
  return rows;
}

}  // namespace dpbarker
