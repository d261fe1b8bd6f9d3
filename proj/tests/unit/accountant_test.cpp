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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "common/oracles.hpp"

namespace dpbarker {
namespace {

using oracle::rel_err;

TEST(GaussianRenyi, Examples) {
  EXPECT_EQ(gaussian_renyi_divergence(0.0, 2.0, 0.0, 2.0, 5.0), 0.0);
  EXPECT_NEAR(gaussian_renyi_divergence(0.0, 2.0, 1.0, 2.0, 2.0), 0.5, 1e-15);
  EXPECT_NEAR(gaussian_renyi_divergence(0.0, 1.0, 1.0, 2.0, 2.0), 0.47717,
              5e-6);
}

TEST(GaussianRenyi, MatchesMultiprecisionAndQuadrature) {
  struct Case { double m1, v1, m2, v2, a; };
  const std::vector<Case> cases = {
      {0, 2, 1, 2, 2},     {0, 1, 1, 2, 2},   {0.3, 1.5, -0.2, 2.5, 3},
      {1, 2, 1, 2.2, 7.5}, {0, 2, 0.05, 2, 40}};
  for (const auto& c : cases) {
    const double got = gaussian_renyi_divergence(c.m1, c.v1, c.m2, c.v2, c.a);
    EXPECT_LT(rel_err(got, oracle::renyi_normal(c.m1, c.v1, c.m2, c.v2, c.a)),
              1e-13);
    EXPECT_NEAR(got,
                oracle::renyi_normal_quadrature(c.m1, c.v1, c.m2, c.v2, c.a),
                1e-9 * std::max(1.0, got));
  }
}

TEST(GaussianRenyi, NonDecreasingInOrder) {
  double prev = 0.0;
  for (int a = 2; a <= 64; ++a) {
    const double d = gaussian_renyi_divergence(0.0, 2.0, 0.1, 2.0, double(a));
    EXPECT_GE(d, prev);
    prev = d;
  }
}

TEST(GaussianRenyi, Errors) {
  try {
    gaussian_renyi_divergence(0.0, 1.0, 0.0, 0.5, 3.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonPositiveSigmaAlpha);
  }
  EXPECT_THROW(gaussian_renyi_divergence(0.0, -1.0, 0.0, 1.0, 2.0), Error);
  EXPECT_THROW(gaussian_renyi_divergence(0.0, 1.0, 0.0, 1.0, 1.0), Error);
}

TEST(FullDataCost, Examples) {
  EXPECT_DOUBLE_EQ(full_data_iteration_cost(1.0, 2.0, 2), 2.0);
  EXPECT_EQ(full_data_iteration_cost(0.0, 1.0, 10), 0.0);
  EXPECT_NEAR(full_data_iteration_cost(0.1, 2.0, 4), 0.04, 1e-16);
  for (double c : {0.0, 3.3, -1.0}) {
    try {
      full_data_iteration_cost(1.0, c, 2);
      FAIL() << c;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidNoiseVariance);
    }
  }
}

TEST(SubsampledCost, Examples) {
  EXPECT_NEAR(subsampled_release_cost(1000, 2),
              0.0025 + 0.5 * std::log(2000.0 / 990.0) + 4.0 / 990.0, 1e-15);
  EXPECT_NEAR(subsampled_release_cost(1000, 2), 0.35814, 5e-6);
  EXPECT_NEAR(subsampled_release_cost(1000, 10),
              0.0025 + std::log(2000.0 / 950.0) / 18.0 + 20.0 / 950.0, 1e-15);
  EXPECT_NEAR(subsampled_release_cost(1000, 10), 0.064910, 5e-7);
  try {
    subsampled_release_cost(100, 20);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOrderTooLarge);
  }
}

TEST(SubsampledCost, MatchesMultiprecisionOracle) {
  for (std::int64_t b : {100, 1000, 10000}) {
    for (int a : {2, 5, 10, 19}) {
      const double got = subsampled_release_cost(b, a);
      EXPECT_GT(got, 0.0);
      EXPECT_LT(rel_err(got, oracle::subsampled_cost(b, a)), 1e-12)
          << b << " " << a;
    }
  }
  // Close to the b / 5 edge the log term is the delicate one.
  EXPECT_LT(rel_err(subsampled_release_cost(1000, 199),
                    oracle::subsampled_cost(1000, 199)),
            1e-12);
}

RdpCurve curve_for_batch(std::int64_t b, int alpha_max) {
  RdpCurve c;
  for (int a = 2; a <= alpha_max; ++a) c.set(a, subsampled_release_cost(b, a));
  return c;
}

TEST(Amplification, Examples) {
  RdpCurve flat;
  for (int a = 2; a <= 10; ++a) flat.set(a, 0.0);
  EXPECT_EQ(amplify_by_subsampling(flat, 1e-3, 2), 0.0);

  const RdpCurve c = curve_for_batch(1000, 64);
  const double e2 = c.at(2);
  const double at_one = amplify_by_subsampling(c, 1.0, 2);
  EXPECT_NEAR(at_one,
              std::log1p(std::min(4.0 * std::expm1(e2), 2.0 * std::exp(e2))),
              1e-15);
  EXPECT_GE(at_one, 0.0);

  const auto big = oracle::subsampled_curve(1000, 64);
  EXPECT_LT(rel_err(amplify_by_subsampling(c, 1e-3, 10),
                    oracle::amplified(big, 1e-3, 10)),
            1e-12);
}

TEST(Amplification, MissingOrder) {
  RdpCurve c;
  c.set(2, 0.1);
  c.set(4, 0.1);
  try {
    amplify_by_subsampling(c, 0.01, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingOrder);
  }
}

TEST(Amplification, BelowUnamplifiedAndMonotoneInQ) {
  const RdpCurve c = curve_for_batch(1000, 64);
  for (int a : {2, 5, 10, 30, 64}) {
    for (double q : {1e-4, 1e-3, 1e-2}) {
      EXPECT_LE(amplify_by_subsampling(c, q, a), c.at(a)) << a << " " << q;
    }
    double prev = 0.0;
    for (double q = 1e-4; q <= 1.0; q *= 1.5) {
      const double v = amplify_by_subsampling(c, q, a);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Compose, Examples) {
  EXPECT_NEAR(compose(0.001, 1000), 1.0, 1e-12);
  EXPECT_EQ(compose(0.0, 1000000), 0.0);
  EXPECT_DOUBLE_EQ(compose(full_data_iteration_cost(1.0, 2.0, 2), 3), 6.0);
  for (double e : {0.25, 0.5, 0.125}) {
    EXPECT_EQ(compose(e, 3000), compose(e, 1000) + compose(e, 2000));
  }
}

TEST(RdpToDp, Examples) {
  RdpCurve a;
  a.set(10, 1.0);
  EXPECT_NEAR(rdp_to_dp(a, 1e-6).epsilon, 2.53506, 5e-6);
  RdpCurve b;
  b.set(20, 0.5);
  EXPECT_NEAR(rdp_to_dp(b, 1e-5).epsilon, 1.10594, 5e-6);
  RdpCurve c;
  c.set(2, 0.0);
  c.set(3, 0.0);
  const DpGuarantee g = rdp_to_dp(c, 0.5);
  EXPECT_EQ(g.alpha_star, 3);
  EXPECT_NEAR(g.epsilon, std::log(2.0) / 2.0, 1e-15);

  try {
    rdp_to_dp(RdpCurve{}, 1e-6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyCurve);
  }
}

TEST(RdpToDp, IsTheMinimumOverOrders) {
  const RdpCurve c = compose(curve_for_batch(1000, 64), 500);
  const DpGuarantee g = rdp_to_dp(c, 1e-6);
  for (const auto& [alpha, eps] : c.entries()) {
    EXPECT_LE(g.epsilon, eps + std::log(1e6) / (alpha - 1));
  }
  EXPECT_EQ(g.epsilon,
            c.at(g.alpha_star) + std::log(1e6) / (g.alpha_star - 1));
}

TEST(RdpCurve, RejectsBadEntries) {
  RdpCurve c;
  EXPECT_THROW(c.set(1, 0.1), Error);
  EXPECT_THROW(c.set(2, -0.1), Error);
  EXPECT_THROW(c.set(2, std::nan("")), Error);
  try {
    c.at(5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingOrder);
  }
}

AccountingScenario subsampled(std::int64_t n, std::int64_t b, std::int64_t t) {
  AccountingScenario s;
  s.mode = AccountingMode::kSubsampled;
  s.dataset_size = n;
  s.batch_size = b;
  s.iterations = t;
  return s;
}

TEST(BudgetReport, MatchesOracleEndToEnd) {
  const BudgetReport r = budget_report(subsampled(1000000, 1000, 10000), 1e-6);
  EXPECT_EQ(r.alpha_grid.front(), 2);
  EXPECT_EQ(r.alpha_grid.back(), 64);

  const auto big = oracle::subsampled_curve(1000, 64);
  std::map<int, oracle::Big> composed;
  for (int a = 2; a <= 64; ++a) {
    composed[a] = 10000 * oracle::amplified(big, 1e-3, a);
  }
  int star = 0;
  const oracle::Big want = oracle::to_dp(composed, 1e-6, &star);
  EXPECT_EQ(r.dp.alpha_star, star);
  EXPECT_LT(rel_err(r.dp.epsilon, want), 1e-12);
}

TEST(BudgetReport, AlphaGridFollowsBatchSize) {
  EXPECT_EQ(budget_report(subsampled(100000, 100, 10), 1e-6).alpha_grid.back(),
            19);
  EXPECT_EQ(budget_report(subsampled(100000, 101, 10), 1e-6).alpha_grid.back(),
            20);
  try {
    budget_report(subsampled(100000, 10, 10), 1e-6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyAlphaGrid);
  }
}

TEST(BudgetReport, FullBatchSkipsAmplification) {
  const BudgetReport r = budget_report(subsampled(1000, 1000, 1), 1e-6);
  EXPECT_EQ(r.amplified, r.per_release);
  const DpGuarantee single = rdp_to_dp(r.per_release, 1e-6);
  EXPECT_EQ(r.dp.epsilon, single.epsilon);
  EXPECT_EQ(r.dp.alpha_star, single.alpha_star);
}

TEST(BudgetReport, FullDataMode) {
  AccountingScenario s;
  s.mode = AccountingMode::kFullData;
  s.dataset_size = 500;
  s.batch_size = 500;
  s.iterations = 3;
  s.noise_variance = 2.0;
  s.ratio_bound = 1.0;
  const BudgetReport r = budget_report(s, 1e-6, 8);
  EXPECT_DOUBLE_EQ(r.composed.at(2), 6.0);
  EXPECT_EQ(r.alpha_grid.back(), 8);
}

TEST(BudgetReport, HalvingIterationsHalvesComposedCost) {
  const BudgetReport a = budget_report(subsampled(100000, 1000, 5000), 1e-6);
  const BudgetReport b = budget_report(subsampled(100000, 1000, 2500), 1e-6);
  for (const auto& [alpha, eps] : a.composed.entries()) {
    EXPECT_DOUBLE_EQ(eps, 2.0 * b.composed.at(alpha));
  }
}

TEST(Sweeps, StrictlyIncreasingInIterationsAndRatio) {
  const std::vector<std::int64_t> ts = {1000, 3000, 10000, 30000, 100000};
  for (std::int64_t n : {100000, 1000000, 10000000}) {
    const auto rows = sweep_iterations(subsampled(n, 1000, 1), ts, 1e-6);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      EXPECT_GT(rows[i].epsilon, rows[i - 1].epsilon);
    }
  }
  // Batches of at least 325 keep the full order grid {2..64}.
  const std::vector<double> qs = {1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  const auto rows = sweep_sampling_ratio(subsampled(1000000, 1, 1000), qs, 1e-6);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GT(rows[i].epsilon, rows[i - 1].epsilon);
    EXPECT_GT(rows[i].q, rows[i - 1].q);
  }
}

TEST(Sweeps, TinyBatchesLoseHighOrders) {
  // With b = 100 only orders below 20 are admissible, which costs more than
  // the extra sampling at b = 300 saves.
  const std::vector<double> qs = {1e-4, 3e-4};
  const auto rows = sweep_sampling_ratio(subsampled(1000000, 1, 1000), qs, 1e-6);
  EXPECT_EQ(rows[0].alpha_star, 19);
  EXPECT_GT(rows[0].epsilon, rows[1].epsilon);
}

TEST(Sweeps, LargerDatasetsCostLessAtFixedBatch) {
  double prev = INFINITY;
  for (std::int64_t n : {100000, 1000000, 10000000}) {
    const double e = budget_report(subsampled(n, 1000, 10000), 1e-6).dp.epsilon;
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST(Scenario, Validation) {
  AccountingScenario s = subsampled(1000, 2000, 1);
  EXPECT_THROW(s.validate(), Error);
  s = subsampled(1000, 100, 1);
  s.noise_variance = 1.5;
  try {
    s.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidNoiseVariance);
  }
}

}  // namespace
}  // namespace dpbarker
