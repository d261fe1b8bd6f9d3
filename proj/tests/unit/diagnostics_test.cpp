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


#include "dpbarker/diagnostics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "dpbarker/error.hpp"
#include "dpbarker/models.hpp"

namespace dpbarker {
namespace {

const CorrectionModel& shipped() {
  static const CorrectionModel model = load_model(
      std::filesystem::path(DPB_DATA_DIR) / "correction_C2_K50.json");
  return model;
}

const Dataset& desk_data() {
  static const Dataset data = [] {
    SyntheticDataSpec spec;
    spec.size = 100000;
    return synthesize(spec);
  }();
  return data;
}

Eigen::VectorXd vec(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

// Plain loops in long double, sharing nothing with the library.
double clt_reference(const Dataset& data, const Eigen::VectorXd& nu,
                     const Eigen::VectorXd& old, std::int64_t b, double scale) {
  const std::int64_t n = data.rows();
  long double mean = 0;
  std::vector<long double> r(n);
  for (std::int64_t i = 0; i < n; ++i) {
    r[i] = (long double)gmm2d_log_likelihood(data(i, 0), nu[0], nu[1]) -
           gmm2d_log_likelihood(data(i, 0), old[0], old[1]);
    mean += r[i];
  }
  mean /= n;
  long double m1 = 0, m3 = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const long double z = std::fabs((long double)scale * (r[i] - mean));
    m1 += z;
    m3 += z * z * z;
  }
  m1 /= n;
  m3 /= n;
  return double((6.4L * m3 + 2.0L * m1) / std::sqrt((long double)b));
}

TEST(CltBound, ZeroWithoutAMove) {
  const Gmm2dModel gmm;
  EXPECT_EQ(clt_error_bound(gmm, desk_data(), vec(0, 1), vec(0, 1), 1000, 100),
            0.0);
}

TEST(CltBound, ScalesAsInverseRootB) {
  const Gmm2dModel gmm;
  const Eigen::VectorXd old = vec(0, 1), nu = vec(0.01, 1);
  const double ref =
      clt_error_bound(gmm, desk_data(), nu, old, 100) * std::sqrt(100.0);
  for (std::int64_t b : {1000, 10000}) {
    const double v = clt_error_bound(gmm, desk_data(), nu, old, b);
    EXPECT_NEAR(v * std::sqrt(double(b)) / ref, 1.0, 1e-12);
  }
}

TEST(CltBound, MatchesAnIndependentMomentPass) {
  const Gmm2dModel gmm;
  const Eigen::VectorXd old = vec(0, 1), nu = vec(0.01, 1);
  const double got = clt_error_bound(gmm, desk_data(), nu, old, 1000);
  EXPECT_NEAR(got / clt_reference(desk_data(), nu, old, 1000, 1e5), 1.0, 1e-12);
  const double tempered = clt_error_bound(gmm, desk_data(), nu, old, 1000, 100);
  EXPECT_NEAR(tempered / clt_reference(desk_data(), nu, old, 1000, 100), 1.0,
              1e-12);
}

TEST(CltBound, InvalidBatch) {
  const Gmm2dModel gmm;
  EXPECT_THROW(clt_error_bound(gmm, desk_data(), vec(0, 1), vec(0, 1), 0),
               Error);
}

TEST(Bounds, CompositionAndTv) {
  EXPECT_EQ(total_test_error(0.0, 0.0), 0.0);
  EXPECT_EQ(total_test_error(0.125, 0.25), 0.375);
  EXPECT_LT(total_test_error(0.1, 0.2), total_test_error(0.1, 0.3));
  EXPECT_LT(total_test_error(0.1, 0.2), total_test_error(0.2, 0.2));
  EXPECT_DOUBLE_EQ(stationary_tv_bound(0.01, 0.0), 0.01);
  EXPECT_DOUBLE_EQ(stationary_tv_bound(0.01, 0.5), 0.02);
  for (double eta : {1.0, 1.5, -0.1, std::nan("")}) {
    try {
      stationary_tv_bound(0.01, eta);
      FAIL() << eta;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidEta);
    }
  }
  const ErrorBoundReport r = error_bound_report(0.3, 0.004, 0.5);
  EXPECT_EQ(r.total_test_error, 0.3 + 0.004);
  EXPECT_EQ(r.tv_bound, 2.0 * r.total_test_error);
}

TEST(Bounds, ShippedCorrectionDistance) {
  const double d = correction_distance(shipped());
  EXPECT_GT(d, 0.0);
  EXPECT_LE(d, 0.01);
}

ClipScanConfig scan_config() {
  ClipScanConfig c;
  c.proposal_sds = {1e-4, 1e-3, 1e-2, 1e-1, 3e-1};
  c.trials = 40;
  c.warmup = 200;
  c.seed = 3;
  return c;
}

TEST(ClipScan, TrendAndRange) {
  const Gmm2dModel gmm;
  SyntheticDataSpec spec;
  spec.size = 20000;
  const Dataset data = synthesize(spec);
  const auto rows = clip_fraction_scan(gmm, data, scan_config(), vec(0, 1));
  ASSERT_EQ(rows.size(), 5u);
  for (const auto& r : rows) {
    EXPECT_GE(r.clip_fraction, 0.0);
    EXPECT_LE(r.clip_fraction, 1.0);
  }
  EXPECT_EQ(rows[0].clip_fraction, 0.0);
  EXPECT_LT(rows[1].clip_fraction, rows[3].clip_fraction);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GE(rows[i].clip_fraction + 2.0 * rows[i].standard_error,
              rows[i - 1].clip_fraction);
  }

  ClipScanConfig off = scan_config();
  off.clip = std::numeric_limits<double>::infinity();
  for (const auto& r : clip_fraction_scan(gmm, data, off, vec(0, 1))) {
    EXPECT_EQ(r.clip_fraction, 0.0);
  }
}

TEST(Accuracy, IdenticalSetsAndEmptyAfterBurnIn) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Random(100, 2);
  const AccuracyErrors e = posterior_accuracy(s, s, 10);
  EXPECT_EQ(e.mean_error.norm(), 0.0);
  EXPECT_EQ(e.var_error.norm(), 0.0);
  try {
    posterior_accuracy(s, s, 100);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kEmptyAfterBurnIn);
  }
}

TEST(Accuracy, HalvesOfOneChainAgreeWithinMonteCarloError) {
  const Gmm2dModel gmm;
  SyntheticDataSpec spec;
  spec.size = 2000;
  const Dataset data = synthesize(spec);
  BaselineConfig c;
  c.iterations = 40000;
  c.proposal_sd = Eigen::VectorXd::Constant(1, 0.5);
  c.tempered_size = 100;
  c.seed = 5;
  const Eigen::MatrixXd s =
      barker_nonprivate_chain(gmm, data, c, vec(0, 1)).samples;
  const Eigen::MatrixXd a = s.middleRows(1000, 19500);
  const Eigen::MatrixXd b = s.bottomRows(19500);
  const AccuracyErrors e = posterior_accuracy(a, b, 0);

  auto batch_se = [](const Eigen::VectorXd& x) {
    const int nb = 25;
    const Eigen::Index len = x.size() / nb;
    Eigen::VectorXd m(nb);
    for (int i = 0; i < nb; ++i) m[i] = x.segment(i * len, len).mean();
    return std::sqrt((m.array() - m.mean()).square().sum() / (nb - 1) / nb);
  };
  for (int j = 0; j < 2; ++j) {
    const double se = std::hypot(batch_se(a.col(j)), batch_se(b.col(j)));
    EXPECT_LT(e.mean_error[j], 4.0 * se) << j;
  }
}

TEST(Accuracy, TrajectoryUsesPrefixesAfterBurnIn) {
  Eigen::MatrixXd priv(10, 1), base(10, 1);
  for (int i = 0; i < 10; ++i) {
    priv(i, 0) = i;
    base(i, 0) = 3.0;
  }
  const auto traj = accuracy_trajectory(priv, base, {4, 10}, 2);
  ASSERT_EQ(traj.size(), 2u);
  EXPECT_DOUBLE_EQ(traj[0].mean_error[0], 0.5);   // mean of {2, 3}
  EXPECT_DOUBLE_EQ(traj[1].mean_error[0], 2.5);   // mean of {2..9}
  EXPECT_DOUBLE_EQ(traj[0].var_error[0], 0.25);
  EXPECT_THROW(accuracy_trajectory(priv, base, {11}, 2), Error);
}

TEST(Fig4, SmallRunShapesAndDeterminism) {
  const Gmm2dModel gmm;
  SyntheticDataSpec spec;
  spec.size = 5000;
  const Dataset data = synthesize(spec);
  Fig4Config c;
  c.seeds = 2;
  c.burn_in = 100;
  c.baseline_iterations = 400;
  c.chain.mode = ChainMode::kSubsampled;
  c.chain.dataset_size = 5000;
  c.chain.batch_size = 500;
  c.chain.tempered_size = 100;
  c.chain.iterations = 600;
  c.chain.proposal_sd = Eigen::VectorXd::Constant(1, 0.2);
  c.init = vec(0, 1);
  c.baseline_proposal_sd = Eigen::VectorXd::Constant(1, 0.5);

  const Fig4Result r = fig4_experiment(c, gmm, data, shipped());
  EXPECT_EQ(r.checkpoints, (std::vector<std::int64_t>{600}));
  EXPECT_EQ(r.mean_error.rows(), 1);
  EXPECT_EQ(r.mean_error.cols(), 2);
  EXPECT_EQ(r.epsilon.size(), 1u);
  EXPECT_GT(r.private_acceptance, 0.0);
  EXPECT_GT(r.baseline_acceptance, 0.0);
  EXPECT_EQ(r.final_mean_abs_diff, r.mean_error.row(0).transpose());

  c.checkpoints = {200, 400, 600};
  const Fig4Result again = fig4_experiment(c, gmm, data, shipped());
  EXPECT_EQ(again.mean_error.row(2), r.mean_error.row(0));
  EXPECT_LT(again.epsilon[0], again.epsilon[1]);
  EXPECT_LT(again.epsilon[1], again.epsilon[2]);
}

}  // namespace
}  // namespace dpbarker
