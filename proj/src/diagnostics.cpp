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

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "dpbarker/error.hpp"
#include "dpbarker/models.hpp"

namespace dpbarker {
namespace {

struct Moments {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

Moments moments(const Eigen::MatrixXd& samples, std::int64_t begin,
                std::int64_t end) {
  if (end <= begin) {
    throw Error(ErrorCode::kEmptyAfterBurnIn,
                "no samples in [" + std::to_string(begin) + ", " +
                    std::to_string(end) + ")");
  }
  const auto block = samples.middleRows(begin, end - begin);
  Moments m;
  m.mean = block.colwise().mean().transpose();
  m.var = (block.rowwise() - m.mean.transpose())
              .array()
              .square()
              .colwise()
              .mean()
              .transpose();
  return m;
}

AccuracyErrors compare(const Moments& a, const Moments& b) {
  return {(a.mean - b.mean).cwiseAbs(), (a.var - b.var).cwiseAbs()};
}

}  // namespace

double clt_error_bound(const TargetModel& model, const Dataset& data,
                       const ParamRef& theta_new, const ParamRef& theta_old,
                       std::int64_t batch_size, double tempered_size) {
  if (batch_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
  }
  const std::int64_t n = data.rows();
  const double scale =
      tempered_size > 0.0 ? tempered_size : static_cast<double>(n);
  Eigen::ArrayXd r(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const double a = model.log_likelihood(data.row(i), theta_new);
    const double b = model.log_likelihood(data.row(i), theta_old);
    if (!std::isfinite(a) || !std::isfinite(b)) {
      throw Error(ErrorCode::kNonFiniteLikelihood,
                  "log-likelihood is not finite at datum " + std::to_string(i));
    }
    r[i] = a - b;
  }
  const Eigen::ArrayXd z = (scale * (r - r.mean())).abs();
  const double m1 = z.mean();
  const double m3 = z.cube().mean();
  return (6.4 * m3 + 2.0 * m1) / std::sqrt(static_cast<double>(batch_size));
}

double correction_distance(const CorrectionModel& correction) {
  return kolmogorov_distance(correction);
}

double total_test_error(double clt_bound, double correction_distance) {
  return clt_bound + correction_distance;
}

double stationary_tv_bound(double test_error, double eta) {
  if (!(eta >= 0.0 && eta < 1.0)) {
    throw Error(ErrorCode::kInvalidEta,
                "contraction constant must lie in [0, 1), got " +
                    std::to_string(eta));
  }
  return test_error / (1.0 - eta);
}

ErrorBoundReport error_bound_report(double clt_bound,
                                    double correction_distance, double eta) {
  ErrorBoundReport r;
  r.clt_bound = clt_bound;
  r.correction_distance = correction_distance;
  r.total_test_error = total_test_error(clt_bound, correction_distance);
  r.eta = eta;
  r.tv_bound = stationary_tv_bound(r.total_test_error, eta);
  return r;
}

std::vector<ClipFractionRow> clip_fraction_scan(const TargetModel& model,
                                                const Dataset& data,
                                                const ClipScanConfig& config,
                                                const Eigen::VectorXd& init) {
  if (config.trials < 1 || config.warmup < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "need trials >= 1 and warmup >= 2");
  }
  if (config.batch_size < 1 || config.batch_size > data.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "need 0 < b <= N");
  }
  const double clip =
      config.clip.value_or(std::sqrt(static_cast<double>(config.batch_size)) /
                           config.tempered_size);

  BaselineConfig warm;
  warm.iterations = config.warmup;
  warm.proposal_sd = Eigen::VectorXd::Constant(1, config.warmup_proposal_sd);
  warm.tempered_size = config.tempered_size;
  warm.seed = config.seed;
  const BaselineResult chain = barker_nonprivate_chain(model, data, warm, init);

  Rng rng = make_rng(config.seed, 0x636c6970);
  const std::int64_t first = config.warmup / 2;
  std::vector<ClipFractionRow> rows;
  for (double sd : config.proposal_sds) {
    if (!(sd > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "proposal sd must be positive");
    }
    Eigen::ArrayXd fractions(config.trials);
    for (int trial = 0; trial < config.trials; ++trial) {
      const std::int64_t pick = std::uniform_int_distribution<std::int64_t>(
          first, config.warmup - 1)(rng);
      const Eigen::VectorXd theta = chain.samples.row(pick).transpose();
      Eigen::VectorXd proposal(theta.size());
      for (Eigen::Index i = 0; i < theta.size(); ++i) {
        proposal[i] = theta[i] + sd * standard_normal(rng);
      }
      const auto batch = draw_batch(data.rows(), config.batch_size, rng);
      const BatchStatistic stat = batch_statistic(
          model, data, batch, proposal, theta, config.tempered_size, clip);
      fractions[trial] = static_cast<double>(stat.clipped_count) /
                         static_cast<double>(config.batch_size);
    }
    const double mean = fractions.mean();
    const double se =
        config.trials > 1
            ? std::sqrt((fractions - mean).square().sum() /
                        (config.trials - 1) / config.trials)
            : 0.0;
    rows.push_back({sd, mean, se});
  }
  return rows;
}

AccuracyErrors posterior_accuracy(const Eigen::MatrixXd& private_samples,
                                  const Eigen::MatrixXd& baseline_samples,
                                  std::int64_t burn_in) {
  return compare(moments(private_samples, burn_in, private_samples.rows()),
                 moments(baseline_samples, burn_in, baseline_samples.rows()));
}

std::vector<AccuracyErrors> accuracy_trajectory(
    const Eigen::MatrixXd& private_samples,
    const Eigen::MatrixXd& baseline_samples,
    const std::vector<std::int64_t>& checkpoints, std::int64_t burn_in) {
  const Moments base = moments(baseline_samples, burn_in, baseline_samples.rows());
  std::vector<AccuracyErrors> out;
  out.reserve(checkpoints.size());
  for (std::int64_t t : checkpoints) {
    if (t > private_samples.rows()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "checkpoint beyond chain length");
    }
    out.push_back(compare(moments(private_samples, burn_in, t), base));
  }
  return out;
}

Fig4Result fig4_experiment(const Fig4Config& config, const TargetModel& model,
                           const Dataset& data,
                           const CorrectionModel& correction) {
  if (config.seeds < 1) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one seed");
  }
  const std::int64_t total = config.chain.iterations;
  Fig4Result result;
  result.checkpoints = config.checkpoints;
  if (result.checkpoints.empty()) {
    for (std::int64_t t = config.burn_in + 500; t <= total; t += 500) {
      result.checkpoints.push_back(t);
    }
  }
  const auto n_cp = static_cast<Eigen::Index>(result.checkpoints.size());
  const int dim = model.dimension();
  const int seeds = config.seeds;

  // Per-seed values, stacked as (checkpoint * dim) columns.
  Eigen::MatrixXd mean_err(seeds, n_cp * dim), var_err(seeds, n_cp * dim);
  Eigen::MatrixXd final_diff(seeds, dim), private_var(seeds, dim),
      baseline_var(seeds, dim), private_mean(seeds, dim),
      baseline_mean(seeds, dim);
  double private_acc = 0.0, baseline_acc = 0.0;

  auto baseline = [&](int s) {
    BaselineConfig base;
    base.iterations = config.baseline_iterations;
    base.proposal_sd = config.baseline_proposal_sd.size() > 0
                           ? config.baseline_proposal_sd
                           : config.chain.proposal_sd;
    base.tempered_size = config.chain.effective_size();
    base.batch_size = config.baseline_batch_size;
    base.seed = config.base_seed + 1000003u + static_cast<std::uint64_t>(s);
    return barker_nonprivate_chain(model, data, base, config.init, &correction);
  };
  std::optional<BaselineResult> shared;
  if (config.shared_baseline) shared = baseline(0);

  for (int s = 0; s < seeds; ++s) {
    ChainConfig chain = config.chain;
    chain.seed = config.base_seed + static_cast<std::uint64_t>(s);
    const ChainResult priv = run_chain(chain, model, data, correction,
                                       config.init);
    const BaselineResult ref = shared ? *shared : baseline(s);

    const auto traj = accuracy_trajectory(priv.samples, ref.samples,
                                          result.checkpoints, config.burn_in);
    for (Eigen::Index c = 0; c < n_cp; ++c) {
      mean_err.row(s).segment(c * dim, dim) = traj[c].mean_error.transpose();
      var_err.row(s).segment(c * dim, dim) = traj[c].var_error.transpose();
    }
    const Moments pm = moments(priv.samples, config.burn_in, priv.samples.rows());
    const Moments bm = moments(ref.samples, config.burn_in, ref.samples.rows());
    final_diff.row(s) = (pm.mean - bm.mean).cwiseAbs().transpose();
    private_var.row(s) = pm.var.transpose();
    baseline_var.row(s) = bm.var.transpose();
    private_mean.row(s) = pm.mean.transpose();
    baseline_mean.row(s) = bm.mean.transpose();
    private_acc += priv.acceptance_rate();
    baseline_acc += ref.acceptance_rate();
  }

  auto mean_and_se = [&](const Eigen::MatrixXd& m, Eigen::MatrixXd& mean,
                         Eigen::MatrixXd& se) {
    mean.resize(n_cp, dim);
    se.resize(n_cp, dim);
    for (Eigen::Index c = 0; c < n_cp; ++c) {
      for (int d = 0; d < dim; ++d) {
        const Eigen::VectorXd col = m.col(c * dim + d);
        const double mu = col.mean();
        mean(c, d) = mu;
        se(c, d) = seeds > 1 ? std::sqrt((col.array() - mu).square().sum() /
                                         (seeds - 1) / seeds)
                             : 0.0;
      }
    }
  };
  mean_and_se(mean_err, result.mean_error, result.mean_error_se);
  mean_and_se(var_err, result.var_error, result.var_error_se);

  for (std::int64_t t : result.checkpoints) {
    ChainConfig at_t = config.chain;
    at_t.iterations = t;
    result.epsilon.push_back(
        budget_report(accounting_scenario(at_t), at_t.delta, at_t.alpha_max)
            .dp.epsilon);
  }

  result.final_mean_abs_diff = final_diff.colwise().mean().transpose();
  // Variance of the pooled post-burn-in samples: within-chain plus the
  // spread of chain means. The within-chain term alone is biased low for
  // short autocorrelated chains.
  auto pooled = [](const Eigen::MatrixXd& var, const Eigen::MatrixXd& mean) {
    const Eigen::RowVectorXd centre = mean.colwise().mean();
    const Eigen::RowVectorXd between =
        (mean.rowwise() - centre).array().square().colwise().mean();
    return Eigen::VectorXd((var.colwise().mean() + between).transpose());
  };
  result.variance_ratio = pooled(private_var, private_mean)
                              .cwiseQuotient(pooled(baseline_var, baseline_mean));
  result.private_acceptance = private_acc / seeds;
  result.baseline_acceptance = baseline_acc / seeds;
  return result;
}

}  // namespace dpbarker
