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

#include "dpbarker/models.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "dpbarker/error.hpp"

namespace dpbarker {
namespace {

constexpr double kLog2Pi = 1.837877066409345483560659472811;

double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * d * d / var;
}

void check_baseline(const TargetModel& model, const Dataset& data,
                    const BaselineConfig& config, const Eigen::VectorXd& init) {
  if (data.rows() < 1) {
    throw Error(ErrorCode::kInvalidConfig, "dataset is empty");
  }
  if (config.iterations < 0 || config.batch_size < 0 ||
      config.batch_size > data.rows()) {
    throw Error(ErrorCode::kInvalidConfig, "bad iteration count or batch size");
  }
  if (config.tempered_size < 0.0 ||
      config.tempered_size > static_cast<double>(data.rows())) {
    throw Error(ErrorCode::kInvalidConfig, "need 0 < N0 <= N");
  }
  if (!(config.proposal_sd.size() == 1 ||
        config.proposal_sd.size() == model.dimension()) ||
      !(config.proposal_sd.array() > 0.0).all()) {
    throw Error(ErrorCode::kInvalidConfig, "bad proposal_sd");
  }
  if (init.size() != model.dimension() || !init.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "bad initial state");
  }
}

Eigen::VectorXd random_walk(const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& sd, Rng& rng) {
  Eigen::VectorXd out(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    out[i] = theta[i] + (sd.size() == 1 ? sd[0] : sd[i]) * standard_normal(rng);
  }
  return out;
}

double n0_of(const BaselineConfig& config, const Dataset& data) {
  return config.tempered_size > 0.0 ? config.tempered_size
                                    : static_cast<double>(data.rows());
}

constexpr double kNoClip = std::numeric_limits<double>::infinity();

// Full-data Delta with the current state's log-likelihoods cached, so each
// iteration evaluates the likelihood once per datum. Summation order matches
// batch_statistic over 0..N-1.
class FullDataDelta {
 public:
  FullDataDelta(const TargetModel& model, const Dataset& data, double n0,
                const Eigen::VectorXd& theta)
      : model_(model), data_(data), scale_(n0 / static_cast<double>(data.rows())),
        current_(data.rows()), proposed_(data.rows()) {
    fill(theta, current_);
  }

  double operator()(const Eigen::VectorXd& proposal,
                    const Eigen::VectorXd& theta) {
    const double prior_old = model_.log_prior(theta);
    const double prior_new = model_.log_prior(proposal);
    if (!std::isfinite(prior_old) || std::isnan(prior_new)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "current state has zero prior density");
    }
    fill(proposal, proposed_);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < data_.rows(); ++i) {
      sum += proposed_[i] - current_[i];
    }
    return scale_ * sum + (prior_new - prior_old);
  }

  void accept() { current_.swap(proposed_); }

 private:
  void fill(const Eigen::VectorXd& theta, Eigen::VectorXd& out) const {
    for (Eigen::Index i = 0; i < data_.rows(); ++i) {
      out[i] = model_.log_likelihood(data_.row(i), theta);
      if (!std::isfinite(out[i])) {
        throw Error(ErrorCode::kNonFiniteLikelihood,
                    "log-likelihood is not finite at datum " +
                        std::to_string(i));
      }
    }
  }

  const TargetModel& model_;
  const Dataset& data_;
  double scale_;
  Eigen::VectorXd current_, proposed_;
};

}  // namespace

double gmm2d_log_likelihood(double x, double theta1, double theta2) {
  const double a = log_normal_pdf(x, theta1, Gmm2dModel::kSigmaXSq);
  const double b = log_normal_pdf(x, theta1 + theta2, Gmm2dModel::kSigmaXSq);
  const double m = std::max(a, b);
  return std::log(0.5) + m + std::log(std::exp(a - m) + std::exp(b - m));
}

double gmm2d_log_prior(double theta1, double theta2) {
  return log_normal_pdf(theta1, 0.0, Gmm2dModel::kSigma1Sq) +
         log_normal_pdf(theta2, 0.0, Gmm2dModel::kSigma2Sq);
}

double Gmm2dModel::log_likelihood(const DatumRef& x,
                                  const ParamRef& theta) const {
  return gmm2d_log_likelihood(x[0], theta[0], theta[1]);
}

double Gmm2dModel::log_prior(const ParamRef& theta) const {
  return gmm2d_log_prior(theta[0], theta[1]);
}

Eigen::VectorXd Gmm2dModel::sample_prior(Rng& rng) const {
  Eigen::VectorXd theta(2);
  theta[0] = std::sqrt(kSigma1Sq) * standard_normal(rng);
  theta[1] = std::sqrt(kSigma2Sq) * standard_normal(rng);
  return theta;
}

Dataset synthesize(const SyntheticDataSpec& spec) {
  if (spec.size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "dataset size must be positive");
  }
  Rng rng = make_rng(spec.seed, 0x64617461);
  Dataset data(spec.size, 1);
  const double sd = std::sqrt(Gmm2dModel::kSigmaXSq);
  for (std::int64_t i = 0; i < spec.size; ++i) {
    const bool second = std::generate_canonical<double, 53>(rng) < 0.5;
    const double center =
        spec.theta_true[0] + (second ? spec.theta_true[1] : 0.0);
    data(i, 0) = center + sd * standard_normal(rng);
  }
  return data;
}

BaselineResult mh_exact_chain(const TargetModel& model, const Dataset& data,
                              const BaselineConfig& config,
                              const Eigen::VectorXd& init,
                              const ProgressFn& progress) {
  check_baseline(model, data, config, init);
  Rng rng = make_rng(config.seed);
  FullDataDelta delta(model, data, n0_of(config, data), init);

  BaselineResult out;
  out.samples.resize(config.iterations, model.dimension());
  Eigen::VectorXd theta = init;
  for (std::int64_t t = 0; t < config.iterations; ++t) {
    const Eigen::VectorXd proposal = random_walk(theta, config.proposal_sd, rng);
    const double d = delta(proposal, theta);
    const double log_u = std::log(uniform_open(rng));
    if (log_u < d) {
      theta = proposal;
      delta.accept();
      ++out.accepted;
    }
    out.samples.row(t) = theta.transpose();
    if (progress && (t + 1) % kProgressInterval == 0) progress(t + 1);
  }
  return out;
}

BaselineResult barker_nonprivate_chain(const TargetModel& model,
                                       const Dataset& data,
                                       const BaselineConfig& config,
                                       const Eigen::VectorXd& init,
                                       const CorrectionModel* correction,
                                       const ProgressFn& progress) {
  check_baseline(model, data, config, init);
  const std::int64_t n = data.rows();
  const bool minibatch = config.batch_size > 0 && config.batch_size < n;
  if (minibatch && correction == nullptr) {
    throw Error(ErrorCode::kInvalidArgument,
                "the minibatch Barker test needs a correction model");
  }
  const double n0 = n0_of(config, data);

  Rng rng = make_rng(config.seed);
  std::optional<FullDataDelta> full;
  if (!minibatch) full.emplace(model, data, n0, init);

  BaselineResult out;
  out.samples.resize(config.iterations, model.dimension());
  Eigen::VectorXd theta = init;
  for (std::int64_t t = 0; t < config.iterations; ++t) {
    const Eigen::VectorXd proposal = random_walk(theta, config.proposal_sd, rng);
    bool accept;
    if (minibatch) {
      const std::vector<std::int64_t> batch =
          draw_batch(n, config.batch_size, rng);
      const BatchStatistic stat =
          batch_statistic(model, data, batch, proposal, theta, n0, kNoClip);
      accept = barker_accept_subsampled(stat.delta, stat.sample_var,
                                        *correction, rng);
    } else {
      accept = (*full)(proposal, theta) + standard_logistic(rng) > 0.0;
    }
    if (accept) {
      theta = proposal;
      if (full) full->accept();
      ++out.accepted;
    }
    out.samples.row(t) = theta.transpose();
    if (progress && (t + 1) % kProgressInterval == 0) progress(t + 1);
  }
  return out;
}

}  // namespace dpbarker
