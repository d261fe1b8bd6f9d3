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

#include "dpbarker/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_set>

#include "dpbarker/error.hpp"

namespace dpbarker {
namespace {

void require_config(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidConfig, what);
}

double proposal_scale(const ChainConfig& config, Eigen::Index i) {
  return config.proposal_sd.size() == 1 ? config.proposal_sd[0]
                                        : config.proposal_sd[i];
}

}  // namespace

double tempered_size_from_beta(std::int64_t dataset_size, double beta) {
  const double n = static_cast<double>(dataset_size);
  if (std::isinf(beta)) return n;
  if (!(beta > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "beta must be positive");
  }
  return n * beta / (beta + n);
}

double ChainConfig::effective_size() const {
  return tempered_size > 0.0 ? tempered_size
                             : static_cast<double>(dataset_size);
}

double ChainConfig::max_clip_bound() const {
  return std::sqrt(static_cast<double>(batch_size)) / effective_size();
}

double ChainConfig::clip_bound() const {
  return clip.value_or(max_clip_bound());
}

void ChainConfig::validate(int dimension) const {
  require_config(dataset_size >= 1, "dataset size must be positive");
  require_config(batch_size >= 1 && batch_size <= dataset_size,
                 "need 0 < b <= N");
  require_config(iterations >= 0, "iteration count is negative");
  require_config(tempered_size >= 0.0 &&
                     tempered_size <= static_cast<double>(dataset_size),
                 "need 0 < N0 <= N");
  require_config(proposal_sd.size() == 1 || proposal_sd.size() == dimension,
                 "proposal_sd needs one entry or one per dimension");
  require_config((proposal_sd.array() > 0.0).all() && proposal_sd.allFinite(),
                 "proposal_sd must be positive and finite");
  if (clip) {
    require_config(*clip > 0.0 && *clip <= max_clip_bound(),
                   "clip must lie in (0, sqrt(b)/N0]");
  }
  if (proposal_radius) {
    require_config(*proposal_radius > 0.0, "proposal radius must be positive");
  }
  require_config(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  require_config(alpha_max >= 2, "alpha_max must be >= 2");

  if (mode == ChainMode::kSubsampled) {
    if (noise_variance != 2.0) {
      throw Error(ErrorCode::kConfigModeMismatch,
                  "the subsampled test runs with C = 2");
    }
  } else {
    if (batch_size != dataset_size) {
      throw Error(ErrorCode::kConfigModeMismatch,
                  "full-data mode needs b = N");
    }
    if (!(noise_variance > 0.0 && noise_variance < kLogisticVariance)) {
      throw Error(ErrorCode::kInvalidNoiseVariance,
                  "C must lie in (0, pi^2/3)");
    }
  }
}

Eigen::VectorXd propose(const ParamRef& theta, const ChainConfig& config,
                        Rng& rng) {
  Eigen::VectorXd out(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double sd = proposal_scale(config, i);
    double step = sd * standard_normal(rng);
    if (config.proposal_radius) {
      while (std::abs(step) > *config.proposal_radius) {
        step = sd * standard_normal(rng);
      }
    }
    out[i] = theta[i] + step;
  }
  return out;
}

ClippedRatio tempered_clipped_ratio(const TargetModel& model,
                                    const DatumRef& x,
                                    const ParamRef& theta_new,
                                    const ParamRef& theta_old,
                                    const ChainConfig& config) {
  const double lp_new = model.log_likelihood(x, theta_new);
  const double lp_old = model.log_likelihood(x, theta_old);
  if (!std::isfinite(lp_new) || !std::isfinite(lp_old)) {
    throw Error(ErrorCode::kNonFiniteLikelihood,
                "log-likelihood is not finite");
  }
  const double clip = config.clip_bound();
  const double r = lp_new - lp_old;
  return {std::clamp(r, -clip, clip), std::abs(r) > clip};
}

BatchStatistic batch_statistic(const TargetModel& model, const Dataset& data,
                               std::span<const std::int64_t> batch,
                               const ParamRef& theta_new,
                               const ParamRef& theta_old,
                               double tempered_size, double clip) {
  if (batch.empty()) {
    throw Error(ErrorCode::kBatchSizeMismatch, "empty batch");
  }
  const double prior_old = model.log_prior(theta_old);
  const double prior_new = model.log_prior(theta_new);
  if (!std::isfinite(prior_old) || std::isnan(prior_new)) {
    throw Error(ErrorCode::kInvalidArgument,
                "current state has zero prior density");
  }

  std::vector<double> ratios(batch.size());
  BatchStatistic stat;
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = data.row(batch[i]);
    const double lp_new = model.log_likelihood(row, theta_new);
    const double lp_old = model.log_likelihood(row, theta_old);
    if (!std::isfinite(lp_new) || !std::isfinite(lp_old)) {
      throw Error(ErrorCode::kNonFiniteLikelihood,
                  "log-likelihood is not finite at datum " +
                      std::to_string(batch[i]));
    }
    double r = lp_new - lp_old;
    if (std::abs(r) > clip) {
      r = std::clamp(r, -clip, clip);
      ++stat.clipped_count;
    }
    ratios[i] = r;
    sum += r;
  }
  const double b = static_cast<double>(batch.size());
  // Mean through deviations from the first ratio, so a constant batch has
  // exactly zero variance.
  double dev = 0.0;
  for (double r : ratios) dev += r - ratios[0];
  const double mean = ratios[0] + dev / b;
  double ss = 0.0;
  for (double r : ratios) ss += (r - mean) * (r - mean);

  stat.delta = tempered_size / b * sum + (prior_new - prior_old);
  stat.sample_var = tempered_size * tempered_size / b * (ss / b);
  return stat;
}

BatchStatistic delta_star(const TargetModel& model, const Dataset& data,
                          std::span<const std::int64_t> batch,
                          const ParamRef& theta_new, const ParamRef& theta_old,
                          const ChainConfig& config) {
  if (static_cast<std::int64_t>(batch.size()) != config.batch_size) {
    throw Error(ErrorCode::kBatchSizeMismatch,
                "batch has " + std::to_string(batch.size()) +
                    " items, expected " + std::to_string(config.batch_size));
  }
  return batch_statistic(model, data, batch, theta_new, theta_old,
                         config.effective_size(), config.clip_bound());
}

std::vector<std::int64_t> draw_batch(std::int64_t dataset_size,
                                     std::int64_t batch_size, Rng& rng) {
  if (batch_size < 1 || batch_size > dataset_size) {
    throw Error(ErrorCode::kBatchSizeMismatch, "need 0 < b <= N");
  }
  std::vector<std::int64_t> out(static_cast<std::size_t>(batch_size));
  if (batch_size == dataset_size) {
    std::iota(out.begin(), out.end(), std::int64_t{0});
    return out;
  }
  // Floyd's algorithm.
  std::unordered_set<std::int64_t> taken;
  taken.reserve(static_cast<std::size_t>(2 * batch_size));
  std::size_t k = 0;
  for (std::int64_t j = dataset_size - batch_size; j < dataset_size; ++j) {
    const std::int64_t t =
        std::uniform_int_distribution<std::int64_t>(0, j)(rng);
    const std::int64_t pick = taken.insert(t).second ? t : j;
    if (pick == j) taken.insert(j);
    out[k++] = pick;
  }
  return out;
}

bool barker_accept_full(double delta, double noise_variance,
                        const CorrectionModel& correction, Rng& rng) {
  if (correction.noise_variance() != noise_variance) {
    throw Error(ErrorCode::kCorrectionMismatch,
                "correction fitted for C=" +
                    std::to_string(correction.noise_variance()) +
                    ", test uses C=" + std::to_string(noise_variance));
  }
  const double normal = std::sqrt(noise_variance) * standard_normal(rng);
  const double cor = sample_correction(correction, rng);
  return delta + normal + cor > 0.0;
}

bool barker_accept_subsampled(double delta_star, double sample_var,
                              const CorrectionModel& correction, Rng& rng) {
  const double c = correction.noise_variance();
  if (!(sample_var < c) || sample_var < 0.0) {
    throw Error(ErrorCode::kVarianceGuardViolated,
                "s^2=" + std::to_string(sample_var) + " is not below C=" +
                    std::to_string(c));
  }
  const double normal = std::sqrt(c - sample_var) * standard_normal(rng);
  const double cor = sample_correction(correction, rng);
  return delta_star + normal + cor > 0.0;
}

AcceptanceRecord step(ChainState& state, const ChainConfig& config,
                      const TargetModel& model, const Dataset& data,
                      const CorrectionModel& correction) {
  const Eigen::VectorXd proposal = propose(state.theta, config, state.rng);
  const std::vector<std::int64_t> batch =
      draw_batch(data.rows(), config.batch_size, state.rng);
  const BatchStatistic stat =
      delta_star(model, data, batch, proposal, state.theta, config);

  AcceptanceRecord rec;
  rec.iteration = state.iteration + 1;
  rec.delta_star = stat.delta;
  rec.clipped_count = stat.clipped_count;
  if (config.mode == ChainMode::kSubsampled) {
    rec.sample_var_term = stat.sample_var;
    rec.noise_var = correction.noise_variance() - stat.sample_var;
    rec.accepted = barker_accept_subsampled(stat.delta, stat.sample_var,
                                            correction, state.rng);
  } else {
    rec.sample_var_term = 0.0;
    rec.noise_var = config.noise_variance;
    rec.accepted = barker_accept_full(stat.delta, config.noise_variance,
                                      correction, state.rng);
  }
  if (rec.accepted) state.theta = proposal;
  ++state.iteration;
  return rec;
}

double ChainResult::acceptance_rate() const {
  if (records.empty()) return 0.0;
  const auto n = std::count_if(records.begin(), records.end(),
                               [](const auto& r) { return r.accepted; });
  return static_cast<double>(n) / static_cast<double>(records.size());
}

AccountingScenario accounting_scenario(const ChainConfig& config) {
  AccountingScenario s;
  s.dataset_size = config.dataset_size;
  s.iterations = config.iterations;
  s.noise_variance = config.noise_variance;
  if (config.mode == ChainMode::kSubsampled) {
    s.mode = AccountingMode::kSubsampled;
    s.batch_size = config.batch_size;
  } else {
    // Each example moves Delta by at most (N0 / N) * clip.
    s.mode = AccountingMode::kFullData;
    s.batch_size = config.dataset_size;
    s.ratio_bound = config.effective_size() /
                    static_cast<double>(config.dataset_size) *
                    config.clip_bound();
  }
  return s;
}

ChainResult run_chain(const ChainConfig& config, const TargetModel& model,
                      const Dataset& data, const CorrectionModel& correction,
                      const Eigen::VectorXd& init,
                      const ProgressFn& progress) {
  config.validate(model.dimension());
  if (data.rows() != config.dataset_size) {
    throw Error(ErrorCode::kInvalidConfig,
                "dataset has " + std::to_string(data.rows()) +
                    " rows, config says N=" +
                    std::to_string(config.dataset_size));
  }
  if (init.size() != model.dimension() || !init.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument,
                "initial state must be finite with model dimension");
  }
  if (correction.noise_variance() != config.noise_variance) {
    throw Error(ErrorCode::kCorrectionMismatch,
                "correction C differs from the chain's C");
  }

  ChainResult result;
  if (config.iterations > 0) {
    // Accounting first so an unaccountable config fails before any work.
    result.privacy =
        budget_report(accounting_scenario(config), config.delta,
                      config.alpha_max);
  }

  ChainState state{init, 0, make_rng(config.seed)};
  result.samples.resize(config.iterations, model.dimension());
  result.records.reserve(static_cast<std::size_t>(config.iterations));
  for (std::int64_t t = 0; t < config.iterations; ++t) {
    result.records.push_back(step(state, config, model, data, correction));
    result.samples.row(t) = state.theta.transpose();
    if (progress && (t + 1) % kProgressInterval == 0) progress(t + 1);
  }
  return result;
}

}  // namespace dpbarker
