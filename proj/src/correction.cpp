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

#include "dpbarker/correction.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/crc.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include "json.hpp"

#include "dpbarker/accountant.hpp"
#include "dpbarker/error.hpp"

namespace dpbarker {
namespace {

using nlohmann::json;

constexpr int kFileVersion = 1;
constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct HalfMixture {
  Eigen::ArrayXd logits;
  Eigen::ArrayXd means;
  Eigen::ArrayXd raw_sds;

  Eigen::ArrayXd weights() const {
    Eigen::ArrayXd w = (logits - logits.maxCoeff()).exp();
    return w / w.sum();
  }
  Eigen::ArrayXd sds() const { return raw_sds.unaryExpr(&softplus); }
};

std::vector<MixtureComponent> materialize(const HalfMixture& half) {
  const Eigen::ArrayXd w = half.weights();
  const Eigen::ArrayXd sd = half.sds();
  std::vector<MixtureComponent> out;
  out.reserve(2 * static_cast<std::size_t>(w.size()));
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    out.push_back({0.5 * w[k], half.means[k], sd[k]});
    out.push_back({0.5 * w[k], -half.means[k], sd[k]});
  }
  return out;
}

Eigen::ArrayXd make_grid(int n, double halfwidth) {
  return Eigen::ArrayXd::LinSpaced(n, -halfwidth, halfwidth);
}

Eigen::ArrayXd logistic_pdf_on(const Eigen::ArrayXd& x) {
  return x.unaryExpr(&logistic_pdf);
}

struct FitOutcome {
  HalfMixture params;
  double loss;
};

// Adam on the half-mixture parameters; returns the best iterate seen.
FitOutcome run_adam(double noise_variance, const FitConfig& cfg,
                    std::uint64_t seed) {
  const int k = cfg.half_components;
  const Eigen::ArrayXd x = make_grid(cfg.grid_n, cfg.grid_halfwidth);
  const Eigen::ArrayXd target = logistic_pdf_on(x);

  Rng rng = make_rng(seed, 0x636f7272);
  HalfMixture p{Eigen::ArrayXd::Zero(k), Eigen::ArrayXd::Zero(k),
                Eigen::ArrayXd::Constant(k, std::log(std::expm1(0.5)))};
  const double mean_span = 0.5 * cfg.grid_halfwidth;
  for (int i = 0; i < k; ++i) {
    const double base = k > 1 ? mean_span * i / (k - 1) : 0.0;
    p.means[i] = base + 0.01 * standard_normal(rng);
    p.logits[i] = 0.01 * standard_normal(rng);
  }

  const Eigen::Index n = x.size();
  Eigen::ArrayXXd g_plus(n, k), g_minus(n, k);
  Eigen::ArrayXd m1 = Eigen::ArrayXd::Zero(3 * k);
  Eigen::ArrayXd m2 = Eigen::ArrayXd::Zero(3 * k);
  Eigen::ArrayXd grad(3 * k);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  double beta1_t = 1.0, beta2_t = 1.0;

  FitOutcome best{p, std::numeric_limits<double>::infinity()};

  for (int it = 0; it <= cfg.iterations; ++it) {
    const Eigen::ArrayXd w = p.weights();
    const Eigen::ArrayXd sigma = p.sds();
    const Eigen::ArrayXd s2 = noise_variance + sigma.square();
    const Eigen::ArrayXd s = s2.sqrt();

    Eigen::ArrayXd approx = Eigen::ArrayXd::Zero(n);
    for (int c = 0; c < k; ++c) {
      const double scale = kInvSqrt2Pi / s[c];
      const double inv2s2 = 0.5 / s2[c];
      g_minus.col(c) = scale * (-(x - p.means[c]).square() * inv2s2).exp();
      g_plus.col(c) = scale * (-(x + p.means[c]).square() * inv2s2).exp();
      approx += 0.5 * w[c] * (g_minus.col(c) + g_plus.col(c));
    }
    const Eigen::ArrayXd resid = approx - target;
    const double loss = std::sqrt(resid.square().sum());
    if (!std::isfinite(loss)) return {p, loss};
    if (loss < best.loss) best = {p, loss};
    if (it == cfg.iterations || loss == 0.0) break;

    const Eigen::ArrayXd e = resid / loss;
    Eigen::ArrayXd grad_w(k);
    for (int c = 0; c < k; ++c) {
      const auto u_minus = x - p.means[c];
      const auto u_plus = x + p.means[c];
      const Eigen::ArrayXd gm = g_minus.col(c);
      const Eigen::ArrayXd gp = g_plus.col(c);
      grad_w[c] = 0.5 * (e * (gm + gp)).sum();
      const double half_w = 0.5 * w[c];
      grad[k + c] =
          half_w * (e * (u_minus * gm - u_plus * gp)).sum() / s2[c];
      const double d_s =
          half_w * (e * (gm * (u_minus.square() / (s2[c] * s[c]) - 1.0 / s[c]) +
                         gp * (u_plus.square() / (s2[c] * s[c]) - 1.0 / s[c])))
                       .sum();
      grad[2 * k + c] = d_s * (sigma[c] / s[c]) * sigmoid(p.raw_sds[c]);
    }
    const double mean_grad_w = (w * grad_w).sum();
    grad.head(k) = w * (grad_w - mean_grad_w);

    beta1_t *= kBeta1;
    beta2_t *= kBeta2;
    m1 = kBeta1 * m1 + (1.0 - kBeta1) * grad;
    m2 = kBeta2 * m2 + (1.0 - kBeta2) * grad.square();
    const Eigen::ArrayXd step =
        cfg.step_size * (m1 / (1.0 - beta1_t)) /
        ((m2 / (1.0 - beta2_t)).sqrt() + kEps);
    p.logits -= step.head(k);
    p.means -= step.segment(k, k);
    p.raw_sds -= step.tail(k);
  }
  return best;
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", v);
  return buf;
}

std::string content_checksum(const json& content) {
  boost::crc_32_type crc;
  const std::string bytes = content.dump();
  crc.process_bytes(bytes.data(), bytes.size());
  return hex32(crc.checksum());
}

json model_content(const CorrectionModel& model) {
  json comps = json::array();
  for (const auto& c : model.components()) {
    comps.push_back({{"w", c.weight}, {"mu", c.mean}, {"sigma", c.sd}});
  }
  const FitMeta& m = model.fit_meta();
  return {{"version", kFileVersion},
          {"C", model.noise_variance()},
          {"components", comps},
          {"fit_meta",
           {{"K", m.half_components},
            {"grid_n", m.grid_n},
            {"grid_halfwidth", m.grid_halfwidth},
            {"iterations", m.iterations},
            {"step_size", m.step_size},
            {"final_loss", m.final_loss},
            {"seed", m.seed}}}};
}

}  // namespace

CorrectionModel::CorrectionModel(double noise_variance,
                                 std::vector<MixtureComponent> components,
                                 FitMeta meta)
    : noise_variance_(noise_variance),
      components_(std::move(components)),
      meta_(meta) {
  if (auto why = check(noise_variance_, components_)) {
    throw Error(ErrorCode::kInvalidArgument, *why);
  }
  cumulative_.reserve(components_.size());
  double acc = 0.0;
  for (const auto& c : components_) {
    acc += c.weight;
    cumulative_.push_back(acc);
  }
  cumulative_.back() = std::numeric_limits<double>::infinity();
}

std::optional<std::string> CorrectionModel::check(
    double noise_variance, std::span<const MixtureComponent> components) {
  if (!(noise_variance > 0.0 && noise_variance < kLogisticVariance)) {
    return "C must lie in (0, pi^2/3)";
  }
  if (components.empty()) return "mixture has no components";
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      return "component weights must be positive";
    }
    if (!(c.sd > 0.0) || !std::isfinite(c.sd) || !std::isfinite(c.mean)) {
      return "component sd must be positive and parameters finite";
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) return "weights do not sum to 1";

  std::vector<bool> paired(components.size(), false);
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (paired[i]) continue;
    const auto& a = components[i];
    if (a.mean == 0.0) {
      paired[i] = true;
      continue;
    }
    bool found = false;
    for (std::size_t j = i + 1; j < components.size(); ++j) {
      const auto& b = components[j];
      if (!paired[j] && b.mean == -a.mean && b.weight == a.weight &&
          b.sd == a.sd) {
        paired[i] = paired[j] = true;
        found = true;
        break;
      }
    }
    if (!found) return "mixture is not mirror symmetric";
  }
  return std::nullopt;
}

double CorrectionModel::mean() const {
  double m = 0.0;
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

double CorrectionModel::variance() const {
  double second = 0.0;
  for (const auto& c : components_) {
    second += c.weight * (c.sd * c.sd + c.mean * c.mean);
  }
  const double m = mean();
  return second - m * m;
}

double logistic_cdf(double y) {
  return y >= 0.0 ? 1.0 / (1.0 + std::exp(-y))
                  : std::exp(y) / (1.0 + std::exp(y));
}

double logistic_pdf(double y) {
  const double e = std::exp(-std::abs(y));
  return e / ((1.0 + e) * (1.0 + e));
}

double approx_logistic_pdf(const CorrectionModel& model, double y) {
  double f = 0.0;
  for (const auto& c : model.components()) {
    const double s = std::sqrt(model.noise_variance() + c.sd * c.sd);
    const double z = (y - c.mean) / s;
    f += c.weight * kInvSqrt2Pi * std::exp(-0.5 * z * z) / s;
  }
  return f;
}

double approx_logistic_cdf(const CorrectionModel& model, double y) {
  double cdf = 0.0;
  for (const auto& c : model.components()) {
    const double s = std::sqrt(model.noise_variance() + c.sd * c.sd);
    cdf += c.weight * normal_cdf((y - c.mean) / s);
  }
  return std::clamp(cdf, 0.0, 1.0);
}

double sample_correction(const CorrectionModel& model, Rng& rng) {
  const double u = std::generate_canonical<double, 53>(rng);
  const auto it = std::upper_bound(model.cumulative_.begin(),
                                   model.cumulative_.end(), u);
  const auto& c = model.components_[static_cast<std::size_t>(
      it - model.cumulative_.begin())];
  return c.mean + c.sd * standard_normal(rng);
}

double kolmogorov_distance(const CorrectionModel& model, int points,
                           double halfwidth) {
  if (points < 2 || !(halfwidth > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "bad Kolmogorov grid");
  }
  double sup = 0.0;
  for (int i = 0; i < points; ++i) {
    const double y = -halfwidth + 2.0 * halfwidth * i / (points - 1);
    sup = std::max(sup,
                   std::abs(approx_logistic_cdf(model, y) - logistic_cdf(y)));
  }
  const double tail = std::max(
      {1.0 - logistic_cdf(halfwidth), 1.0 - approx_logistic_cdf(model, halfwidth),
       logistic_cdf(-halfwidth), approx_logistic_cdf(model, -halfwidth)});
  return sup + tail;
}

double correction_loss(const CorrectionModel& model, int grid_n,
                       double grid_halfwidth) {
  const Eigen::ArrayXd x = make_grid(grid_n, grid_halfwidth);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double r = approx_logistic_pdf(model, x[i]) - logistic_pdf(x[i]);
    sum += r * r;
  }
  return std::sqrt(sum);
}

CorrectionModel fit_correction(double noise_variance, const FitConfig& config) {
  if (!(noise_variance > 0.0 && noise_variance < kLogisticVariance)) {
    throw Error(ErrorCode::kInvalidNoiseVariance,
                "C must lie in (0, pi^2/3), got " +
                    std::to_string(noise_variance));
  }
  if (config.half_components < 1 || config.grid_n < 2 ||
      !(config.grid_halfwidth > 0.0) || config.iterations < 0 ||
      !(config.step_size > 0.0) || config.max_attempts < 1) {
    throw Error(ErrorCode::kInvalidArgument, "invalid fit configuration");
  }

  double last_loss = std::numeric_limits<double>::quiet_NaN();
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(attempt);
    FitOutcome out = run_adam(noise_variance, config, seed);
    last_loss = out.loss;
    if (!std::isfinite(out.loss) || out.loss > config.loss_ceiling) continue;

    FitMeta meta{config.half_components, config.grid_n, config.grid_halfwidth,
                 config.iterations,      config.step_size, 0.0, seed};
    CorrectionModel model(noise_variance, materialize(out.params), meta);
    // Recorded loss comes from the materialized components so that the
    // stored model reproduces it exactly.
    meta.final_loss =
        correction_loss(model, config.grid_n, config.grid_halfwidth);
    return CorrectionModel(noise_variance,
                           std::vector<MixtureComponent>(
                               model.components().begin(),
                               model.components().end()),
                           meta);
  }
  throw Error(ErrorCode::kFitDiverged,
              "loss " + std::to_string(last_loss) + " above ceiling " +
                  std::to_string(config.loss_ceiling) + " after " +
                  std::to_string(config.max_attempts) + " attempts");
}

void save_model(const CorrectionModel& model,
                const std::filesystem::path& path) {
  json doc = model_content(model);
  doc["checksum"] = content_checksum(doc);

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    }
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::kIoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError,
                "cannot move model into place: " + ec.message());
  }
}

CorrectionModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());

  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptModelFile,
                path.string() + ": " + e.what());
  }
  try {
    if (doc.at("version").get<int>() != kFileVersion) {
      throw Error(ErrorCode::kCorruptModelFile, "unsupported version");
    }
    const std::string stored = doc.at("checksum").get<std::string>();
    json content = doc;
    content.erase("checksum");
    if (content_checksum(content) != stored) {
      throw Error(ErrorCode::kCorruptModelFile,
                  path.string() + ": checksum mismatch");
    }

    std::vector<MixtureComponent> comps;
    for (const auto& c : doc.at("components")) {
      comps.push_back({c.at("w").get<double>(), c.at("mu").get<double>(),
                       c.at("sigma").get<double>()});
    }
    const json& m = doc.at("fit_meta");
    FitMeta meta{m.at("K").get<int>(),
                 m.at("grid_n").get<int>(),
                 m.at("grid_halfwidth").get<double>(),
                 m.at("iterations").get<int>(),
                 m.at("step_size").get<double>(),
                 m.at("final_loss").get<double>(),
                 m.at("seed").get<std::uint64_t>()};
    const double c = doc.at("C").get<double>();
    if (auto why = CorrectionModel::check(c, comps)) {
      throw Error(ErrorCode::kCorruptModelFile, path.string() + ": " + *why);
    }
    return CorrectionModel(c, std::move(comps), meta);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptModelFile,
                path.string() + ": " + e.what());
  }
}

std::string correction_cache_name(double noise_variance,
                                  const FitConfig& config) {
  std::ostringstream name;
  name.precision(17);
  name << "correction_C" << noise_variance << "_K" << config.half_components
       << "_n" << config.grid_n << "_a" << config.grid_halfwidth << "_it"
       << config.iterations << "_lr" << config.step_size << "_s"
       << config.seed << ".json";
  return name.str();
}

}  // namespace dpbarker
