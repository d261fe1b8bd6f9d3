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

#include "cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"

#include "dpbarker/accountant.hpp"
#include "dpbarker/correction.hpp"
#include "dpbarker/diagnostics.hpp"
#include "dpbarker/error.hpp"
#include "dpbarker/io.hpp"
#include "dpbarker/models.hpp"
#include "dpbarker/sampler.hpp"

namespace dpbarker::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void bad_config(const std::string& message) {
  throw Error(ErrorCode::kInvalidConfig, message);
}

// ---------------------------------------------------------------------------
// Resolved configuration access. Every command reads its settings from one
// JSON object so that the manifest snapshot alone can replay it.

const json& field(const json& cfg, const std::string& key) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) bad_config("missing config key '" + key + "'");
  return *it;
}

bool is_null(const json& cfg, const std::string& key) {
  return field(cfg, key).is_null();
}

double number(const json& cfg, const std::string& key) {
  const json& v = field(cfg, key);
  if (!v.is_number()) bad_config("'" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad_config("'" + key + "' must be finite");
  return x;
}

std::optional<double> optional_number(const json& cfg, const std::string& key) {
  if (is_null(cfg, key)) return std::nullopt;
  return number(cfg, key);
}

std::int64_t count(const json& cfg, const std::string& key) {
  const json& v = field(cfg, key);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  const double x = number(cfg, key);
  if (x != std::floor(x) || std::fabs(x) > 9.0e15) {
    bad_config("'" + key + "' must be an integer");
  }
  return static_cast<std::int64_t>(x);
}

std::uint64_t seed_value(const json& cfg, const std::string& key) {
  const json& v = field(cfg, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() &&
                                   v.get<std::int64_t>() >= 0)) {
    bad_config("'" + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string text(const json& cfg, const std::string& key) {
  const json& v = field(cfg, key);
  if (!v.is_string()) bad_config("'" + key + "' must be a string");
  return v.get<std::string>();
}

bool boolean(const json& cfg, const std::string& key) {
  const json& v = field(cfg, key);
  if (!v.is_boolean()) bad_config("'" + key + "' must be true or false");
  return v.get<bool>();
}

std::vector<double> numbers(const json& cfg, const std::string& key) {
  const json& v = field(cfg, key);
  if (!v.is_array()) bad_config("'" + key + "' must be a list of numbers");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) bad_config("'" + key + "' must be a list of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

Eigen::VectorXd vector_of(const json& cfg, const std::string& key) {
  const std::vector<double> v = numbers(cfg, key);
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

// ---------------------------------------------------------------------------
// Flag parsing. Flags are collected as raw strings and converted after CLI11
// has finished, so conversion errors surface as InvalidConfig.

enum class Kind { kNumber, kCount, kSeed, kText, kNumbers, kInit, kSpent,
                  kSwitchOff };

struct OptionSpec {
  std::string flag;
  std::string key;
  Kind kind;
  std::string help;
};

double parse_number(std::string_view s, const std::string& flag) {
  double x = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(x)) {
    bad_config(flag + ": '" + std::string(s) + "' is not a finite number");
  }
  return x;
}

std::vector<double> parse_numbers(std::string_view s, const std::string& flag) {
  std::vector<double> out;
  while (true) {
    const std::size_t comma = s.find(',');
    out.push_back(parse_number(s.substr(0, comma), flag));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

json convert(const OptionSpec& spec, const std::string& raw) {
  switch (spec.kind) {
    case Kind::kNumber:
      return parse_number(raw, spec.flag);
    case Kind::kCount: {
      const double x = parse_number(raw, spec.flag);
      if (x != std::floor(x) || std::fabs(x) > 9.0e15) {
        bad_config(spec.flag + ": '" + raw + "' is not an integer");
      }
      return static_cast<std::int64_t>(x);
    }
    case Kind::kSeed: {
      std::uint64_t v = 0;
      const auto [ptr, ec] =
          std::from_chars(raw.data(), raw.data() + raw.size(), v);
      if (ec != std::errc() || ptr != raw.data() + raw.size()) {
        bad_config(spec.flag + ": '" + raw + "' is not a seed");
      }
      return v;
    }
    case Kind::kText:
      return raw;
    case Kind::kNumbers:
      return parse_numbers(raw, spec.flag);
    case Kind::kInit:
      if (raw == "prior") return raw;
      return parse_numbers(raw, spec.flag);
    case Kind::kSpent: {
      const std::vector<double> v = parse_numbers(raw, spec.flag);
      if (v.size() != 1 && v.size() != 2) {
        bad_config(spec.flag + " expects 'epsilon[,delta]'");
      }
      return json{{"epsilon", v[0]}, {"delta", v.size() == 2 ? v[1] : 1e-6}};
    }
    case Kind::kSwitchOff:
      return false;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Output staging: files are written into a hidden sibling directory and moved
// into place only after the command has finished.

class Staging {
 public:
  explicit Staging(fs::path out_dir) : out_dir_(std::move(out_dir)) {
    if (out_dir_.filename().empty()) out_dir_ = out_dir_.parent_path();
    const fs::path parent =
        out_dir_.has_parent_path() ? out_dir_.parent_path() : fs::path(".");
    std::error_code ec;
    fs::create_directories(parent, ec);
    static std::atomic<int> counter{0};
    dir_ = parent / ("." + out_dir_.filename().string() + ".staging-" +
                     std::to_string(::getpid()) + "-" +
                     std::to_string(counter++));
    fs::remove_all(dir_, ec);
    if (!fs::create_directories(dir_, ec) || ec) {
      throw Error(ErrorCode::kIoError, "cannot create " + dir_.string());
    }
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;
  ~Staging() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  void write(const std::string& name, const std::string& content) {
    write_text_atomic(dir_ / name, content);
    names_.push_back(name);
  }

  void commit() {
    std::error_code ec;
    if (!fs::exists(out_dir_)) {
      fs::rename(dir_, out_dir_, ec);
      if (!ec) return;
      ec.clear();
      fs::create_directories(out_dir_, ec);
    }
    for (const std::string& name : names_) {
      fs::rename(dir_ / name, out_dir_ / name, ec);
      if (ec) {
        throw Error(ErrorCode::kIoError, "cannot move " + name + " into " +
                                             out_dir_.string() + ": " +
                                             ec.message());
      }
    }
  }

  const fs::path& out_dir() const { return out_dir_; }

 private:
  fs::path out_dir_;
  fs::path dir_;
  std::vector<std::string> names_;
};

// ---------------------------------------------------------------------------

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::mutex log_mutex;

  void log(const std::string& line) {
    std::lock_guard<std::mutex> lock(log_mutex);
    err << line << '\n' << std::flush;
  }
};

// What a command produced, in write order.
struct Execution {
  std::vector<std::pair<std::string, std::string>> files;
  json seeds = json::object();
  json inputs = json::object();

  void add(std::string name, std::string content) {
    files.emplace_back(std::move(name), std::move(content));
  }
};

using CommandFn = std::function<void(const json&, Execution&, Context&)>;

struct Command {
  std::string name;  // "run", "diagnose fig1c", ...
  std::string description;
  json defaults;
  std::vector<OptionSpec> options;
  CommandFn execute;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json record_input(const fs::path& path) {
  return {{"path", fs::absolute(path).lexically_normal().string()},
          {"crc32", crc32_hex(read_text(path))}};
}

// Either the CSV at `data` or a synthetic gmm2d set of `n_desk` points.
Dataset load_data(const json& cfg, Execution& ex) {
  if (!is_null(cfg, "data")) {
    const fs::path path = text(cfg, "data");
    ex.inputs["data"] = record_input(path);
    return read_dataset_csv(path);
  }
  SyntheticDataSpec spec;
  spec.size = count(cfg, "n_desk");
  spec.seed = seed_value(cfg, "data_seed");
  const Eigen::VectorXd truth = vector_of(cfg, "theta_true");
  if (truth.size() != 2) bad_config("'theta_true' needs two entries");
  spec.theta_true = truth;
  ex.seeds["data"] = spec.seed;
  return synthesize(spec);
}

std::optional<fs::path> cache_dir() {
  if (const char* d = std::getenv("DPB_CACHE_DIR"); d && *d) return fs::path(d);
  if (const char* d = std::getenv("XDG_CACHE_HOME"); d && *d) {
    return fs::path(d) / "dpbarker";
  }
  if (const char* d = std::getenv("HOME"); d && *d) {
    return fs::path(d) / ".cache" / "dpbarker";
  }
  return std::nullopt;
}

FitConfig fit_config_from(const json& cfg) {
  FitConfig fc;
  fc.half_components = static_cast<int>(count(cfg, "K"));
  fc.grid_n = static_cast<int>(count(cfg, "grid_n"));
  fc.grid_halfwidth = number(cfg, "grid_halfwidth");
  fc.iterations = static_cast<int>(count(cfg, "iterations"));
  fc.step_size = number(cfg, "step_size");
  fc.seed = seed_value(cfg, "seed");
  fc.loss_ceiling = number(cfg, "loss_ceiling");
  fc.max_attempts = static_cast<int>(count(cfg, "max_attempts"));
  return fc;
}

struct CachedFit {
  CorrectionModel model;
  std::string bytes;  // model file content
  bool cache_hit = false;
};

// Looks the fit up in the cache and fits (and stores) it on a miss.
CachedFit fit_cached(double c, const FitConfig& fc, bool use_cache,
                     Context& ctx) {
  if (!(c > 0.0 && c < kLogisticVariance)) {
    throw Error(ErrorCode::kInvalidNoiseVariance,
                "C must lie in (0, pi^2/3), got " + format_double(c));
  }
  const std::optional<fs::path> dir = use_cache ? cache_dir() : std::nullopt;
  const std::string name = correction_cache_name(c, fc);
  if (dir && fs::exists(*dir / name)) {
    try {
      CorrectionModel model = load_model(*dir / name);
      return {std::move(model), read_text(*dir / name), true};
    } catch (const Error& e) {
      ctx.log("cache entry " + name + " unusable, refitting: " + e.what());
    }
  }
  ctx.log("fitting correction for C=" + format_double(c) + " (K=" +
          std::to_string(fc.half_components) + ", " +
          std::to_string(fc.iterations) + " iterations)");
  CorrectionModel model = fit_correction(c, fc);
  const fs::path tmp = fs::temp_directory_path() /
                       ("dpbarker-fit-" + std::to_string(::getpid()) + "-" +
                        name);
  save_model(model, tmp);
  std::string bytes = read_text(tmp);
  std::error_code ec;
  fs::remove(tmp, ec);
  if (dir) {
    fs::create_directories(*dir, ec);
    try {
      write_text_atomic(*dir / name, bytes);
    } catch (const Error& e) {
      ctx.log(std::string("cannot store fit in cache: ") + e.what());
    }
  }
  return {std::move(model), std::move(bytes), false};
}

// The correction named by `correction`, or the default fit for C from the
// cache.
CorrectionModel load_correction(const json& cfg, double c, Execution& ex,
                                Context& ctx) {
  if (!is_null(cfg, "correction")) {
    const fs::path path = text(cfg, "correction");
    ex.inputs["correction"] = record_input(path);
    return load_model(path);
  }
  FitConfig fc;
  CachedFit fit = fit_cached(c, fc, true, ctx);
  ex.inputs["correction"] = {{"cache", correction_cache_name(c, fc)},
                             {"crc32", crc32_hex(fit.bytes)}};
  return std::move(fit.model);
}

// Seed of chain k: the configured seed for k = 0, then an independent
// seed_seq-derived value per further chain.
std::uint64_t chain_seed(std::uint64_t seed, int k) {
  if (k == 0) return seed;
  Rng rng = make_rng(seed, static_cast<std::uint64_t>(k));
  return rng();
}

Eigen::VectorXd initial_state(const json& cfg, const TargetModel& model,
                              std::uint64_t seed) {
  const json& v = field(cfg, "init");
  if (v.is_string() && v.get<std::string>() == "prior") {
    Rng rng = make_rng(seed, 0x696e6974);
    return model.sample_prior(rng);
  }
  const Eigen::VectorXd init = vector_of(cfg, "init");
  if (init.size() != model.dimension()) {
    bad_config("'init' needs " + std::to_string(model.dimension()) +
               " entries");
  }
  return init;
}

double tempered_size(const json& cfg, std::int64_t n) {
  if (const auto beta = optional_number(cfg, "beta")) {
    return tempered_size_from_beta(n, *beta);
  }
  return number(cfg, "N0");
}

std::optional<DpGuarantee> spent(const json& cfg) {
  const json& v = field(cfg, "init_epsilon_spent");
  if (v.is_null()) return std::nullopt;
  DpGuarantee g;
  g.epsilon = number(v, "epsilon");
  g.delta = number(v, "delta");
  if (g.epsilon < 0 || g.delta < 0 || g.delta >= 1) {
    bad_config("init_epsilon_spent needs epsilon >= 0 and delta in [0, 1)");
  }
  return g;
}

// Budget JSON with an optional external cost added by basic composition.
json privacy_json(const BudgetReport& report, const json& cfg) {
  json j = {{"budget", to_json(report)}};
  DpGuarantee total = report.dp;
  if (const auto s = spent(cfg)) {
    j["init_epsilon_spent"] = to_json(*s);
    total.epsilon += s->epsilon;
    total.delta += s->delta;
  } else {
    j["init_epsilon_spent"] = nullptr;
  }
  j["total"] = {{"epsilon", total.epsilon}, {"delta", total.delta}};
  return j;
}

// ---------------------------------------------------------------------------
// Commands.

const json kFitDefaults = {
    {"C", 2.0},          {"K", 50},          {"grid_n", 1000},
    {"grid_halfwidth", 10.0}, {"iterations", 20000}, {"step_size", 0.01},
    {"seed", 0},         {"loss_ceiling", 1.0}, {"max_attempts", 3},
    {"cache", true}};

std::vector<OptionSpec> fit_options() {
  return {{"--c", "C", Kind::kNumber, "noise variance C of the split"},
          {"--k", "K", Kind::kCount, "mixture components before mirroring"},
          {"--grid-n", "grid_n", Kind::kCount, "loss grid points"},
          {"--grid-halfwidth", "grid_halfwidth", Kind::kNumber,
           "loss grid covers [-a, a]"},
          {"--iterations", "iterations", Kind::kCount, "Adam iterations"},
          {"--step-size", "step_size", Kind::kNumber, "Adam step size"},
          {"--seed", "seed", Kind::kSeed, "initialization seed"},
          {"--loss-ceiling", "loss_ceiling", Kind::kNumber,
           "refit above this loss"},
          {"--max-attempts", "max_attempts", Kind::kCount, "fit attempts"},
          {"--no-cache", "cache", Kind::kSwitchOff,
           "ignore DPB_CACHE_DIR lookups"}};
}

void cmd_fit_correction(const json& cfg, Execution& ex, Context& ctx) {
  const double c = number(cfg, "C");
  const FitConfig fc = fit_config_from(cfg);
  ex.seeds["fit"] = fc.seed;
  const CachedFit fit = fit_cached(c, fc, boolean(cfg, "cache"), ctx);
  const double distance = kolmogorov_distance(fit.model);
  const json report = {{"C", c},
                       {"K", fc.half_components},
                       {"final_loss", fit.model.fit_meta().final_loss},
                       {"kolmogorov_distance", distance},
                       {"variance", fit.model.variance()},
                       {"cache_name", correction_cache_name(c, fc)}};
  ex.add("correction.json", fit.bytes);
  ex.add("fit_report.json", dump(report));
  ctx.out << (fit.cache_hit ? "cache hit: " : "fitted: ")
          << correction_cache_name(c, fc) << "\n"
          << "kolmogorov_distance " << format_double(distance) << "\n";
}

// "t:1000:100000[:points]" (log-spaced) or "q:0.001,0.01,0.1".
std::pair<char, std::vector<double>> parse_sweep(const std::string& spec) {
  if (spec.size() < 3 || spec[1] != ':' || (spec[0] != 't' && spec[0] != 'q')) {
    bad_config("sweep must look like t:START:STOP[:POINTS] or q:V1,V2,...");
  }
  const std::string body = spec.substr(2);
  if (body.find(':') == std::string::npos) {
    return {spec[0], parse_numbers(body, "--sweep")};
  }
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t colon = body.find(':', start);
    parts.push_back(body.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() < 2 || parts.size() > 3) bad_config("bad sweep range");
  const double lo = parse_number(parts[0], "--sweep");
  const double hi = parse_number(parts[1], "--sweep");
  const int points =
      parts.size() == 3 ? static_cast<int>(parse_number(parts[2], "--sweep"))
                        : 10;
  if (!(lo > 0) || !(hi >= lo) || points < 1) bad_config("bad sweep range");
  std::vector<double> values;
  for (int i = 0; i < points; ++i) {
    const double f = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    values.push_back(lo * std::pow(hi / lo, f));
  }
  values.back() = hi;
  return {spec[0], values};
}

const json kAccountDefaults = {
    {"mode", "subsampled"}, {"N", 100000},  {"b", 1000},
    {"T", 5000},            {"C", 2.0},     {"B", nullptr},
    {"delta", 1e-6},        {"alpha_max", 64}, {"sweep", nullptr},
    {"init_epsilon_spent", nullptr}};

std::vector<OptionSpec> account_options() {
  return {{"--mode", "mode", Kind::kText, "subsampled | full-data"},
          {"--n", "N", Kind::kCount, "dataset size"},
          {"--b", "b", Kind::kCount, "batch size"},
          {"--t", "T", Kind::kCount, "iterations"},
          {"--c", "C", Kind::kNumber, "noise variance (full-data mode)"},
          {"--ratio-bound", "B", Kind::kNumber,
           "per-example bound on Delta (full-data mode)"},
          {"--delta", "delta", Kind::kNumber, "target delta"},
          {"--alpha-max", "alpha_max", Kind::kCount, "largest Renyi order"},
          {"--sweep", "sweep", Kind::kText,
           "t:START:STOP[:POINTS] or q:START:STOP[:POINTS], or a comma list"},
          {"--init-epsilon-spent", "init_epsilon_spent", Kind::kSpent,
           "external cost 'epsilon[,delta]' added to the total; delta defaults to 1e-6"}};
}

void cmd_account(const json& cfg, Execution& ex, Context& ctx) {
  AccountingScenario s;
  const std::string mode = text(cfg, "mode");
  if (mode == "subsampled") {
    s.mode = AccountingMode::kSubsampled;
  } else if (mode == "full-data") {
    s.mode = AccountingMode::kFullData;
  } else {
    bad_config("mode must be subsampled or full-data");
  }
  s.dataset_size = count(cfg, "N");
  s.batch_size = s.mode == AccountingMode::kFullData ? s.dataset_size
                                                     : count(cfg, "b");
  s.iterations = count(cfg, "T");
  s.noise_variance = number(cfg, "C");
  if (s.mode == AccountingMode::kFullData) {
    const auto bound = optional_number(cfg, "B");
    if (!bound) bad_config("full-data accounting needs --ratio-bound");
    s.ratio_bound = *bound;
  }
  const double delta = number(cfg, "delta");
  const int alpha_max = static_cast<int>(count(cfg, "alpha_max"));
  const BudgetReport report = budget_report(s, delta, alpha_max);
  ex.add("report.json", dump(privacy_json(report, cfg)));
  ctx.out << "epsilon " << format_double(report.dp.epsilon) << " delta "
          << format_double(report.dp.delta) << " alpha* "
          << report.dp.alpha_star << "\n";

  if (!is_null(cfg, "sweep")) {
    const auto [axis, values] = parse_sweep(text(cfg, "sweep"));
    std::vector<SweepRow> rows;
    if (axis == 't') {
      std::vector<std::int64_t> ts;
      for (double v : values) {
        const auto t = static_cast<std::int64_t>(std::llround(v));
        if (ts.empty() || ts.back() != t) ts.push_back(t);
      }
      rows = sweep_iterations(s, ts, delta, alpha_max);
    } else {
      rows = sweep_sampling_ratio(s, values, delta, alpha_max);
    }
    ex.add("sweep.csv", render_sweep_csv(rows));
  }
}

const json kRunDefaults = {
    {"mode", "dp-subsampled"},
    {"model", "gmm2d"},
    {"data", nullptr},
    {"n_desk", 100000},
    {"data_seed", 0},
    {"theta_true", {0.0, 1.0}},
    {"correction", nullptr},
    {"C", 2.0},
    {"b", nullptr},
    {"N0", 100.0},
    {"beta", nullptr},
    {"T", 5000},
    {"proposal_sd", {0.01}},
    {"clip", nullptr},
    {"proposal_radius", nullptr},
    {"seed", 0},
    {"delta", 1e-6},
    {"alpha_max", 64},
    {"init", "prior"},
    {"chains", 1},
    {"init_epsilon_spent", nullptr}};

std::vector<OptionSpec> data_options() {
  return {{"--data", "data", Kind::kText, "dataset CSV, one datum per row"},
          {"--n-desk", "n_desk", Kind::kCount,
           "synthesize this many gmm2d points when --data is absent"},
          {"--data-seed", "data_seed", Kind::kSeed, "seed of the synthetic set"},
          {"--theta-true", "theta_true", Kind::kNumbers,
           "parameters of the synthetic set"}};
}

std::vector<OptionSpec> run_options() {
  std::vector<OptionSpec> o = data_options();
  const std::vector<OptionSpec> more = {
      {"--mode", "mode", Kind::kText, "mh | barker | dp-full | dp-subsampled"},
      {"--correction", "correction", Kind::kText,
       "correction model file; default is the cached fit for C"},
      {"--c", "C", Kind::kNumber, "noise variance; must be 2 unless dp-full"},
      {"--b", "b", Kind::kCount, "batch size"},
      {"--n0", "N0", Kind::kNumber, "tempered dataset size; 0 disables"},
      {"--beta", "beta", Kind::kNumber, "tempering constant, overrides --n0"},
      {"--t", "T", Kind::kCount, "iterations"},
      {"--proposal-sd", "proposal_sd", Kind::kNumbers,
       "random-walk sd, one value or one per coordinate"},
      {"--clip", "clip", Kind::kNumber, "clip bound, at most sqrt(b)/N0"},
      {"--proposal-radius", "proposal_radius", Kind::kNumber,
       "truncate proposal increments"},
      {"--seed", "seed", Kind::kSeed, "chain seed"},
      {"--delta", "delta", Kind::kNumber, "target delta"},
      {"--alpha-max", "alpha_max", Kind::kCount, "largest Renyi order"},
      {"--init", "init", Kind::kInit, "comma list, or 'prior'"},
      {"--chains", "chains", Kind::kCount, "independent chains on threads"},
      {"--init-epsilon-spent", "init_epsilon_spent", Kind::kSpent,
       "external cost 'epsilon[,delta]' added to the total; delta defaults to 1e-6"}};
  o.insert(o.end(), more.begin(), more.end());
  return o;
}

void check_model(const json& cfg) {
  if (text(cfg, "model") != "gmm2d") bad_config("unknown model");
}

struct ChainOutput {
  Eigen::MatrixXd samples;
  std::vector<AcceptanceRecord> records;
  std::optional<BudgetReport> privacy;
  double acceptance = 0.0;
};

void cmd_run(const json& cfg, Execution& ex, Context& ctx) {
  check_model(cfg);
  const Gmm2dModel model;
  const std::string mode = text(cfg, "mode");
  if (mode != "mh" && mode != "barker" && mode != "dp-full" &&
      mode != "dp-subsampled") {
    bad_config("mode must be mh, barker, dp-full or dp-subsampled");
  }
  const int chains = static_cast<int>(count(cfg, "chains"));
  if (chains < 1 || chains > 1024) bad_config("chains must be in [1, 1024]");

  const Dataset data = load_data(cfg, ex);
  const std::int64_t n = data.rows();
  const double n0 = tempered_size(cfg, n);
  const Eigen::VectorXd proposal_sd = vector_of(cfg, "proposal_sd");
  const std::int64_t t_total = count(cfg, "T");
  const std::uint64_t seed = seed_value(cfg, "seed");
  const bool is_dp = mode.rfind("dp-", 0) == 0;
  const double c = is_dp ? number(cfg, "C") : 2.0;

  std::int64_t b = 0;
  if (!is_null(cfg, "b")) {
    b = count(cfg, "b");
  } else if (mode == "dp-subsampled") {
    b = 1000;
  } else if (mode == "dp-full") {
    b = n;
  }
  const bool needs_correction = is_dp || (mode == "barker" && b > 0 && b < n);
  std::optional<CorrectionModel> correction;
  if (needs_correction) correction = load_correction(cfg, c, ex, ctx);

  ChainConfig chain;
  chain.mode = mode == "dp-full" ? ChainMode::kFullData : ChainMode::kSubsampled;
  chain.noise_variance = c;
  chain.batch_size = b;
  chain.dataset_size = n;
  chain.tempered_size = n0;
  chain.iterations = t_total;
  chain.proposal_sd = proposal_sd;
  chain.clip = optional_number(cfg, "clip");
  chain.proposal_radius = optional_number(cfg, "proposal_radius");
  chain.delta = number(cfg, "delta");
  chain.alpha_max = static_cast<int>(count(cfg, "alpha_max"));
  if (is_dp) chain.validate(model.dimension());

  std::vector<ChainOutput> outputs(static_cast<std::size_t>(chains));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(chains));
  json seeds = json::array();
  for (int k = 0; k < chains; ++k) seeds.push_back(chain_seed(seed, k));
  ex.seeds["chains"] = seeds;

  auto work = [&](int k) {
    try {
      const std::uint64_t s = chain_seed(seed, k);
      const Eigen::VectorXd init = initial_state(cfg, model, s);
      const std::string tag = chains > 1 ? "chain " + std::to_string(k) + ": "
                                         : std::string();
      const ProgressFn progress = [&, tag](std::int64_t done) {
        ctx.log(tag + std::to_string(done) + "/" + std::to_string(t_total) +
                " iterations");
      };
      ChainOutput& out = outputs[static_cast<std::size_t>(k)];
      if (is_dp) {
        ChainConfig cc = chain;
        cc.seed = s;
        ChainResult r = run_chain(cc, model, data, *correction, init, progress);
        out.acceptance = r.acceptance_rate();
        out.samples = std::move(r.samples);
        out.records = std::move(r.records);
        out.privacy = std::move(r.privacy);
      } else {
        BaselineConfig bc;
        bc.iterations = t_total;
        bc.proposal_sd = proposal_sd;
        bc.tempered_size = n0;
        bc.seed = s;
        bc.batch_size = b;
        BaselineResult r =
            mode == "mh"
                ? mh_exact_chain(model, data, bc, init, progress)
                : barker_nonprivate_chain(
                      model, data, bc, init,
                      correction ? &*correction : nullptr, progress);
        out.acceptance = r.acceptance_rate();
        out.samples = std::move(r.samples);
      }
    } catch (...) {
      failures[static_cast<std::size_t>(k)] = std::current_exception();
    }
  };
  if (chains == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (int k = 0; k < chains; ++k) threads.emplace_back(work, k);
    for (auto& th : threads) th.join();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  json summary = {{"mode", mode}, {"N", n}, {"N0", n0}, {"b", b},
                  {"chains", json::array()}};
  for (int k = 0; k < chains; ++k) {
    const ChainOutput& out = outputs[static_cast<std::size_t>(k)];
    const std::string prefix =
        chains > 1 ? "chain" + std::to_string(k) + "_" : std::string();
    if (is_dp) {
      ex.add(prefix + "samples.csv",
             render_samples_csv(out.samples, out.records));
      ex.add(prefix + "records.jsonl", render_records_jsonl(out.records));
    } else {
      ex.add(prefix + "samples.csv", render_samples_csv(out.samples));
    }
    summary["chains"].push_back(
        {{"seed", seeds[static_cast<std::size_t>(k)]},
         {"acceptance_rate", out.acceptance}});
    ctx.out << (chains > 1 ? "chain " + std::to_string(k) + " " : "")
            << "acceptance_rate " << format_double(out.acceptance) << "\n";
  }
  if (is_dp && t_total > 0) {
    // Every chain releases its own T decisions about the same data.
    AccountingScenario all = accounting_scenario(chain);
    all.iterations = t_total * chains;
    const BudgetReport combined =
        budget_report(all, chain.delta, chain.alpha_max);
    json privacy = privacy_json(combined, cfg);
    privacy["chains"] = chains;
    ex.add("privacy.json", dump(privacy));
    ctx.out << "epsilon " << format_double(privacy["total"]["epsilon"].get<double>())
            << " delta " << format_double(privacy["total"]["delta"].get<double>())
            << "\n";
  }
  ex.add("summary.json", dump(summary));
}

const json kSynthesizeDefaults = {
    {"n", 100000}, {"seed", 0}, {"theta_true", {0.0, 1.0}}};

std::vector<OptionSpec> synthesize_options() {
  return {{"--n", "n", Kind::kCount, "number of points"},
          {"--seed", "seed", Kind::kSeed, "data seed"},
          {"--theta-true", "theta_true", Kind::kNumbers, "true parameters"}};
}

void cmd_synthesize(const json& cfg, Execution& ex, Context& ctx) {
  SyntheticDataSpec spec;
  spec.size = count(cfg, "n");
  spec.seed = seed_value(cfg, "seed");
  const Eigen::VectorXd truth = vector_of(cfg, "theta_true");
  if (truth.size() != 2) bad_config("'theta_true' needs two entries");
  spec.theta_true = truth;
  ex.seeds["data"] = spec.seed;
  ex.add("data.csv", render_dataset_csv(synthesize(spec)));
  ctx.out << "wrote " << spec.size << " points\n";
}

json data_defaults() {
  return {{"model", "gmm2d"}, {"data", nullptr}, {"n_desk", 100000},
          {"data_seed", 0}, {"theta_true", {0.0, 1.0}}};
}

json merged(json base, const json& extra) {
  for (const auto& [k, v] : extra.items()) base[k] = v;
  return base;
}

const json kFig1cExtra = {
    {"b", 1000},
    {"N0", 100.0},
    {"proposal_sds", {1e-3, 3e-3, 1e-2, 3e-2, 1e-1}},
    {"trials", 200},
    {"warmup", 500},
    {"warmup_proposal_sd", 0.05},
    {"clip", nullptr},
    {"seed", 0},
    {"init", {0.0, 1.0}}};

std::vector<OptionSpec> fig1c_options() {
  std::vector<OptionSpec> o = data_options();
  const std::vector<OptionSpec> more = {
      {"--b", "b", Kind::kCount, "batch size"},
      {"--n0", "N0", Kind::kNumber, "tempered dataset size"},
      {"--proposal-sds", "proposal_sds", Kind::kNumbers, "sds to scan"},
      {"--trials", "trials", Kind::kCount, "draws per sd"},
      {"--warmup", "warmup", Kind::kCount, "warm-up iterations"},
      {"--warmup-proposal-sd", "warmup_proposal_sd", Kind::kNumber,
       "proposal sd of the warm-up chain"},
      {"--clip", "clip", Kind::kNumber, "clip bound override"},
      {"--seed", "seed", Kind::kSeed, "scan seed"},
      {"--init", "init", Kind::kInit, "warm-up start, or 'prior'"}};
  o.insert(o.end(), more.begin(), more.end());
  return o;
}

void cmd_fig1c(const json& cfg, Execution& ex, Context& ctx) {
  check_model(cfg);
  const Gmm2dModel model;
  const Dataset data = load_data(cfg, ex);
  ClipScanConfig sc;
  sc.batch_size = count(cfg, "b");
  sc.tempered_size = number(cfg, "N0");
  sc.proposal_sds = numbers(cfg, "proposal_sds");
  sc.trials = static_cast<int>(count(cfg, "trials"));
  sc.warmup = count(cfg, "warmup");
  sc.warmup_proposal_sd = number(cfg, "warmup_proposal_sd");
  sc.clip = optional_number(cfg, "clip");
  sc.seed = seed_value(cfg, "seed");
  ex.seeds["scan"] = sc.seed;
  const auto rows =
      clip_fraction_scan(model, data, sc, initial_state(cfg, model, sc.seed));
  std::string csv = "proposal_sd,clip_fraction,standard_error\n";
  for (const auto& r : rows) {
    csv += format_double(r.proposal_sd) + ',' + format_double(r.clip_fraction) +
           ',' + format_double(r.standard_error) + '\n';
    ctx.out << "proposal_sd " << format_double(r.proposal_sd)
            << " clip_fraction " << format_double(r.clip_fraction) << "\n";
  }
  ex.add("fig1c.csv", csv);
}

json figs1_defaults() {
  json d = kFitDefaults;
  d.erase("C");
  d["cs"] = {0.1, 0.5, 1.0, 2.0};
  return d;
}

std::vector<OptionSpec> figs1_options() {
  std::vector<OptionSpec> o;
  for (auto& spec : fit_options()) {
    if (spec.key != "C") o.push_back(spec);
  }
  o.push_back({"--c", "cs", Kind::kNumbers, "noise variances to fit"});
  return o;
}

void cmd_figs1(const json& cfg, Execution& ex, Context& ctx) {
  const FitConfig fc = fit_config_from(cfg);
  ex.seeds["fit"] = fc.seed;
  std::string csv = "C,kolmogorov_distance,final_loss\n";
  for (double c : numbers(cfg, "cs")) {
    const CachedFit fit = fit_cached(c, fc, boolean(cfg, "cache"), ctx);
    const double d = kolmogorov_distance(fit.model);
    csv += format_double(c) + ',' + format_double(d) + ',' +
           format_double(fit.model.fit_meta().final_loss) + '\n';
    ctx.out << "C " << format_double(c) << " kolmogorov_distance "
            << format_double(d) << "\n";
  }
  ex.add("figS1.csv", csv);
}

// Random-walk scales for the posterior-accuracy experiment, tuned on the
// desk-scale gmm2d posterior at N0 = 100 (posterior sds near 0.44 and 0.84).
// Larger private steps clip more ratios, which narrows the private target.
const std::vector<double> kFig4ProposalSd = {0.15, 0.25};
const std::vector<double> kFig4BaselineProposalSd = {0.5};

const json kFig4Extra = {
    {"correction", nullptr},
    {"b", 1000},
    {"N0", 100.0},
    {"T", 5000},
    {"proposal_sd", kFig4ProposalSd},
    {"baseline_proposal_sd", kFig4BaselineProposalSd},
    {"baseline_b", 0},
    {"seeds", 20},
    {"base_seed", 0},
    {"burn_in", 1000},
    {"baseline_iterations", 50000},
    {"shared_baseline", true},
    {"checkpoints", nullptr},
    {"delta", 1e-6},
    {"alpha_max", 64},
    {"init", {0.0, 1.0}}};

std::vector<OptionSpec> fig4_options() {
  std::vector<OptionSpec> o = data_options();
  const std::vector<OptionSpec> more = {
      {"--correction", "correction", Kind::kText, "correction model file"},
      {"--b", "b", Kind::kCount, "batch size"},
      {"--n0", "N0", Kind::kNumber, "tempered dataset size"},
      {"--t", "T", Kind::kCount, "private chain length"},
      {"--proposal-sd", "proposal_sd", Kind::kNumbers, "random-walk sd"},
      {"--baseline-proposal-sd", "baseline_proposal_sd", Kind::kNumbers,
       "random-walk sd of the non-private chains"},
      {"--baseline-b", "baseline_b", Kind::kCount,
       "baseline batch size; 0 uses all data"},
      {"--seeds", "seeds", Kind::kCount, "chain pairs"},
      {"--base-seed", "base_seed", Kind::kSeed, "first seed"},
      {"--burn-in", "burn_in", Kind::kCount, "discarded iterations"},
      {"--baseline-iterations", "baseline_iterations", Kind::kCount,
       "baseline chain length"},
      {"--per-seed-baseline", "shared_baseline", Kind::kSwitchOff,
       "run one baseline per seed instead of one shared chain"},
      {"--checkpoints", "checkpoints", Kind::kNumbers, "prefix lengths"},
      {"--delta", "delta", Kind::kNumber, "target delta"},
      {"--alpha-max", "alpha_max", Kind::kCount, "largest Renyi order"},
      {"--init", "init", Kind::kInit, "common start of all chains"}};
  o.insert(o.end(), more.begin(), more.end());
  return o;
}

std::string fig4_csv(const Fig4Result& r, const Eigen::MatrixXd& err,
                     const Eigen::MatrixXd& se) {
  std::string csv = "t,epsilon";
  for (Eigen::Index j = 0; j < err.cols(); ++j) {
    const std::string c = "theta_" + std::to_string(j);
    csv += "," + c + "," + c + "_se";
  }
  csv += '\n';
  for (std::size_t i = 0; i < r.checkpoints.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    csv += std::to_string(r.checkpoints[i]) + ',' + format_double(r.epsilon[i]);
    for (Eigen::Index j = 0; j < err.cols(); ++j) {
      csv += ',' + format_double(err(row, j)) + ',' + format_double(se(row, j));
    }
    csv += '\n';
  }
  return csv;
}

void cmd_fig4(const json& cfg, Execution& ex, Context& ctx) {
  check_model(cfg);
  const Gmm2dModel model;
  const Dataset data = load_data(cfg, ex);
  const CorrectionModel correction = load_correction(cfg, 2.0, ex, ctx);
  Fig4Config fc;
  fc.seeds = static_cast<int>(count(cfg, "seeds"));
  fc.base_seed = seed_value(cfg, "base_seed");
  fc.burn_in = count(cfg, "burn_in");
  fc.baseline_iterations = count(cfg, "baseline_iterations");
  if (!is_null(cfg, "checkpoints")) {
    for (double t : numbers(cfg, "checkpoints")) {
      fc.checkpoints.push_back(static_cast<std::int64_t>(std::llround(t)));
    }
  }
  fc.chain.mode = ChainMode::kSubsampled;
  fc.chain.batch_size = count(cfg, "b");
  fc.chain.dataset_size = data.rows();
  fc.chain.tempered_size = number(cfg, "N0");
  fc.chain.iterations = count(cfg, "T");
  fc.chain.proposal_sd = vector_of(cfg, "proposal_sd");
  fc.chain.delta = number(cfg, "delta");
  fc.chain.alpha_max = static_cast<int>(count(cfg, "alpha_max"));
  fc.baseline_proposal_sd = vector_of(cfg, "baseline_proposal_sd");
  fc.baseline_batch_size = count(cfg, "baseline_b");
  fc.shared_baseline = boolean(cfg, "shared_baseline");
  fc.init = initial_state(cfg, model, fc.base_seed);
  ex.seeds["base_seed"] = fc.base_seed;
  ex.seeds["seeds"] = fc.seeds;

  const Fig4Result r = fig4_experiment(fc, model, data, correction);
  ex.add("fig4_mean.csv", fig4_csv(r, r.mean_error, r.mean_error_se));
  ex.add("fig4_var.csv", fig4_csv(r, r.var_error, r.var_error_se));
  const std::vector<double> diff(r.final_mean_abs_diff.data(),
                                 r.final_mean_abs_diff.data() +
                                     r.final_mean_abs_diff.size());
  const std::vector<double> ratio(
      r.variance_ratio.data(), r.variance_ratio.data() + r.variance_ratio.size());
  const json summary = {{"final_mean_abs_diff", diff},
                        {"variance_ratio", ratio},
                        {"private_acceptance", r.private_acceptance},
                        {"baseline_acceptance", r.baseline_acceptance},
                        {"epsilon", r.epsilon.empty() ? 0.0 : r.epsilon.back()}};
  ex.add("fig4_summary.json", dump(summary));
  ctx.out << summary.dump() << "\n";
}

const json kBoundsExtra = {
    {"correction", nullptr},
    {"theta", {0.0, 1.0}},
    {"theta_new", nullptr},
    {"b", 1000},
    {"N0", 100.0},
    {"eta", 0.5}};

std::vector<OptionSpec> bounds_options() {
  std::vector<OptionSpec> o = data_options();
  const std::vector<OptionSpec> more = {
      {"--correction", "correction", Kind::kText, "correction model file"},
      {"--theta", "theta", Kind::kNumbers, "current state"},
      {"--theta-new", "theta_new", Kind::kNumbers,
       "proposed state; default theta + 0.01"},
      {"--b", "b", Kind::kCount, "batch size"},
      {"--n0", "N0", Kind::kNumber, "tempered dataset size; 0 disables"},
      {"--eta", "eta", Kind::kNumber, "contraction constant in [0, 1)"}};
  o.insert(o.end(), more.begin(), more.end());
  return o;
}

void cmd_bounds(const json& cfg, Execution& ex, Context& ctx) {
  check_model(cfg);
  const Gmm2dModel model;
  const Dataset data = load_data(cfg, ex);
  const CorrectionModel correction = load_correction(cfg, 2.0, ex, ctx);
  const Eigen::VectorXd theta = vector_of(cfg, "theta");
  const Eigen::VectorXd theta_new =
      is_null(cfg, "theta_new")
          ? Eigen::VectorXd(theta.array() + 0.01)
          : vector_of(cfg, "theta_new");
  if (theta.size() != 2 || theta_new.size() != 2) {
    bad_config("theta and theta_new need two entries");
  }
  const double clt = clt_error_bound(model, data, theta_new, theta,
                                     count(cfg, "b"), number(cfg, "N0"));
  const ErrorBoundReport report =
      error_bound_report(clt, correction_distance(correction),
                         number(cfg, "eta"));
  ex.add("bounds.json", dump(to_json(report)));
  ctx.out << to_json(report).dump() << "\n";
}

std::vector<Command> commands() {
  std::vector<Command> c;
  c.push_back({"fit-correction", "fit the Gaussian-mixture correction",
               kFitDefaults, fit_options(), cmd_fit_correction});
  c.push_back({"account", "privacy budget of a chain configuration",
               kAccountDefaults, account_options(), cmd_account});
  c.push_back({"run", "run a private or baseline chain", kRunDefaults,
               run_options(), cmd_run});
  c.push_back({"synthesize", "draw a gmm2d dataset", kSynthesizeDefaults,
               synthesize_options(), cmd_synthesize});
  c.push_back({"diagnose fig1c", "clip fraction against proposal sd",
               merged(data_defaults(), kFig1cExtra), fig1c_options(),
               cmd_fig1c});
  c.push_back({"diagnose figS1", "correction distance against C",
               figs1_defaults(), figs1_options(), cmd_figs1});
  c.push_back({"diagnose fig4", "posterior accuracy of private chains",
               merged(data_defaults(), kFig4Extra), fig4_options(), cmd_fig4});
  c.push_back({"diagnose bounds", "approximation-error bounds",
               merged(data_defaults(), kBoundsExtra), bounds_options(),
               cmd_bounds});
  return c;
}

const Command& find_command(const std::vector<Command>& all,
                            const std::string& name) {
  for (const auto& c : all) {
    if (c.name == name) return c;
  }
  bad_config("unknown command '" + name + "'");
}

// Config file values over defaults. Unknown keys are rejected.
json apply_config_file(json cfg, const fs::path& path) {
  json file;
  try {
    file = json::parse(read_text(path));
  } catch (const json::exception& e) {
    bad_config(path.string() + ": " + e.what());
  }
  if (!file.is_object()) bad_config(path.string() + ": expected an object");
  for (const auto& [k, v] : file.items()) {
    if (!cfg.contains(k)) bad_config(path.string() + ": unknown key '" + k + "'");
    cfg[k] = v;
  }
  return cfg;
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Runs a command on a resolved config and publishes outputs plus manifest.
// Returns the manifest.
json execute(const Command& command, const json& cfg, const fs::path& out_dir,
             Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  Execution ex;
  command.execute(cfg, ex, ctx);

  Staging staging(out_dir);
  json outputs = json::object();
  for (const auto& [name, content] : ex.files) {
    staging.write(name, content);
    outputs[name] = {{"crc32", crc32_hex(content)},
                     {"bytes", content.size()}};
  }
  const double elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  json manifest = {{"tool_version", std::string(kToolVersion)},
                   {"command", command.name},
                   {"config", cfg},
                   {"seeds", ex.seeds},
                   {"artifacts",
                    {{"inputs", ex.inputs},
                     {"out_dir", fs::absolute(staging.out_dir())
                                     .lexically_normal()
                                     .string()},
                     {"outputs", outputs}}},
                   {"wall_clock", {{"started_utc", started},
                                   {"seconds", elapsed}}}};
  staging.write("manifest.json", dump(manifest));
  staging.commit();
  return manifest;
}

int cmd_replay(const fs::path& manifest_path, const fs::path& out_dir,
               Context& ctx) {
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    bad_config(manifest_path.string() + ": " + e.what());
  }
  const std::vector<Command> all = commands();
  const Command& command = find_command(all, text(manifest, "command"));
  if (text(manifest, "tool_version") != kToolVersion) {
    ctx.log("warning: manifest written by version " +
            text(manifest, "tool_version"));
  }
  // Config keys missing from an older manifest take today's defaults.
  json cfg = command.defaults;
  for (const auto& [k, v] : field(manifest, "config").items()) {
    if (!cfg.contains(k)) bad_config("manifest has unknown key '" + k + "'");
    cfg[k] = v;
  }
  const json& artifacts = field(manifest, "artifacts");
  for (const auto& [name, input] : field(artifacts, "inputs").items()) {
    if (!input.contains("path")) continue;
    const std::string crc = crc32_hex(read_text(text(input, "path")));
    if (crc != text(input, "crc32")) {
      throw Error(ErrorCode::kReplayMismatch,
                  "input '" + name + "' changed since the recorded run");
    }
  }
  const json fresh = execute(command, cfg, out_dir, ctx);
  std::vector<std::string> mismatched;
  const json& before = field(artifacts, "outputs");
  const json& after = fresh["artifacts"]["outputs"];
  for (const auto& [name, entry] : before.items()) {
    if (!after.contains(name) ||
        after[name]["crc32"] != entry["crc32"]) {
      mismatched.push_back(name);
    }
  }
  if (!mismatched.empty()) {
    std::string list;
    for (const auto& m : mismatched) list += " " + m;
    throw Error(ErrorCode::kReplayMismatch, "outputs differ:" + list);
  }
  ctx.out << "replay matched " << before.size() << " outputs\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  Context ctx{out, err, {}};
  const std::vector<Command> all = commands();

  CLI::App app{"Differentially private MCMC with the Barker test"};
  app.name("dpbarker");
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  struct Bound {
    const Command* command;
    CLI::App* app;
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::pair<const OptionSpec*, std::string>> raw;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  CLI::App* diagnose = app.add_subcommand("diagnose", "figure diagnostics");
  diagnose->require_subcommand(1);

  for (const Command& c : all) {
    auto b = std::make_unique<Bound>();
    b->command = &c;
    const bool is_diag = c.name.rfind("diagnose ", 0) == 0;
    b->app = is_diag ? diagnose->add_subcommand(c.name.substr(9), c.description)
                     : app.add_subcommand(c.name, c.description);
    b->app->add_option("--config", b->config_path,
                       "JSON config; flags override its values");
    b->app->add_option("--out", b->out_dir, "output directory")
        ->capture_default_str();
    Bound* bp = b.get();
    for (const OptionSpec& spec : c.options) {
      if (spec.kind == Kind::kSwitchOff) {
        b->app->add_flag_callback(
            spec.flag, [bp, &spec] { bp->raw.emplace_back(&spec, ""); },
            spec.help);
      } else {
        b->app->add_option_function<std::string>(
            spec.flag,
            [bp, &spec](const std::string& v) { bp->raw.emplace_back(&spec, v); },
            spec.help);
      }
    }
    bound.push_back(std::move(b));
  }

  std::string replay_manifest, replay_out;
  CLI::App* replay =
      app.add_subcommand("replay", "re-run a manifest and compare outputs");
  replay->add_option("manifest", replay_manifest, "manifest.json")->required();
  replay->add_option("--out", replay_out, "output directory")->required();

  std::vector<std::string> argv_store{"dpbarker"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (replay->parsed()) return cmd_replay(replay_manifest, replay_out, ctx);
    for (const auto& b : bound) {
      if (!b->app->parsed()) continue;
      json cfg = b->command->defaults;
      if (!b->config_path.empty()) cfg = apply_config_file(cfg, b->config_path);
      for (const auto& [spec, value] : b->raw) cfg[spec->key] = convert(*spec, value);
      execute(*b->command, cfg, b->out_dir, ctx);
      return 0;
    }
    err << "dpbarker: no command\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "dpbarker: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << "dpbarker: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace dpbarker::cli
