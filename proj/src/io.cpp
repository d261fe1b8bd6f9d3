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

#include "dpbarker/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include <boost/crc.hpp>

#include "dpbarker/error.hpp"

namespace dpbarker {
namespace {

using nlohmann::json;

bool parse_double(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
    text.remove_prefix(1);
  }
  while (!text.empty() &&
         (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

bool parse_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    double v;
    const std::string_view field(
        line.data() + start,
        (comma == std::string::npos ? line.size() : comma) - start);
    if (!parse_double(field, v)) return false;
    out.push_back(v);
    if (comma == std::string::npos) return true;
    start = comma + 1;
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<double> values, row;
  std::string line;
  std::size_t cols = 0, rows = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (!parse_row(line, row)) {
      if (rows == 0 && line_no == 1) continue;  // header
      throw Error(ErrorCode::kIoError, path.string() + ":" +
                                           std::to_string(line_no) +
                                           ": not a numeric row");
    }
    if (rows == 0) cols = row.size();
    if (row.size() != cols) {
      throw Error(ErrorCode::kIoError, path.string() + ":" +
                                           std::to_string(line_no) +
                                           ": ragged row");
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::kIoError, path.string() + ": no data");
  Dataset data(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::copy(values.begin(), values.end(), data.data());
  return data;
}

std::string render_dataset_csv(const Dataset& data) {
  std::string out;
  out.reserve(static_cast<std::size_t>(data.size()) * 20);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(data(i, j));
    }
    out += '\n';
  }
  return out;
}

namespace {

std::string samples_header(Eigen::Index dim) {
  std::string out = "iteration";
  for (Eigen::Index j = 0; j < dim; ++j) out += ",theta_" + std::to_string(j);
  return out + ",accepted\n";
}

void append_sample_row(std::string& out, Eigen::Index i,
                       const Eigen::MatrixXd& samples, bool accepted) {
  out += std::to_string(i + 1);
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    out += ',';
    out += format_double(samples(i, j));
  }
  out += accepted ? ",1\n" : ",0\n";
}

}  // namespace

std::string render_samples_csv(const Eigen::MatrixXd& samples,
                               std::span<const AcceptanceRecord> records) {
  if (static_cast<Eigen::Index>(records.size()) != samples.rows()) {
    throw Error(ErrorCode::kInvalidArgument,
                "sample and record counts differ");
  }
  std::string out = samples_header(samples.cols());
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    append_sample_row(out, i, samples, records[static_cast<std::size_t>(i)].accepted);
  }
  return out;
}

std::string render_samples_csv(const Eigen::MatrixXd& samples) {
  std::string out = samples_header(samples.cols());
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const bool moved = i == 0 || samples.row(i) != samples.row(i - 1);
    append_sample_row(out, i, samples, moved);
  }
  return out;
}

std::string render_records_jsonl(std::span<const AcceptanceRecord> records) {
  std::string out;
  for (const auto& r : records) {
    const json line = {{"iteration", r.iteration},
                       {"delta_star", r.delta_star},
                       {"sample_var_term", r.sample_var_term},
                       {"noise_var", r.noise_var},
                       {"clipped_count", r.clipped_count},
                       {"accepted", r.accepted}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

json to_json(const RdpCurve& curve) {
  json arr = json::array();
  for (const auto& [alpha, eps] : curve.entries()) {
    arr.push_back({{"alpha", alpha}, {"epsilon", eps}});
  }
  return arr;
}

json to_json(const AccountingScenario& s) {
  return {{"mode", s.mode == AccountingMode::kSubsampled ? "subsampled"
                                                          : "full-data"},
          {"N", s.dataset_size},
          {"b", s.batch_size},
          {"q", s.sampling_ratio()},
          {"T", s.iterations},
          {"C", s.noise_variance},
          {"B", s.ratio_bound}};
}

json to_json(const DpGuarantee& dp) {
  return {{"epsilon", dp.epsilon},
          {"delta", dp.delta},
          {"alpha_star", dp.alpha_star}};
}

json to_json(const BudgetReport& r) {
  return {{"scenario", to_json(r.scenario)},
          {"delta", r.delta},
          {"alpha_grid", r.alpha_grid},
          {"per_release", to_json(r.per_release)},
          {"amplified", to_json(r.amplified)},
          {"composed", to_json(r.composed)},
          {"dp", to_json(r.dp)}};
}

json to_json(const ErrorBoundReport& r) {
  return {{"clt_bound", r.clt_bound},
          {"correction_distance", r.correction_distance},
          {"total_test_error", r.total_test_error},
          {"eta", r.eta},
          {"tv_bound", r.tv_bound}};
}

std::string render_sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "q,T,alpha_star,epsilon,delta\n";
  for (const auto& r : rows) {
    out += format_double(r.q) + ',' + std::to_string(r.iterations) + ',' +
           std::to_string(r.alpha_star) + ',' + format_double(r.epsilon) +
           ',' + format_double(r.delta) + '\n';
  }
  return out;
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::kIoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError,
                "cannot rename " + tmp.string() + ": " + ec.message());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string crc32_hex(std::string_view bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(crc.checksum()));
  return buf;
}

}  // namespace dpbarker
