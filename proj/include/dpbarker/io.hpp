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

// File formats: dataset and sample CSVs, audit-record JSON lines, and JSON
// renderings of privacy and error-bound reports.

#ifndef DPBARKER_IO_HPP_
#define DPBARKER_IO_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dpbarker/accountant.hpp"
#include "dpbarker/diagnostics.hpp"
#include "dpbarker/sampler.hpp"

namespace dpbarker {

// Shortest decimal form that round-trips.
std::string format_double(double value);

// One datum per row, comma separated. A leading non-numeric row is treated
// as a header. Throws kIoError.
Dataset read_dataset_csv(const std::filesystem::path& path);
std::string render_dataset_csv(const Dataset& data);

// Header `iteration,theta_0,...,theta_{d-1},accepted`; iteration counts from 1.
std::string render_samples_csv(const Eigen::MatrixXd& samples,
                               std::span<const AcceptanceRecord> records);
// Baseline chains have no records; `accepted` is then derived from whether
// theta moved.
std::string render_samples_csv(const Eigen::MatrixXd& samples);

std::string render_records_jsonl(std::span<const AcceptanceRecord> records);

nlohmann::json to_json(const RdpCurve& curve);
nlohmann::json to_json(const AccountingScenario& scenario);
nlohmann::json to_json(const DpGuarantee& dp);
nlohmann::json to_json(const BudgetReport& report);
nlohmann::json to_json(const ErrorBoundReport& report);

// Columns q,T,alpha_star,epsilon,delta.
std::string render_sweep_csv(std::span<const SweepRow> rows);

// Writes through a sibling temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);
std::string read_text(const std::filesystem::path& path);

// CRC-32 of the bytes, as eight lowercase hex digits.
std::string crc32_hex(std::string_view bytes);

}  // namespace dpbarker

#endif  // DPBARKER_IO_HPP_
