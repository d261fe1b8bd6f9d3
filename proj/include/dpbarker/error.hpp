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

#ifndef DPBARKER_ERROR_HPP_
#define DPBARKER_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpbarker {

// Every failure the library can report. The CLI maps each code to a distinct
// exit status and prints the name on stderr.
enum class ErrorCode {
  kInvalidArgument = 1,
  kNonPositiveSigmaAlpha,
  kInvalidNoiseVariance,
  kOrderTooLarge,
  kMissingOrder,
  kEmptyCurve,
  kEmptyAlphaGrid,
  kFitDiverged,
  kCorruptModelFile,
  kIoError,
  kNonFiniteLikelihood,
  kBatchSizeMismatch,
  kCorrectionMismatch,
  kVarianceGuardViolated,
  kConfigModeMismatch,
  kInvalidEta,
  kEmptyAfterBurnIn,
  kInvalidConfig,
  kReplayMismatch,
};

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNonPositiveSigmaAlpha: return "NonPositiveSigmaAlpha";
    case ErrorCode::kInvalidNoiseVariance: return "InvalidNoiseVariance";
    case ErrorCode::kOrderTooLarge: return "OrderTooLarge";
    case ErrorCode::kMissingOrder: return "MissingOrder";
    case ErrorCode::kEmptyCurve: return "EmptyCurve";
    case ErrorCode::kEmptyAlphaGrid: return "EmptyAlphaGrid";
    case ErrorCode::kFitDiverged: return "FitDiverged";
    case ErrorCode::kCorruptModelFile: return "CorruptModelFile";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kNonFiniteLikelihood: return "NonFiniteLikelihood";
    case ErrorCode::kBatchSizeMismatch: return "BatchSizeMismatch";
    case ErrorCode::kCorrectionMismatch: return "CorrectionMismatch";
    case ErrorCode::kVarianceGuardViolated: return "VarianceGuardViolated";
    case ErrorCode::kConfigModeMismatch: return "ConfigModeMismatch";
    case ErrorCode::kInvalidEta: return "InvalidEta";
    case ErrorCode::kEmptyAfterBurnIn: return "EmptyAfterBurnIn";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kReplayMismatch: return "ReplayMismatch";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dpbarker

#endif  // DPBARKER_ERROR_HPP_
