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

// The dpbarker command-line tool, as a library so tests can drive it without
// spawning processes.

#ifndef DPBARKER_TOOLS_CLI_HPP_
#define DPBARKER_TOOLS_CLI_HPP_

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace dpbarker::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Exit statuses besides the per-ErrorCode ones (which equal the code value).
inline constexpr int kExitUsage = 64;
inline constexpr int kExitInternal = 70;

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace dpbarker::cli

#endif  // DPBARKER_TOOLS_CLI_HPP_
