// Copyright 2026 The VKIE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VKIE_TOOLS_COMMANDS_HPP_
#define VKIE_TOOLS_COMMANDS_HPP_

namespace vkie::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;

// Parses argv, runs one subcommand and returns the process exit code.
int dispatch(int argc, char **argv);

}  // namespace vkie::cli

#endif  // VKIE_TOOLS_COMMANDS_HPP_
