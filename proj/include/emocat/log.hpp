// Copyright 2026 The emocat authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EMOCAT_LOG_HPP_
#define EMOCAT_LOG_HPP_

#include <cstdlib>
#include <iostream>
#include <string>

namespace emocat {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

/// Level comes from EMOCAT_LOG in {error, info, debug}; default info.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("EMOCAT_LOG");
    if (!env) return LogLevel::kInfo;
    std::string s(env);
    if (s == "error") return LogLevel::kError;
    if (s == "info") return LogLevel::kInfo;
    if (s == "debug") return LogLevel::kDebug;
    std::cerr << "[error] EMOCAT_LOG='" << s << "' not in {error,info,debug}; using info\n";
    return LogLevel::kInfo;
  }();
  return level;
}

inline void log_error(const std::string& msg) { std::cerr << "[error] " << msg << "\n"; }

inline void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::cerr << "[info] " << msg << "\n";
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::kDebug) std::cerr << "[debug] " << msg << "\n";
}

}  // namespace emocat

#endif  // EMOCAT_LOG_HPP_
