#pragma once

#include <sstream>
#include <string>

namespace defgen {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Level comes from the DEFGEN_LOG environment variable (error|info|debug),
// read once on first use.  Messages go to stderr.
LogLevel log_level();
void log_message(LogLevel level, const std::string& msg);

template <typename... Args>
void log_info(Args&&... args) {
  if (log_level() < LogLevel::kInfo) return;
  std::ostringstream os;
  (os << ... << args);
  log_message(LogLevel::kInfo, os.str());
}

template <typename... Args>
void log_debug(Args&&... args) {
  if (log_level() < LogLevel::kDebug) return;
  std::ostringstream os;
  (os << ... << args);
  log_message(LogLevel::kDebug, os.str());
}

template <typename... Args>
void log_error(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  log_message(LogLevel::kError, os.str());
}

}  // namespace defgen
