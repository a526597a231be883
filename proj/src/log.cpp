#include "defgen/log.hpp"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <mutex>

namespace defgen {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("DEFGEN_LOG");
    if (env == nullptr) return LogLevel::kError;
    if (std::strcmp(env, "debug") == 0) return LogLevel::kDebug;
    if (std::strcmp(env, "info") == 0) return LogLevel::kInfo;
    return LogLevel::kError;
  }();
  return level;
}

void log_message(LogLevel level, const std::string& msg) {
  static std::mutex mu;
  const char* tag = level == LogLevel::kError  ? "error"
                    : level == LogLevel::kInfo ? "info"
                                               : "debug";
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[defgen:" << tag << "] " << msg << "\n";
}

}  // namespace defgen
