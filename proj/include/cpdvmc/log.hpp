#pragma once

// Minimal leveled logging to stderr. Verbosity comes from CPDVMC_LOG
// (error, warn, info, debug); default is warn.

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace cpdvmc::log {

enum class Level : int { error = 0, warn = 1, info = 2, debug = 3 };

inline Level parse_level(std::string_view s) {
  if (s == "error") return Level::error;
  if (s == "info") return Level::info;
  if (s == "debug") return Level::debug;
  return Level::warn;
}

inline Level& threshold() {
  static Level level = [] {
    const char* env = std::getenv("CPDVMC_LOG");
    return env ? parse_level(env) : Level::warn;
  }();
  return level;
}

inline void write(Level lvl, std::string_view msg) {
  static std::mutex m;
  if (static_cast<int>(lvl) > static_cast<int>(threshold())) return;
  static constexpr std::string_view tag[] = {"error", "warn", "info", "debug"};
  std::lock_guard lock(m);
  std::cerr << "[cpdvmc " << tag[static_cast<int>(lvl)] << "] " << msg << '\n';
}

inline void warn(std::string_view msg) { write(Level::warn, msg); }
inline void info(std::string_view msg) { write(Level::info, msg); }
inline void debug(std::string_view msg) { write(Level::debug, msg); }

}  // namespace cpdvmc::log
