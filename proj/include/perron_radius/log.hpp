#pragma once

// Minimal leveled logging to stderr, controlled by PERRON_RADIUS_LOG
// (error | info | debug; default error).

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace perron_radius::log {

enum class Level { error = 0, info = 1, debug = 2 };

inline Level parse_level(std::string_view s) {
  if (s == "debug") return Level::debug;
  if (s == "info") return Level::info;
  return Level::error;
}

inline Level& current_level() {
  static Level level = [] {
    const char* env = std::getenv("PERRON_RADIUS_LOG");
    return env ? parse_level(env) : Level::error;
  }();
  return level;
}

inline void set_level(Level level) { current_level() = level; }

inline bool enabled(Level level) {
  return static_cast<int>(level) <= static_cast<int>(current_level());
}

inline void write(Level level, const std::string& message) {
  if (!enabled(level)) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  static constexpr const char* names[] = {"error", "info", "debug"};
  std::cerr << "[perron_radius:" << names[static_cast<int>(level)] << "] "
            << message << '\n';
}

inline void error(const std::string& m) { write(Level::error, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void debug(const std::string& m) { write(Level::debug, m); }

}  // namespace perron_radius::log
