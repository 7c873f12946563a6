#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace donorsim::log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

inline Level level_from_env() {
  const char* v = std::getenv("DONORSIM_LOG");
  if (!v) return Level::kWarn;
  const std::string s(v);
  if (s == "error") return Level::kError;
  if (s == "info") return Level::kInfo;
  if (s == "debug") return Level::kDebug;
  return Level::kWarn;
}

inline Level& threshold() {
  static Level lvl = level_from_env();
  return lvl;
}

inline void write(Level lvl, const std::string& msg) {
  if (static_cast<int>(lvl) > static_cast<int>(threshold())) return;
  static std::mutex mu;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[donorsim " << names[static_cast<int>(lvl)] << "] " << msg << '\n';
}

inline void error(const std::string& m) { write(Level::kError, m); }
inline void warn(const std::string& m) { write(Level::kWarn, m); }
inline void info(const std::string& m) { write(Level::kInfo, m); }
inline void debug(const std::string& m) { write(Level::kDebug, m); }

}  // namespace donorsim::log
