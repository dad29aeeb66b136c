#include "tad/log.hpp"

#include <atomic>
#include <iostream>

namespace tad::log {

namespace {
std::atomic<Level> g_level{Level::kWarn};
}

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void info(std::string_view message) {
  if (g_level >= Level::kInfo) std::cerr << "[info] " << message << '\n';
}

void warn(std::string_view message) {
  if (g_level >= Level::kWarn) std::cerr << "[warn] " << message << '\n';
}

}  // namespace tad::log
