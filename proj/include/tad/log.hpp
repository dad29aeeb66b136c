#pragma once

#include <string_view>

namespace tad::log {

enum class Level { kQuiet = 0, kWarn = 1, kInfo = 2 };

void set_level(Level level);
Level level();

void info(std::string_view message);
void warn(std::string_view message);

}  // namespace tad::log
