#pragma once

#include <string_view>

namespace colang {

enum class LogLevel { Quiet, Warning, Info };

void set_log_level(LogLevel level);
LogLevel log_level();

void log_warning(std::string_view message);
void log_info(std::string_view message);

}  // namespace colang
