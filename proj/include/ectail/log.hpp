#pragma once

#include <string_view>

namespace ectail {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Read once from ECTAIL_LOG (error|warn|info|debug); defaults to warn.
LogLevel log_level();

// Writes "[level] message" to stderr when `level` is enabled.
void log(LogLevel level, std::string_view message);

}  // namespace ectail
