#include "ectail/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace ectail {

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("ECTAIL_LOG");
        const std::string v = env ? env : "";
        if (v == "error") return LogLevel::Error;
        if (v == "info") return LogLevel::Info;
        if (v == "debug") return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

void log(LogLevel level, std::string_view message) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    static std::mutex mu;
    static constexpr const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << '[' << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace ectail
