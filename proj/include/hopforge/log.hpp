#pragma once

#include <iostream>
#include <mutex>
#include <string>

#include <json.hpp>

namespace hopforge {

// Line-oriented JSON diagnostics on stderr; stdout stays reserved for
// command results and human summaries.
inline void log_line(const char* level, const std::string& msg,
                     nlohmann::json fields = nlohmann::json::object()) {
    static std::mutex mu;
    fields["level"] = level;
    fields["msg"] = msg;
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << fields.dump() << "\n";
}

inline void log_warn(const std::string& msg, nlohmann::json fields = nlohmann::json::object()) {
    log_line("warn", msg, std::move(fields));
}

inline void log_info(const std::string& msg, nlohmann::json fields = nlohmann::json::object()) {
    log_line("info", msg, std::move(fields));
}

} // namespace hopforge
