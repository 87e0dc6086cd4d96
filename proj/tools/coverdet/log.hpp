#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

namespace coverdet::cli {

/// One JSON object per line on stderr. Every record carries the stage name
/// and seconds since the process started.
void log_event(const std::string& stage, nlohmann::json fields);

/// The single error line printed before a nonzero exit.
void log_error(const std::string& code, const std::string& message);

double wall_seconds();

}  // namespace coverdet::cli
