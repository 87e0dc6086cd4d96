#include "log.hpp"

#include <iostream>

namespace coverdet::cli {
namespace {

const auto kStart = std::chrono::steady_clock::now();

}  // namespace

double wall_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - kStart).count();
}

void log_event(const std::string& stage, nlohmann::json fields) {
  fields["stage"] = stage;
  fields["wall_s"] = wall_seconds();
  std::cerr << fields.dump() << '\n';
}

void log_error(const std::string& code, const std::string& message) {
  nlohmann::json line{{"level", "error"}, {"code", code}, {"message", message}};
  std::cerr << line.dump() << std::endl;
}

}  // namespace coverdet::cli
