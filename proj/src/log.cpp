#include "protoverb/log.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace protoverb::log {

spdlog::logger& logger() {
  static const auto instance = [] {
    auto l = spdlog::stderr_color_mt("protoverb");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return *instance;
}

bool init_from_env() {
  const char* raw = std::getenv("PROTOVERB_LOG");
  if (raw == nullptr) return true;
  const std::string_view v(raw);
  if (v == "error") {
    logger().set_level(spdlog::level::err);
  } else if (v == "warn") {
    logger().set_level(spdlog::level::warn);
  } else if (v == "info") {
    logger().set_level(spdlog::level::info);
  } else if (v == "debug") {
    logger().set_level(spdlog::level::debug);
  } else {
    return false;
  }
  return true;
}

}  // namespace protoverb::log
