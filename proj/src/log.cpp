#include "flin/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace flin {

spdlog::logger& log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_mt("flin");
    l->set_pattern("[%H:%M:%S.%e] [%l] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("FLIN_LOG_LEVEL")) {
      const std::string v(env);
      if (v == "debug") level = spdlog::level::debug;
      else if (v == "info") level = spdlog::level::info;
      else if (v == "warn") level = spdlog::level::warn;
      else if (v == "error") level = spdlog::level::err;
    }
    l->set_level(level);
    return l;
  }();
  return *logger;
}

}  // namespace flin
