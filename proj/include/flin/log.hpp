#pragma once

#include <spdlog/spdlog.h>

namespace flin {

/// Process-wide logger writing to stderr. Level comes from FLIN_LOG_LEVEL
/// (debug, info, warn, error); default warn.
spdlog::logger& log();

}  // namespace flin
