#pragma once

#include <spdlog/spdlog.h>

namespace occsurf {

// Reads OCCSURF_LOG_LEVEL (trace|debug|info|warn|error|off); defaults to info.
void init_logging();

}  // namespace occsurf
