#pragma once

#define FACTORGIBBS_VERSION "0.1.0"

namespace factorgibbs {
inline const char* version() { return FACTORGIBBS_VERSION; }
}
