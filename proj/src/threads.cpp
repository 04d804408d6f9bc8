// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/threads.hpp"

#include <cstdlib>
#include <string>

#include "xmodal/errors.hpp"

namespace xmodal {

int resolve_threads(std::optional<int> requested) {
  if (requested) {
    if (*requested < 1) throw ConfigError("--threads must be at least 1");
    return *requested;
  }
  const char* env = std::getenv("XMODAL_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 4096) throw ConfigError("XMODAL_THREADS must be a positive integer, got '" + std::string(env) + "'");
  return static_cast<int>(v);
}

}  // namespace xmodal
