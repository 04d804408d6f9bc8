// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

namespace xmodal {

/// Worker count from an explicit value, else the XMODAL_THREADS environment
/// variable, else 1. Throws ConfigError on a non-positive or malformed value.
int resolve_threads(std::optional<int> requested);

}  // namespace xmodal
