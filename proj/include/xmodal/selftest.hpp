// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

// Built-in verification run by `xmodal selftest`: finite-difference gradient
// checks, closed-form loss identities, stage-shape probes of the 3D ResNets
// and a flow accuracy check against a brute-force shift search.

namespace xmodal::selftest {

struct Options {
  /// Test hook: replaces the stem convolution stride of the probed networks,
  /// so the shape probes must fail.
  std::optional<std::array<int, 3>> conv1_stride_fault;
  int probes = 20;
  std::uint64_t seed = 2026;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

using ReportFn = std::function<void(const CheckResult&)>;

/// Runs every check in a fixed order, calling `report` after each one.
std::vector<CheckResult> run_all(const Options& options, const ReportFn& report = {});

}  // namespace xmodal::selftest
