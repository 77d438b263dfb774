// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "med3d/runconfig.hpp"

namespace med3d::app {

/// level 1: progress, 2: detail.
using LogFn = std::function<void(int level, const std::string& message)>;

/// gen-synthetic, normalize, pretrain, transfer-seg, transfer-cls, eval,
/// experiment.
const std::vector<std::string_view>& commands();

/// Exit status of a command that ran to the end.
enum class Outcome { kComplete = 0, kPartial = 3 };

/// Runs one command. Writes `<outdir>/resolved_config` before any other
/// work. Errors propagate as med3d::Error; kPartial means some requested
/// items were skipped (and reported through log).
Outcome run(std::string_view command, RunConfig& cfg, const LogFn& log);

}  // namespace med3d::app
