// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace pspt {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

/// Process-wide threshold; defaults to Info.
void set_log_level(LogLevel level);
LogLevel log_level();
/// "error", "info" or "debug"; anything else is a Configuration error.
LogLevel parse_log_level(const std::string& name);

/// Writes one line to stderr when `level` passes the threshold.
void log_message(LogLevel level, const std::string& message);

inline void log_error(const std::string& m) { log_message(LogLevel::Error, m); }
inline void log_info(const std::string& m) { log_message(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log_message(LogLevel::Debug, m); }

} // namespace pspt
