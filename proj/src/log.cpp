// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/log.hpp"

#include "pspt/error.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace pspt {

namespace {

std::atomic<int> g_level{static_cast<int>(LogLevel::Info)};
std::mutex g_mutex;

} // namespace

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }

LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

LogLevel parse_log_level(const std::string& name) {
    if (name == "error") return LogLevel::Error;
    if (name == "info") return LogLevel::Info;
    if (name == "debug") return LogLevel::Debug;
    fail(ErrorKind::Configuration, "log level must be error, info or debug, got '" + name + "'");
}

void log_message(LogLevel level, const std::string& message) {
    if (static_cast<int>(level) > g_level.load()) return;
    static const char* const names[] = {"error", "info", "debug"};
    std::lock_guard lock(g_mutex);
    std::cerr << "[pspt " << names[static_cast<int>(level)] << "] " << message << '\n';
}

} // namespace pspt
