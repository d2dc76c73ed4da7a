// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Error taxonomy shared by every module. Core code throws pspt::Error; the C
// API boundary converts the kind into a status code.

#pragma once

#include <stdexcept>
#include <string>

namespace pspt {

enum class ErrorKind {
    Dimension,        // tensor shape mismatch
    Numeric,          // NaN/Inf or non-finite loss
    Contract,         // violated precondition (non-scalar loss, empty question, ...)
    Vocabulary,       // token id out of range
    SequenceLength,   // input longer than max_seq_len
    CheckpointFormat, // bad magic/version/truncation
    Configuration,    // invalid config values or unknown keys
    Data,             // dataset/corpus unusable
    Input,            // bad run file contents, unknown ids, duplicates
    Io,               // file system failures
};

const char* error_kind_name(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace pspt
