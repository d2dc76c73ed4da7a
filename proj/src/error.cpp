// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/error.hpp"

namespace pspt {

const char* error_kind_name(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Vocabulary: return "vocabulary";
    case ErrorKind::SequenceLength: return "sequence_length";
    case ErrorKind::CheckpointFormat: return "checkpoint_format";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Data: return "data";
    case ErrorKind::Input: return "input";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

} // namespace pspt
