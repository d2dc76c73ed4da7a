// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint layout (all integers little-endian):
//
//   "PSPT" | u32 version
//   config:  u32 vocab_size, dim, n_layers, n_heads, max_seq_len, ffn_mult
//   vocab:   u32 count, then per token u32 length + bytes
//   scalars: u32 count, then per entry u32 length + name bytes + f64
//   index:   u32 count, then per buffer u32 length + name bytes, u32 ndim,
//            u32 dims[ndim], u64 byte offset into the payload
//   payload: float32 values
//
// A model checkpoint holds the language model buffers. A prompt checkpoint
// holds "pspt.e1", "pspt.A", "pspt.B" with scalars l_s, r, alpha and the
// model checksum it was trained against.

#pragma once

#include "pspt/adapter.hpp"
#include "pspt/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace pspt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointBuffer {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

struct CheckpointFile {
    ModelConfig config;
    std::vector<std::string> vocab;
    std::map<std::string, double> scalars;
    std::vector<CheckpointBuffer> buffers;

    const CheckpointBuffer& buffer(const std::string& name) const;
    double scalar(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const CheckpointFile& file);
void save_checkpoint_file(const std::string& path, const CheckpointFile& file);
/// Errors are CheckpointFormat and name the field that failed.
CheckpointFile read_checkpoint(std::istream& in);
CheckpointFile load_checkpoint_file(const std::string& path);

void save_checkpoint(const MicroLM<float>& model, const std::string& path);
/// The result is frozen.
MicroLM<float> load_checkpoint(const std::string& path);
MicroLM<float> model_from_checkpoint(const CheckpointFile& file);
CheckpointFile model_checkpoint(const MicroLM<float>& model);

void save_params(const PsptParams<float>& params, const MicroLM<float>& model, const std::string& path);
/// Checks the stored config and vocabulary against `model`. The result is
/// not trainable.
PsptParams<float> load_params(const std::string& path, const MicroLM<float>& model);
CheckpointFile params_checkpoint(const PsptParams<float>& params, const MicroLM<float>& model);
PsptParams<float> params_from_checkpoint(const CheckpointFile& file, const MicroLM<float>& model);

} // namespace pspt
