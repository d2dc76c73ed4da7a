// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/checkpoint.hpp"

#include "pspt/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace pspt {

namespace {

constexpr char kMagic[4] = {'P', 'S', 'P', 'T'};

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void str(const std::string& s) {
        u32(narrow(s.size(), "string length"));
        bytes(s.data(), s.size());
    }
    static std::uint32_t narrow(std::size_t v, const char* what) {
        if (v > std::numeric_limits<std::uint32_t>::max()) {
            fail(ErrorKind::CheckpointFormat, std::string(what) + " does not fit in 32 bits");
        }
        return static_cast<std::uint32_t>(v);
    }
    const std::vector<char>& data() const { return buf_; }

private:
    std::vector<char> buf_;
};

class Reader {
public:
    explicit Reader(std::vector<char> data) : data_(std::move(data)) {}

    void need(std::size_t n, const std::string& field) const {
        if (data_.size() - pos_ < n) fail(ErrorKind::CheckpointFormat, "checkpoint truncated in " + field);
    }
    std::uint32_t u32(const std::string& field) {
        need(4, field);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const std::string& field) {
        need(8, field);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64(const std::string& field) { return std::bit_cast<double>(u64(field)); }
    std::string str(const std::string& field) {
        const std::uint32_t n = u32(field + " length");
        need(n, field);
        std::string s(data_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    std::string raw(std::size_t n, const std::string& field) {
        need(n, field);
        std::string s(data_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }
    std::size_t size() const { return data_.size(); }
    const char* at(std::size_t p) const { return data_.data() + p; }

private:
    std::vector<char> data_;
    std::size_t pos_ = 0;
};

} // namespace

const CheckpointBuffer& CheckpointFile::buffer(const std::string& name) const {
    for (const auto& b : buffers) {
        if (b.name == name) return b;
    }
    fail(ErrorKind::CheckpointFormat, "checkpoint has no buffer '" + name + "'");
}

double CheckpointFile::scalar(const std::string& name) const {
    auto it = scalars.find(name);
    if (it == scalars.end()) fail(ErrorKind::CheckpointFormat, "checkpoint has no scalar '" + name + "'");
    return it->second;
}

void write_checkpoint(std::ostream& out, const CheckpointFile& file) {
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);
    const auto& c = file.config;
    for (std::size_t v : {c.vocab_size, c.dim, c.n_layers, c.n_heads, c.max_seq_len, c.ffn_mult}) {
        w.u32(Writer::narrow(v, "config field"));
    }
    w.u32(Writer::narrow(file.vocab.size(), "vocab count"));
    for (const auto& t : file.vocab) w.str(t);
    w.u32(Writer::narrow(file.scalars.size(), "scalar count"));
    for (const auto& [name, value] : file.scalars) {
        w.str(name);
        w.f64(value);
    }
    w.u32(Writer::narrow(file.buffers.size(), "buffer count"));
    std::uint64_t offset = 0;
    for (const auto& b : file.buffers) {
        if (shape_numel(b.shape) != b.data.size()) {
            fail(ErrorKind::Dimension, "buffer '" + b.name + "' has shape " + shape_str(b.shape) + " but " +
                                           std::to_string(b.data.size()) + " values");
        }
        w.str(b.name);
        w.u32(Writer::narrow(b.shape.size(), "ndim"));
        for (std::size_t d : b.shape) w.u32(Writer::narrow(d, "dimension"));
        w.u64(offset);
        offset += b.data.size() * sizeof(float);
    }
    for (const auto& b : file.buffers) {
        for (float v : b.data) w.f32(v);
    }
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
}

void save_checkpoint_file(const std::string& path, const CheckpointFile& file) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write checkpoint '" + path + "'");
    write_checkpoint(out, file);
    out.flush();
    if (!out) fail(ErrorKind::Io, "failed writing checkpoint '" + path + "'");
}

CheckpointFile read_checkpoint(std::istream& in) {
    std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    Reader r(std::move(bytes));
    if (r.raw(4, "magic") != std::string(kMagic, 4)) {
        fail(ErrorKind::CheckpointFormat, "checkpoint magic is not \"PSPT\"");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        fail(ErrorKind::CheckpointFormat, "checkpoint version " + std::to_string(version) +
                                              " is not supported (expected " +
                                              std::to_string(kCheckpointVersion) + ")");
    }
    CheckpointFile f;
    f.config.vocab_size = r.u32("config.vocab_size");
    f.config.dim = r.u32("config.dim");
    f.config.n_layers = r.u32("config.n_layers");
    f.config.n_heads = r.u32("config.n_heads");
    f.config.max_seq_len = r.u32("config.max_seq_len");
    f.config.ffn_mult = r.u32("config.ffn_mult");
    const std::uint32_t n_vocab = r.u32("vocab count");
    for (std::uint32_t i = 0; i < n_vocab; ++i) f.vocab.push_back(r.str("vocab entry " + std::to_string(i)));
    const std::uint32_t n_scalars = r.u32("scalar count");
    for (std::uint32_t i = 0; i < n_scalars; ++i) {
        std::string name = r.str("scalar name " + std::to_string(i));
        f.scalars[name] = r.f64("scalar '" + name + "'");
    }
    const std::uint32_t n_buffers = r.u32("buffer count");
    std::vector<std::uint64_t> offsets;
    for (std::uint32_t i = 0; i < n_buffers; ++i) {
        CheckpointBuffer b;
        b.name = r.str("buffer name " + std::to_string(i));
        const std::uint32_t ndim = r.u32("ndim of buffer '" + b.name + "'");
        if (ndim > 8) fail(ErrorKind::CheckpointFormat, "ndim of buffer '" + b.name + "' is implausible");
        for (std::uint32_t d = 0; d < ndim; ++d) b.shape.push_back(r.u32("shape of buffer '" + b.name + "'"));
        offsets.push_back(r.u64("offset of buffer '" + b.name + "'"));
        f.buffers.push_back(std::move(b));
    }
    const std::size_t payload = r.pos();
    const std::size_t payload_size = r.size() - payload;
    for (std::size_t i = 0; i < f.buffers.size(); ++i) {
        auto& b = f.buffers[i];
        const std::size_t n = shape_numel(b.shape);
        if (offsets[i] > payload_size || n * sizeof(float) > payload_size - offsets[i]) {
            fail(ErrorKind::CheckpointFormat, "checkpoint truncated in payload of buffer '" + b.name + "'");
        }
        b.data.resize(n);
        const char* p = r.at(payload + offsets[i]);
        for (std::size_t k = 0; k < n; ++k) {
            std::uint32_t v = 0;
            for (int j = 0; j < 4; ++j) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[4 * k + j])) << (8 * j);
            b.data[k] = std::bit_cast<float>(v);
        }
    }
    return f;
}

CheckpointFile load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open checkpoint '" + path + "'");
    return read_checkpoint(in);
}

CheckpointFile model_checkpoint(const MicroLM<float>& model) {
    CheckpointFile f;
    f.config = model.config();
    f.vocab = model.vocab().tokens();
    for (const auto& [name, t] : model.named_parameters()) {
        f.buffers.push_back({name, t.shape(), std::vector<float>(t.data().begin(), t.data().end())});
    }
    return f;
}

MicroLM<float> model_from_checkpoint(const CheckpointFile& file) {
    Vocabulary vocab = Vocabulary::from_tokens(file.vocab);
    if (vocab.size() != file.config.vocab_size) {
        fail(ErrorKind::CheckpointFormat, "config.vocab_size " + std::to_string(file.config.vocab_size) +
                                              " disagrees with " + std::to_string(vocab.size()) +
                                              " vocabulary entries");
    }
    try {
        file.config.validate();
    } catch (const Error& e) {
        fail(ErrorKind::CheckpointFormat, std::string("checkpoint config: ") + e.what());
    }
    MicroLM<float> model(file.config, std::move(vocab));
    for (auto& [name, t] : model.named_parameters()) {
        const auto& b = file.buffer(name);
        if (b.shape != t.shape()) {
            fail(ErrorKind::CheckpointFormat, "buffer '" + name + "' has shape " + shape_str(b.shape) +
                                                  ", expected " + shape_str(t.shape()));
        }
        Tensor<float> handle = t;
        std::copy(b.data.begin(), b.data.end(), handle.mutable_data().begin());
    }
    return model;
}

void save_checkpoint(const MicroLM<float>& model, const std::string& path) {
    save_checkpoint_file(path, model_checkpoint(model));
}

MicroLM<float> load_checkpoint(const std::string& path) { return model_from_checkpoint(load_checkpoint_file(path)); }

CheckpointFile params_checkpoint(const PsptParams<float>& params, const MicroLM<float>& model) {
    CheckpointFile f;
    f.config = model.config();
    f.vocab = model.vocab().tokens();
    f.scalars["l_s"] = static_cast<double>(params.soft_prompt.length());
    f.scalars["r"] = static_cast<double>(params.adapter.rank());
    f.scalars["alpha"] = params.adapter.alpha;
    f.scalars["model_checksum"] = static_cast<double>(model.checksum());
    for (const auto& [name, t] : params.named_parameters()) {
        f.buffers.push_back({name, t.shape(), std::vector<float>(t.data().begin(), t.data().end())});
    }
    return f;
}

PsptParams<float> params_from_checkpoint(const CheckpointFile& file, const MicroLM<float>& model) {
    if (!(file.config == model.config())) {
        fail(ErrorKind::CheckpointFormat, "prompt checkpoint config does not match the model");
    }
    if (file.vocab != model.vocab().tokens()) {
        fail(ErrorKind::CheckpointFormat, "prompt checkpoint vocabulary does not match the model");
    }
    const auto stored = file.scalars.find("model_checksum");
    if (stored != file.scalars.end() && stored->second != static_cast<double>(model.checksum())) {
        fail(ErrorKind::CheckpointFormat, "prompt checkpoint was trained against a different model (checksum)");
    }
    const std::size_t l_s = static_cast<std::size_t>(file.scalar("l_s"));
    const std::size_t r = static_cast<std::size_t>(file.scalar("r"));
    const std::size_t dim = model.config().dim, vs = model.config().vocab_size;
    auto take = [&](const char* name, Shape shape) {
        const auto& b = file.buffer(name);
        if (b.shape != shape) {
            fail(ErrorKind::CheckpointFormat, std::string("buffer '") + name + "' has shape " + shape_str(b.shape) +
                                                  ", expected " + shape_str(shape));
        }
        return Tensor<float>::from(std::move(shape), b.data);
    };
    PsptParams<float> p;
    p.soft_prompt.e1 = take("pspt.e1", {l_s, dim});
    p.adapter.A = take("pspt.A", {vs, r});
    p.adapter.B = take("pspt.B", {r, dim});
    p.adapter.alpha = file.scalar("alpha");
    if (!(p.adapter.alpha > 0.0)) fail(ErrorKind::CheckpointFormat, "scalar 'alpha' must be positive");
    return p;
}

void save_params(const PsptParams<float>& params, const MicroLM<float>& model, const std::string& path) {
    save_checkpoint_file(path, params_checkpoint(params, model));
}

PsptParams<float> load_params(const std::string& path, const MicroLM<float>& model) {
    return params_from_checkpoint(load_checkpoint_file(path), model);
}

} // namespace pspt
