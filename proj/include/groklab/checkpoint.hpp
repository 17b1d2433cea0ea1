#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "groklab/error.hpp"
#include "groklab/model.hpp"

namespace groklab {

// Checkpoint layout: magic "GROKLAB1", then P, d, H as 32-bit little-endian
// unsigned integers, then E, W1, b1, W2, b2 as little-endian 64-bit reals in
// row-major order.
inline constexpr char kCheckpointMagic[8] = {'G', 'R', 'O', 'K', 'L', 'A', 'B', '1'};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

inline void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
}

inline void read_matrix(std::istream& in, Matrix& m) {
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

} // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorCode::Io, "save_checkpoint: cannot open " + path.string());
    }
    const ModelDims dims = params.dims();
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::write_u32(out, static_cast<std::uint32_t>(dims.vocab));
    detail::write_u32(out, static_cast<std::uint32_t>(dims.embed_dim));
    detail::write_u32(out, static_cast<std::uint32_t>(dims.hidden));
    detail::write_matrix(out, params.embedding);
    detail::write_matrix(out, params.w1);
    detail::write_matrix(out, params.b1);
    detail::write_matrix(out, params.w2);
    detail::write_matrix(out, params.b2);
    if (!out) {
        fail(ErrorCode::Io, "save_checkpoint: write failed for " + path.string());
    }
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::Io, "load_checkpoint: cannot open " + path.string());
    }
    char magic[8] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        fail(ErrorCode::Io, "load_checkpoint: bad magic in " + path.string());
    }
    ModelDims dims;
    dims.vocab = static_cast<int>(detail::read_u32(in));
    dims.embed_dim = static_cast<int>(detail::read_u32(in));
    dims.hidden = static_cast<int>(detail::read_u32(in));
    if (!in) {
        fail(ErrorCode::Io, "load_checkpoint: truncated header in " + path.string());
    }
    dims.validate();
    ModelParams params = ModelParams::zeros(dims);
    detail::read_matrix(in, params.embedding);
    detail::read_matrix(in, params.w1);
    detail::read_matrix(in, params.b1);
    detail::read_matrix(in, params.w2);
    detail::read_matrix(in, params.b2);
    if (!in) {
        fail(ErrorCode::Io, "load_checkpoint: truncated payload in " + path.string());
    }
    char extra = 0;
    if (in.read(&extra, 1); in.gcount() != 0) {
        fail(ErrorCode::Io, "load_checkpoint: trailing bytes in " + path.string());
    }
    return params;
}

} // namespace groklab
