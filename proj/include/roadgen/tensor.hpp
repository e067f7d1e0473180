// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "roadgen/errors.hpp"

namespace roadgen {

/// Dense channels x rows x cols array of doubles, row-major within each channel.
struct Tensor3 {
    int channels = 0;
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(int c, int r, int k, double fill = 0.0)
        : channels(c), rows(r), cols(k), data(static_cast<std::size_t>(c) * r * k, fill) {
        if (c <= 0 || r <= 0 || k <= 0)
            throw InvalidArgument("tensor: dimensions must be positive");
    }

    std::size_t index(int c, int i, int j) const {
        return (static_cast<std::size_t>(c) * rows + i) * cols + j;
    }
    double& at(int c, int i, int j) { return data[index(c, i, j)]; }
    double at(int c, int i, int j) const { return data[index(c, i, j)]; }

    std::size_t plane_size() const { return static_cast<std::size_t>(rows) * cols; }
    bool same_spatial(const Tensor3& o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const Tensor3&) const = default;
};

// --- flat binary tensor files -------------------------------------------------
//
// Little-endian layout:
//   char[4]  magic "RGTN"
//   uint32   rank
//   uint32   dims[rank]
//   uint32   dtype (1 = float32)
//   float32  payload[prod(dims)], row-major

inline constexpr std::array<char, 4> kTensorMagic = {'R', 'G', 'T', 'N'};
inline constexpr std::uint32_t kDtypeF32 = 1;

struct TensorFile {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
};

namespace detail {

template <typename T>
void write_le(std::ostream& out, T v) {
    static_assert(sizeof(T) == 4);
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    if constexpr (std::endian::native == std::endian::big)
        bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
    out.write(reinterpret_cast<const char*>(&bits), 4);
}

template <typename T>
T read_le(std::istream& in) {
    static_assert(sizeof(T) == 4);
    std::uint32_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), 4);
    if (in.gcount() != 4)
        throw IoError("tensor file: truncated");
    if constexpr (std::endian::native == std::endian::big)
        bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
    T v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace detail

inline void write_tensor_file(const std::filesystem::path& path, const TensorFile& t) {
    std::size_t n = 1;
    for (auto d : t.dims) n *= d;
    if (n != t.values.size())
        throw ShapeMismatch("tensor file: payload size does not match dims");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write tensor file " + path.string());
    out.write(kTensorMagic.data(), 4);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) detail::write_le<std::uint32_t>(out, d);
    detail::write_le<std::uint32_t>(out, kDtypeF32);
    for (float v : t.values) detail::write_le<float>(out, v);
}

inline TensorFile read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open tensor file " + path.string());
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (magic != kTensorMagic)
        throw IoError("tensor file " + path.string() + ": bad magic");
    TensorFile t;
    const auto rank = detail::read_le<std::uint32_t>(in);
    if (rank == 0 || rank > 8)
        throw IoError("tensor file: unsupported rank " + std::to_string(rank));
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        t.dims.push_back(detail::read_le<std::uint32_t>(in));
        n *= t.dims.back();
    }
    if (detail::read_le<std::uint32_t>(in) != kDtypeF32)
        throw IoError("tensor file: only float32 payloads are supported");
    t.values.resize(n);
    for (auto& v : t.values) v = detail::read_le<float>(in);
    return t;
}

inline Tensor3 to_tensor3(const TensorFile& f) {
    if (f.dims.size() != 3)
        throw ShapeMismatch("expected a rank-3 tensor");
    Tensor3 t(static_cast<int>(f.dims[0]), static_cast<int>(f.dims[1]), static_cast<int>(f.dims[2]));
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = f.values[i];
    return t;
}

inline TensorFile to_tensor_file(const Tensor3& t) {
    TensorFile f{{static_cast<std::uint32_t>(t.channels), static_cast<std::uint32_t>(t.rows),
                  static_cast<std::uint32_t>(t.cols)},
                 {}};
    f.values.reserve(t.data.size());
    for (double v : t.data) f.values.push_back(static_cast<float>(v));
    return f;
}

}  // namespace roadgen
