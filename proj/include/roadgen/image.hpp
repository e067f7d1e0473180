// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "roadgen/errors.hpp"

namespace roadgen {

/// Interleaved 8-bit raster, row-major, 1 (gray) or 3 (RGB) channels.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {
        if (w <= 0 || h <= 0 || (c != 1 && c != 3))
            throw InvalidArgument("image: invalid dimensions");
    }

    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    std::uint8_t& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    std::uint8_t at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

    bool same_shape(const Image& o) const { return width == o.width && height == o.height && channels == o.channels; }
    bool operator==(const Image&) const = default;
};

/// Binary per-pixel mask (values 0/1), row-major.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    Mask() = default;
    Mask(int w, int h, std::uint8_t fill = 0) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0)
            throw InvalidArgument("mask: invalid dimensions");
    }

    std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits) n += b != 0;
        return n;
    }
    bool same_shape(const Mask& o) const { return width == o.width && height == o.height; }
    bool operator==(const Mask&) const = default;
};

// --- Netpbm (binary P5 / P6) ------------------------------------------------

namespace detail {

inline int read_pnm_int(std::istream& in) {
    int c = in.peek();
    while (c == '#' || std::isspace(c)) {
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
        } else {
            in.get();
        }
        c = in.peek();
    }
    int value = 0;
    if (!(in >> value))
        throw IoError("netpbm: malformed header");
    return value;
}

}  // namespace detail

inline Image read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open image " + path.string());
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    int channels = 0;
    if (magic == "P6")
        channels = 3;
    else if (magic == "P5")
        channels = 1;
    else
        throw IoError("unsupported image format in " + path.string() + " (expected binary PPM/PGM)");
    const int w = detail::read_pnm_int(in);
    const int h = detail::read_pnm_int(in);
    const int maxval = detail::read_pnm_int(in);
    if (maxval != 255)
        throw IoError("netpbm: only 8-bit images are supported");
    in.get();
    Image img(w, h, channels);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
        throw IoError("netpbm: truncated payload in " + path.string());
    return img;
}

inline void write_image(const std::filesystem::path& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write image " + path.string());
    out << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

/// Masks are stored as single-channel 0/255 rasters.
inline void write_mask(const std::filesystem::path& path, const Mask& m) {
    Image img(m.width, m.height, 1);
    for (std::size_t i = 0; i < m.bits.size(); ++i) img.data[i] = m.bits[i] ? 255 : 0;
    write_image(path, img);
}

inline Mask read_mask(const std::filesystem::path& path) {
    const Image img = read_image(path);
    if (img.channels != 1)
        throw IoError("mask " + path.string() + " must be single-channel");
    Mask m(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i) m.bits[i] = img.data[i] >= 128 ? 1 : 0;
    return m;
}

}  // namespace roadgen
