// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "glcanet/errors.hpp"

namespace glcanet {

/// 8-bit raster with interleaved channels (1 = gray, 3 = RGB).
struct Raster {
    std::size_t width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> pixels; // row-major, channels interleaved

    bool operator==(const Raster&) const = default;
};

namespace detail {

inline std::size_t read_header_int(const std::vector<std::uint8_t>& buf, std::size_t& pos, const std::string& path) {
    // Whitespace and '#' comments may separate header fields.
    while (pos < buf.size()) {
        if (std::isspace(buf[pos])) {
            ++pos;
        } else if (buf[pos] == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    std::size_t value = 0, digits = 0;
    while (pos < buf.size() && std::isdigit(buf[pos])) {
        value = value * 10 + static_cast<std::size_t>(buf[pos] - '0');
        if (++digits > 9) throw DataError(path + ": header value too large");
        ++pos;
    }
    if (digits == 0) throw DataError(path + ": malformed netpbm header");
    return value;
}

} // namespace detail

/// Reads binary P5 (gray) or P6 (RGB) with maxval 255.
inline Raster read_netpbm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 2 || buf[0] != 'P' || (buf[1] != '5' && buf[1] != '6')) {
        throw DataError(path + ": not a binary PGM/PPM file");
    }
    Raster r;
    r.channels = buf[1] == '6' ? 3 : 1;
    std::size_t pos = 2;
    r.width = detail::read_header_int(buf, pos, path);
    r.height = detail::read_header_int(buf, pos, path);
    const std::size_t maxval = detail::read_header_int(buf, pos, path);
    if (maxval != 255) throw DataError(path + ": only maxval 255 is supported, got " + std::to_string(maxval));
    if (r.width == 0 || r.height == 0) throw DataError(path + ": empty image");
    if (pos >= buf.size() || !std::isspace(buf[pos])) throw DataError(path + ": malformed netpbm header");
    ++pos;
    const std::size_t n = r.width * r.height * r.channels;
    if (buf.size() - pos < n) throw DataError(path + ": truncated pixel data");
    r.pixels.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos), buf.begin() + static_cast<std::ptrdiff_t>(pos + n));
    return r;
}

inline void write_netpbm(const std::string& path, const Raster& r) {
    if (r.channels != 1 && r.channels != 3) throw UsageError("write_netpbm: channels must be 1 or 3");
    if (r.pixels.size() != r.width * r.height * r.channels) throw UsageError("write_netpbm: pixel count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << (r.channels == 3 ? "P6" : "P5") << '\n' << r.width << ' ' << r.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
    if (!out) throw DataError("failed writing " + path);
}

} // namespace glcanet
