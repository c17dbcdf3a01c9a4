#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <zlib.h>

#include "fxda/core/error.hpp"
#include "fxda/core/tensor.hpp"
#include "fxda/io/bytes.hpp"

// Minimal PNG writer: 8-bit grayscale or RGB, filter 0 scanlines, one IDAT
// chunk, fixed compression settings so identical pixels give identical bytes.

namespace fxda {
namespace detail {

inline void png_u32be(std::string& out, uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void png_chunk(std::string& out, const char type[4], const std::string& data) {
    png_u32be(out, static_cast<uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    uint32_t crc = static_cast<uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
    png_u32be(out, crc);
}

}  // namespace detail

inline std::string encode_png(const Tensor& image) {
    const Shape& s = image.shape();
    if (s.size() != 3 || (s[2] != 1 && s[2] != 3))
        throw ContractError("encode_png wants [h,w,1] or [h,w,3], got rank " +
                            std::to_string(s.size()));
    const int64_t h = s[0], w = s[1], c = s[2];
    if (h < 1 || w < 1) throw ContractError("encode_png: empty image");

    std::string raw;
    raw.reserve(static_cast<size_t>(h * (1 + w * c)));
    const double* px = image.data();
    for (int64_t y = 0; y < h; ++y) {
        raw.push_back('\0');  // filter: none
        for (int64_t x = 0; x < w * c; ++x) {
            double v = px[y * w * c + x];
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            raw.push_back(static_cast<char>(std::lround(v * 255.0)));
        }
    }

    uLongf cap = compressBound(static_cast<uLong>(raw.size()));
    std::string deflated(cap, '\0');
    if (compress2(reinterpret_cast<Bytef*>(deflated.data()), &cap,
                  reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                  6) != Z_OK)
        throw IntegrityError("png deflate failed");
    deflated.resize(cap);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    detail::png_u32be(ihdr, static_cast<uint32_t>(w));
    detail::png_u32be(ihdr, static_cast<uint32_t>(h));
    ihdr.push_back(8);                      // bit depth
    ihdr.push_back(c == 1 ? 0 : 2);         // gray / rgb
    ihdr.push_back(0);                      // deflate
    ihdr.push_back(0);                      // adaptive filtering
    ihdr.push_back(0);                      // no interlace
    detail::png_chunk(out, "IHDR", ihdr);
    detail::png_chunk(out, "IDAT", deflated);
    detail::png_chunk(out, "IEND", "");
    return out;
}

inline void write_png(const std::string& path, const Tensor& image) {
    write_file_bytes(path, encode_png(image));
}

}  // namespace fxda
