#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "fxda/core/error.hpp"
#include "fxda/core/tensor.hpp"

// Little-endian byte stream helpers for the checkpoint container. The writer
// accumulates into memory so a crc of the whole payload can be appended; the
// reader validates bounds on every access and reports truncation rather than
// reading garbage.

namespace fxda {

class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }

    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }

    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }

    void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }

    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }

    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    void doubles(const double* p, int64_t n) {
        u32(static_cast<uint32_t>(n));
        for (int64_t i = 0; i < n; ++i) f64(p[i]);
    }

    void tensor(const Tensor& t) { doubles(t.data(), t.size()); }

    const std::string& bytes() const { return buf_; }

    uint32_t crc() const {
        return static_cast<uint32_t>(
            ::crc32(0L, reinterpret_cast<const Bytef*>(buf_.data()),
                    static_cast<uInt>(buf_.size())));
    }

private:
    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::string bytes) : buf_(std::move(bytes)) {}

    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(buf_[pos_++]);
    }

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<uint8_t>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<uint8_t>(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }

    int64_t i64() { return static_cast<int64_t>(u64()); }

    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::string str() {
        uint32_t n = u32();
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    // reads a length-prefixed run of doubles into a tensor that must already
    // have the matching element count
    void into_tensor(Tensor& t, const std::string& what) {
        uint32_t n = u32();
        if (static_cast<int64_t>(n) != t.size())
            throw IntegrityError("checkpoint: " + what + " holds " + std::to_string(n) +
                                 " values, expected " + std::to_string(t.size()));
        for (int64_t i = 0; i < t.size(); ++i) t[i] = f64();
    }

    bool exhausted() const { return pos_ == buf_.size(); }

private:
    void need(size_t n) {
        if (pos_ + n > buf_.size()) throw IntegrityError("checkpoint: truncated payload");
    }

    std::string buf_;
    size_t pos_ = 0;
};

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IntegrityError("cannot open " + path + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IntegrityError("short write to " + path);
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IntegrityError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return bytes;
}

}  // namespace fxda
