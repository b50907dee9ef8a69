#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mmgr/error.hpp"
#include "mmgr/tensor.hpp"

namespace mmgr {

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw NotFoundError("cannot open " + path.string());
    f.seekg(0, std::ios::end);
    std::streamoff len = f.tellg();
    f.seekg(0);
    std::vector<unsigned char> buf((std::size_t)len);
    if (len > 0) f.read(reinterpret_cast<char*>(buf.data()), len);
    if (!f) throw FormatError("short read on " + path.string());
    return buf;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& buf) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(buf.data()), (std::streamsize)buf.size());
    if (!f) throw Error("short write on " + path.string());
}

// Skips PNM whitespace and '#' comments, then parses a decimal token.
inline long pnm_token(const std::vector<unsigned char>& buf, std::size_t& pos,
                      const std::string& file) {
    while (pos < buf.size()) {
        unsigned char c = buf[pos];
        if (c == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= buf.size() || buf[pos] < '0' || buf[pos] > '9')
        throw FormatError(file + ": malformed PNM header");
    long v = 0;
    while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
        v = v * 10 + (buf[pos] - '0');
        ++pos;
    }
    return v;
}

inline void put_u32le(std::vector<unsigned char>& buf, std::uint32_t v) {
    buf.push_back((unsigned char)(v & 0xff));
    buf.push_back((unsigned char)((v >> 8) & 0xff));
    buf.push_back((unsigned char)((v >> 16) & 0xff));
    buf.push_back((unsigned char)((v >> 24) & 0xff));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
    return (std::uint32_t)p[0] | ((std::uint32_t)p[1] << 8) | ((std::uint32_t)p[2] << 16) |
           ((std::uint32_t)p[3] << 24);
}

inline void put_f32le(std::vector<unsigned char>& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32le(buf, bits);
}

inline float get_f32le(const unsigned char* p) {
    std::uint32_t bits = get_u32le(p);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline unsigned char quantize8(double v) {
    double x = v * 255.0 + 0.5;
    if (x < 0.0) x = 0.0;
    if (x > 255.0) x = 255.0;
    return (unsigned char)x;
}

} // namespace detail

// --- PPM (P6, 8-bit) --------------------------------------------------------
// Tensors are planar [3,H,W] in [0,1]; files are interleaved bytes.

template <typename T>
void write_ppm(const std::filesystem::path& path, const Tensor<T>& img) {
    if (img.rank() != 3 || img.dim(0) != 3)
        throw ShapeError("write_ppm: expected [3,H,W], got " + shape_str(img.shape()));
    const std::size_t H = img.dim(1), W = img.dim(2);
    std::string header = "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
    std::vector<unsigned char> buf(header.begin(), header.end());
    buf.reserve(buf.size() + 3 * H * W);
    const T* r = img.data();
    const T* g = r + H * W;
    const T* b = g + H * W;
    for (std::size_t i = 0; i < H * W; ++i) {
        buf.push_back(detail::quantize8((double)r[i]));
        buf.push_back(detail::quantize8((double)g[i]));
        buf.push_back(detail::quantize8((double)b[i]));
    }
    detail::write_file_bytes(path, buf);
}

template <typename T>
Tensor<T> read_ppm(const std::filesystem::path& path) {
    auto buf = detail::read_file_bytes(path);
    const std::string file = path.string();
    if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '6')
        throw FormatError(file + ": not a P6 PPM");
    std::size_t pos = 2;
    long W = detail::pnm_token(buf, pos, file);
    long H = detail::pnm_token(buf, pos, file);
    long maxval = detail::pnm_token(buf, pos, file);
    if (maxval != 255) throw FormatError(file + ": unsupported maxval " + std::to_string(maxval));
    ++pos;  // single whitespace after maxval
    if (W < 1 || H < 1 || pos + (std::size_t)(3 * W * H) > buf.size())
        throw FormatError(file + ": truncated pixel data");
    Tensor<T> img({3, (std::size_t)H, (std::size_t)W});
    T* r = img.data();
    T* g = r + (std::size_t)(H * W);
    T* b = g + (std::size_t)(H * W);
    for (long i = 0; i < H * W; ++i) {
        r[i] = (T)(buf[pos + 3 * (std::size_t)i] / 255.0);
        g[i] = (T)(buf[pos + 3 * (std::size_t)i + 1] / 255.0);
        b[i] = (T)(buf[pos + 3 * (std::size_t)i + 2] / 255.0);
    }
    return img;
}

// --- PGM (P5, 8-bit), stored as [1,H,W] -------------------------------------

template <typename T>
void write_pgm(const std::filesystem::path& path, const Tensor<T>& img) {
    if (img.rank() != 3 || img.dim(0) != 1)
        throw ShapeError("write_pgm: expected [1,H,W], got " + shape_str(img.shape()));
    const std::size_t H = img.dim(1), W = img.dim(2);
    std::string header = "P5\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
    std::vector<unsigned char> buf(header.begin(), header.end());
    buf.reserve(buf.size() + H * W);
    for (std::size_t i = 0; i < H * W; ++i) buf.push_back(detail::quantize8((double)img[i]));
    detail::write_file_bytes(path, buf);
}

template <typename T>
Tensor<T> read_pgm(const std::filesystem::path& path) {
    auto buf = detail::read_file_bytes(path);
    const std::string file = path.string();
    if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5')
        throw FormatError(file + ": not a P5 PGM");
    std::size_t pos = 2;
    long W = detail::pnm_token(buf, pos, file);
    long H = detail::pnm_token(buf, pos, file);
    long maxval = detail::pnm_token(buf, pos, file);
    if (maxval != 255) throw FormatError(file + ": unsupported maxval " + std::to_string(maxval));
    ++pos;
    if (W < 1 || H < 1 || pos + (std::size_t)(W * H) > buf.size())
        throw FormatError(file + ": truncated pixel data");
    Tensor<T> img({1, (std::size_t)H, (std::size_t)W});
    for (long i = 0; i < H * W; ++i) img[(std::size_t)i] = (T)(buf[pos + (std::size_t)i] / 255.0);
    return img;
}

// --- Flow field file ---------------------------------------------------------
// 16-byte header: magic "FLO1", u32 height, u32 width, u32 channel count (2).
// Payload: u plane then v plane, 32-bit little-endian floats.

template <typename T>
void write_flo(const std::filesystem::path& path, const Tensor<T>& uv) {
    if (uv.rank() != 3 || uv.dim(0) != 2)
        throw ShapeError("write_flo: expected [2,H,W], got " + shape_str(uv.shape()));
    const std::size_t H = uv.dim(1), W = uv.dim(2);
    std::vector<unsigned char> buf;
    buf.reserve(16 + 8 * H * W);
    buf.insert(buf.end(), {'F', 'L', 'O', '1'});
    detail::put_u32le(buf, (std::uint32_t)H);
    detail::put_u32le(buf, (std::uint32_t)W);
    detail::put_u32le(buf, 2u);
    for (std::size_t i = 0; i < 2 * H * W; ++i) detail::put_f32le(buf, (float)uv[i]);
    detail::write_file_bytes(path, buf);
}

template <typename T>
Tensor<T> read_flo(const std::filesystem::path& path) {
    auto buf = detail::read_file_bytes(path);
    const std::string file = path.string();
    if (buf.size() < 16 || buf[0] != 'F' || buf[1] != 'L' || buf[2] != 'O' || buf[3] != '1')
        throw FormatError(file + ": bad flow magic");
    const std::uint32_t H = detail::get_u32le(buf.data() + 4);
    const std::uint32_t W = detail::get_u32le(buf.data() + 8);
    const std::uint32_t C = detail::get_u32le(buf.data() + 12);
    if (C != 2) throw FormatError(file + ": unsupported flow channel count");
    const std::size_t need = 16 + (std::size_t)8 * H * W;
    if (H < 1 || W < 1 || buf.size() < need)
        throw FormatError(file + ": truncated at offset " + std::to_string(buf.size()));
    Tensor<T> uv({2, (std::size_t)H, (std::size_t)W});
    for (std::size_t i = 0; i < (std::size_t)2 * H * W; ++i)
        uv[i] = (T)detail::get_f32le(buf.data() + 16 + 4 * i);
    return uv;
}

} // namespace mmgr
