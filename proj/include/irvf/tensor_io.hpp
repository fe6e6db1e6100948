#pragma once

// Tensor file format, bit-exact: magic "IRVF", then unsigned 32-bit
// little-endian C, H, W, then C*H*W IEEE-754 32-bit little-endian floats in
// channel-major row-major order.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "irvf/binio.hpp"
#include "irvf/tensor.hpp"

namespace irvf {

inline void encode_tensor_record(std::vector<std::uint8_t>& out, const TensorF& t) {
    out.push_back('I');
    out.push_back('R');
    out.push_back('V');
    out.push_back('F');
    binio::put_u32(out, static_cast<std::uint32_t>(t.c()));
    binio::put_u32(out, static_cast<std::uint32_t>(t.h()));
    binio::put_u32(out, static_cast<std::uint32_t>(t.w()));
    for (std::size_t i = 0; i < t.size(); ++i) binio::put_f32(out, t[i]);
}

inline TensorF decode_tensor_record(binio::Reader& r) {
    const std::string magic = r.bytes(4);
    if (magic != "IRVF") throw std::runtime_error("tensor record: bad magic '" + magic + "'");
    const std::uint32_t c = r.u32();
    const std::uint32_t h = r.u32();
    const std::uint32_t w = r.u32();
    TensorF t({static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.f32();
    return t;
}

inline void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    const std::streamsize n = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
    f.read(reinterpret_cast<char*>(bytes.data()), n);
    if (!f) throw std::runtime_error("read failed: " + path);
    return bytes;
}

inline void write_tensor_file(const std::string& path, const TensorF& t) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + 4 * t.size());
    encode_tensor_record(out, t);
    write_bytes(path, out);
}

inline TensorF read_tensor_file(const std::string& path) {
    const auto bytes = read_bytes(path);
    binio::Reader r(bytes.data(), bytes.size());
    TensorF t = decode_tensor_record(r);
    if (!r.done()) throw std::runtime_error("tensor file has trailing bytes: " + path);
    return t;
}

template <typename T>
void write_tensor_file_as(const std::string& path, const Tensor<T>& t) {
    write_tensor_file(path, t.template cast<float>());
}

}  // namespace irvf
