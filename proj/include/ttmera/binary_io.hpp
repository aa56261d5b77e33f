#pragma once

// Little-endian primitives and the MRT1 dense tensor file format:
//   "MRT1" | u16 order D | D x u64 dims | prod(dims) x f64 payload
// The payload follows the first-index-fastest linearization.

#include "ttmera/errors.hpp"
#include "ttmera/tensor.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace ttmera::io {

using Magic = std::array<char, 4>;
inline constexpr Magic kTensorMagic{'M', 'R', 'T', '1'};

inline void write_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }

template <typename UInt>
void write_le(std::ostream& os, UInt v) {
    std::array<char, sizeof(UInt)> buf;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(buf.data(), buf.size());
}

inline void write_u16(std::ostream& os, std::uint16_t v) { write_le(os, v); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_le(os, v); }
inline void write_f64(std::ostream& os, double v) { write_le(os, std::bit_cast<std::uint64_t>(v)); }

inline void read_exact(std::istream& is, char* dst, std::size_t n, const char* what) {
    is.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) throw FormatError(std::string("truncated ") + what);
}

template <typename UInt>
UInt read_le(std::istream& is, const char* what) {
    std::array<unsigned char, sizeof(UInt)> buf;
    read_exact(is, reinterpret_cast<char*>(buf.data()), buf.size(), what);
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
    return v;
}

inline std::uint8_t read_u8(std::istream& is, const char* what) { return read_le<std::uint8_t>(is, what); }
inline std::uint16_t read_u16(std::istream& is, const char* what) { return read_le<std::uint16_t>(is, what); }
inline std::uint64_t read_u64(std::istream& is, const char* what) { return read_le<std::uint64_t>(is, what); }
inline double read_f64(std::istream& is, const char* what) {
    return std::bit_cast<double>(read_le<std::uint64_t>(is, what));
}

inline void write_magic(std::ostream& os, const Magic& m) { os.write(m.data(), m.size()); }

inline void expect_magic(std::istream& is, const Magic& m) {
    Magic got{};
    is.read(got.data(), got.size());
    if (is.gcount() != 4 || got != m) {
        throw FormatError("bad magic: expected " + std::string(m.data(), m.size()));
    }
}

inline void write_payload(std::ostream& os, std::span<const double> data) {
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * 8));
    } else {
        for (double v : data) write_f64(os, v);
    }
}

inline std::vector<double> read_payload(std::istream& is, std::size_t count, const char* what) {
    std::vector<double> data(count);
    if constexpr (std::endian::native == std::endian::little) {
        read_exact(is, reinterpret_cast<char*>(data.data()), count * 8, what);
    } else {
        for (auto& v : data) v = read_f64(is, what);
    }
    return data;
}

// Dims record shared by several formats: u16 order then order x u64.
inline void write_dims(std::ostream& os, const Dims& dims) {
    write_u16(os, static_cast<std::uint16_t>(dims.size()));
    for (auto d : dims) write_u64(os, d);
}

inline Dims read_dims(std::istream& is, const char* what) {
    const std::size_t order = read_u16(is, what);
    Dims dims(order);
    for (auto& d : dims) {
        d = read_u64(is, what);
        if (d == 0) throw FormatError(std::string(what) + ": zero dimension");
    }
    // guard against absurd headers before allocating
    long double total = 1;
    for (auto d : dims) total *= static_cast<long double>(d);
    if (total > static_cast<long double>(kMaxDenseEntries) * 64) {
        throw FormatError(std::string(what) + ": header declares an implausible size");
    }
    return dims;
}

inline void write_tensor(std::ostream& os, const DenseTensor& t) {
    write_magic(os, kTensorMagic);
    write_dims(os, t.dims());
    write_payload(os, t.data());
}

inline DenseTensor read_tensor(std::istream& is) {
    expect_magic(is, kTensorMagic);
    Dims dims = read_dims(is, "MRT1 header");
    const std::size_t n = product(dims);
    check_capacity(n, "read_tensor");
    auto data = read_payload(is, n, "MRT1 payload");
    try {
        return {std::move(dims), std::move(data)};
    } catch (const NumericError&) {
        throw FormatError("MRT1 payload contains non-finite values");
    }
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    return os;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    return is;
}

inline void save_tensor(const std::string& path, const DenseTensor& t) {
    auto os = open_out(path);
    write_tensor(os, t);
    if (!os) throw FormatError("write failed: " + path);
}

inline DenseTensor load_tensor(const std::string& path) {
    auto is = open_in(path);
    return read_tensor(is);
}

} // namespace ttmera::io
