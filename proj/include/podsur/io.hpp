// Binary container primitives, CSV formatting and content hashing shared by
// the snapshot/basis/model persistence code. All multi-byte values are
// little-endian on disk regardless of host byte order.
#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace podsur {

/// Runtime failure (I/O, solver breakdown, malformed container, ...).
/// Precondition violations throw std::invalid_argument instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace io {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os) throw Error("io: write failed");
}

inline void read_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw Error("io: truncated input");
}

inline void write_u8(std::ostream& os, std::uint8_t v) { write_bytes(os, &v, 1); }

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    write_bytes(os, b, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    write_bytes(os, b, 8);
}

inline void write_f64(std::ostream& os, double v) {
    write_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline std::uint8_t read_u8(std::istream& is) {
    std::uint8_t v;
    read_bytes(is, &v, 1);
    return v;
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    read_bytes(is, b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    read_bytes(is, b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline double read_f64(std::istream& is) {
    return std::bit_cast<double>(read_u64(is));
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    if (!s.empty()) write_bytes(os, s.data(), s.size());
}

inline std::string read_string(std::istream& is, std::uint64_t max_len = 1u << 20) {
    const std::uint64_t n = read_u64(is);
    if (n > max_len) throw Error("io: string length out of range");
    std::string s(static_cast<std::size_t>(n), '\0');
    if (n) read_bytes(is, s.data(), static_cast<std::size_t>(n));
    return s;
}

inline void write_f64_array(std::ostream& os, const std::vector<double>& v) {
    for (double x : v) write_f64(os, x);
}

inline void read_f64_array(std::istream& is, std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = read_f64(is);
}

inline void write_magic(std::ostream& os, const char magic[4]) {
    write_bytes(os, magic, 4);
}

inline void expect_magic(std::istream& is, const char magic[4], const char* what) {
    char got[4];
    read_bytes(is, got, 4);
    for (int i = 0; i < 4; ++i)
        if (got[i] != magic[i])
            throw Error(std::string("io: bad magic, not a ") + what + " file");
}

inline void expect_eof(std::istream& is, const char* what) {
    if (is.peek() != std::char_traits<char>::eof())
        throw Error(std::string("io: trailing data in ") + what + " file");
}

/// Shortest decimal round-trip representation (17 significant digits).
inline std::string full_precision(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// FNV-1a, used for artifact/config change detection in the run manifest.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t hash_string(const std::string& s) {
    return fnv1a64(s.data(), s.size());
}

inline std::uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("io: cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof buf);
        const auto n = static_cast<std::size_t>(f.gcount());
        if (n) h = fnv1a64(buf, n, h);
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace io
}  // namespace podsur
