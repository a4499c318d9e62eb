#pragma once

// Shared error types plus small hashing / binary-IO helpers used across the
// library. Everything here is deliberately tiny; heavier utilities belong in
// the module that needs them.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace windsim {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input files (bad JSON, bad magic, truncation).
class ParseError : public Error {
public:
    using Error::Error;
};

// Structurally valid input that violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// FNV-1a, 64 bit. Used for config hashes and the run manifest.
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t seed = 14695981039346656037ull)
{
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s)
{
    return fnv1a64(s.data(), s.size());
}

inline std::uint64_t hash_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open file for hashing: " + path.string());
    char buf[1 << 16];
    std::uint64_t h = 14695981039346656037ull;
    while (in) {
        in.read(buf, sizeof buf);
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return h;
}

inline std::string hex_u64(std::uint64_t v)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Round-trip-exact decimal formatting; all persisted doubles go through this
// so repeated runs emit byte-identical text.
inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
void write_pod(std::ostream& out, const T& value)
{
    static_assert(std::is_trivially_copyable_v<T>);
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
void read_pod(std::istream& in, T& value, const char* what = "file")
{
    static_assert(std::is_trivially_copyable_v<T>);
    in.read(reinterpret_cast<char*>(&value), sizeof value);
    if (in.gcount() != static_cast<std::streamsize>(sizeof value))
        throw ParseError(std::string("truncated ") + what);
}

} // namespace windsim
