#pragma once

#include <bit>
#include <cstddef>
#include <filesystem>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nids {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file or record. `line` is 1-based; 0 when unknown.
class ParseError : public Error {
public:
    ParseError(std::string file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), file_(std::move(file)), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

// FNV-1a, 64 bit. Used for digests and container checksums.
class Fnv1a {
public:
    static constexpr std::uint64_t kOffset = 14695981039346656037ull;
    static constexpr std::uint64_t kPrime = 1099511628211ull;

    Fnv1a& update(std::span<const std::byte> bytes) noexcept {
        for (auto b : bytes) {
            state_ ^= static_cast<std::uint64_t>(b);
            state_ *= kPrime;
        }
        return *this;
    }
    Fnv1a& update(std::string_view s) noexcept {
        return update(std::as_bytes(std::span<const char>(s.data(), s.size())));
    }
    Fnv1a& update_u64(std::uint64_t v) noexcept {
        for (int i = 0; i < 8; ++i) {
            state_ ^= (v >> (8 * i)) & 0xffu;
            state_ *= kPrime;
        }
        return *this;
    }
    Fnv1a& update_f64(double v) noexcept { return update_u64(std::bit_cast<std::uint64_t>(v)); }

    std::uint64_t value() const noexcept { return state_; }

private:
    std::uint64_t state_ = kOffset;
};

inline std::uint64_t digest(std::string_view s) noexcept { return Fnv1a{}.update(s).value(); }

std::string hex64(std::uint64_t v);

// Shortest round-trip and hexadecimal renderings of a double, plus the
// matching parser (accepts either form).
std::string format_double(double v);
std::string format_hexfloat(double v);
double parse_double_exact(std::string_view s);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Derives an independent stream seed from a master seed and a salt.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace nids
