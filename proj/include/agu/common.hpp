#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace agu {

// Error hierarchy. Dimension/contract problems are programming errors at the
// call site; parse/domain problems carry enough context to report to a user.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct ReferenceError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
          line_no(line) {}
    std::size_t line_no;
};

struct TrainingFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a_bytes(const void* data, std::size_t len,
                                 std::uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

// All randomness in the toolkit flows from one user seed through named
// sub-streams, so a single --seed reproduces every draw.
inline std::uint64_t derive_seed(std::uint64_t root, const std::string& stream) {
    return splitmix64(root ^ fnv1a(stream));
}

inline std::uint64_t derive_seed(std::uint64_t root, const std::string& stream,
                                 std::uint64_t index) {
    return splitmix64(splitmix64(root ^ fnv1a(stream)) + index);
}

}  // namespace agu
