#pragma once

#include <cstddef>
#include <cstdint>

namespace modeshift {

/// Counter-based random stream. The key is derived from a master seed plus up
/// to three integer coordinates (e.g. cell, parameter sample, replicate), and
/// the i-th output is a SplitMix64 mix of key + i. Streams with different keys
/// are independent, so work can be split across threads without changing
/// results.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                       std::uint64_t c = 0) noexcept;

    std::uint64_t next_u64() noexcept;
    /// Uniform on the open interval (0, 1).
    double uniform() noexcept;
    /// Standard normal (Marsaglia polar method).
    double normal() noexcept;
    /// Standard Gumbel (location 0, scale 1).
    double gumbel() noexcept;

    std::uint64_t key() const noexcept { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) noexcept;

/// Order-sensitive hash of a string, for turning keys such as zone ids into
/// stream coordinates.
std::uint64_t hash_string(const char* data, std::size_t size) noexcept;

}  // namespace modeshift
