#include "modeshift/rng.hpp"

#include <cmath>
#include <cstddef>

namespace modeshift {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t hash_string(const char* data, std::size_t size) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (std::size_t i = 0; i < size; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 0x100000001B3ULL;
    }
    return mix64(h);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                     std::uint64_t c) noexcept {
    std::uint64_t k = mix64(seed + kGolden);
    k = mix64(k ^ (a + 0x632BE59BD9B4E019ULL));
    k = mix64(k ^ (b + 0x8CB92BA72F3D8DD7ULL));
    k = mix64(k ^ (c + 0xD1B54A32D192ED03ULL));
    key_ = k;
}

std::uint64_t RngStream::next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() noexcept {
    // 53 random bits, shifted by half an ulp so 0 is never returned.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

double RngStream::gumbel() noexcept { return -std::log(-std::log(uniform())); }

}  // namespace modeshift
