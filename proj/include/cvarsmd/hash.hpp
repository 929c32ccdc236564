#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string_view>

namespace cvarsmd {

/// 64-bit FNV-1a, stable across platforms and runs.
class Fnv1a {
public:
    Fnv1a& bytes(std::string_view data) noexcept {
        for (unsigned char c : data) {
            state_ ^= c;
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    Fnv1a& u64(std::uint64_t value) noexcept {
        for (int i = 0; i < 8; ++i) {
            state_ ^= (value >> (8 * i)) & 0xffU;
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    Fnv1a& f64(double value) noexcept { return u64(std::bit_cast<std::uint64_t>(value)); }

    Fnv1a& f64s(std::span<const double> values) noexcept {
        u64(values.size());
        for (double v : values) f64(v);
        return *this;
    }

    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

} // namespace cvarsmd
