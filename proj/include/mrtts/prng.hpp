#pragma once

#include <cstdint>

namespace mrtts {

// Deterministic generator shared by the corpus synthesizer and weight init.
//
// Seeding: the 64-bit state is splitmix64(seed), replaced by a fixed
// non-zero constant if that yields zero.
// Step (xorshift64*):
//     x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27;
//     return x * 0x2545F4914F6CDD1D;
// uniform():  top 24 bits of a step, scaled by 2^-24, in [0, 1).
// normal():   Irwin-Hall, sum of 12 uniform() draws minus 6 (mean 0, var 1).
// No libm call is involved, so streams are bit-identical on every platform.
class Xorshift64Star {
public:
    explicit Xorshift64Star(std::uint64_t seed) : state_(splitmix64(seed)) {
        if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
    }

    std::uint64_t next() {
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545F4914F6CDD1DULL;
    }

    double uniform() { return static_cast<double>(next() >> 40) * 0x1.0p-24; }

    // Integer in [lo, hi], both inclusive. Modulo bias is negligible for the
    // small ranges used here.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next() % span);
    }

    double normal() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += uniform();
        return s - 6.0;
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t state_;
};

}  // namespace mrtts
