#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "mrtts/errors.hpp"

namespace mrtts::bytes {

// Little-endian encode/decode independent of host byte order.
template <class U>
void put_uint(std::vector<std::uint8_t>& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) { put_uint(out, std::bit_cast<std::uint32_t>(v)); }

inline void put_f32s(std::vector<std::uint8_t>& out, std::span<const float> v) {
    for (float x : v) put_f32(out, x);
}

template <class U>
U get_uint(const std::uint8_t* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
    return v;
}

inline float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_uint<std::uint32_t>(p)); }

// Sequential reader that throws IntegrityError on overrun.
class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    std::span<const std::uint8_t> take(std::size_t n) {
        if (n > data_.size() - pos_) {
            throw IntegrityError("truncated data: need " + std::to_string(n) + " bytes at offset " +
                                 std::to_string(pos_) + ", have " + std::to_string(data_.size() - pos_));
        }
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    template <class U>
    U uint() {
        return get_uint<U>(take(sizeof(U)).data());
    }
    float f32() { return get_f32(take(4).data()); }
    void f32s(std::span<float> out) {
        auto s = take(out.size() * 4);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_f32(s.data() + 4 * i);
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

// 64-bit FNV-1a, used for fixture checksums.
inline std::uint64_t fnv1a64(std::span<const std::uint8_t> data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : data) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::span<const float> values) {
    std::vector<std::uint8_t> buf;
    buf.reserve(values.size() * 4);
    put_f32s(buf, values);
    return fnv1a64(std::span<const std::uint8_t>(buf));
}

}  // namespace mrtts::bytes
