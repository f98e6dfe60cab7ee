#pragma once

// Shared helpers for the test binaries: seeded random data and small
// fixtures built directly from the public types.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "mrtts/decoder.hpp"
#include "mrtts/features.hpp"
#include "mrtts/prng.hpp"
#include "mrtts/weights.hpp"

namespace mrtts::test {

inline Matrix random_matrix(Xorshift64Star& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (auto& v : m.storage()) v = static_cast<float>(scale * (2.0 * rng.uniform() - 1.0));
    return m;
}

inline std::vector<float> random_vector(Xorshift64Star& rng, std::size_t n, double scale = 1.0) {
    std::vector<float> v(n);
    for (auto& e : v) e = static_cast<float>(scale * (2.0 * rng.uniform() - 1.0));
    return v;
}

inline std::size_t random_size(Xorshift64Star& rng, std::size_t lo, std::size_t hi) {
    return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

inline LstmWeights random_lstm(Xorshift64Star& rng, std::size_t in, std::size_t hid, double scale = 0.3) {
    return {random_matrix(rng, in, 4 * hid, scale), random_matrix(rng, hid, 4 * hid, scale),
            random_vector(rng, 4 * hid, 0.1)};
}

inline SourceEncoding random_encoding(Xorshift64Star& rng, std::size_t len, std::size_t dk, Level level = Level::kWord) {
    SourceEncoding enc;
    enc.level = level;
    enc.keys = random_matrix(rng, len, dk);
    enc.values = random_matrix(rng, len, dk);
    enc.source_len = enc.pooled_len = len;
    return enc;
}

inline ModelWeights multirate_weights(std::uint64_t seed, const ModelConfig& config = {}) {
    const std::array<ModelKind, 1> kinds = {ModelKind::kMultirate};
    return weights_init(seed, config, kinds);
}

inline ModelWeights all_weights(std::uint64_t seed, const ModelConfig& config = {}) {
    return weights_init(seed, config, kModelKinds);
}

// Same tensors, every value zero except the output biases, which are set to
// 0.1 * (index + 1).
inline ModelWeights zero_weights_with_bias(const ModelConfig& config = {}) {
    ModelWeights w = all_weights(0, config);
    for (auto& [name, t] : w.tensors) {
        const bool out_bias = name.ends_with("out.bias");
        for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = out_bias ? 0.1f * static_cast<float>(i + 1) : 0.0f;
    }
    return w;
}

inline ContextTree tree_with_durations(const std::vector<std::uint32_t>& durations, const ModelConfig& dims = {}) {
    const std::size_t phones = durations.size();
    const std::size_t syllables = (phones + 2) / 3;
    ContextTree t = synth_tree_with_counts(1, (syllables + 3) / 4, syllables, phones, dims);
    t.durations = durations;
    t.validate();
    return t;
}

inline Matrix collect(std::size_t frames, const std::function<std::size_t(const FrameSink&)>& run) {
    Matrix out(frames, kFrameDim);
    run([&](std::size_t t, std::span<const float> y) {
        std::copy(y.begin(), y.end(), out.row(t).begin());
        return true;
    });
    return out;
}

}  // namespace mrtts::test
