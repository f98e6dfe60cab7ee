#pragma once

#include <array>
#include <cstdint>

#include "mrtts/config.hpp"
#include "mrtts/numerics.hpp"

namespace mrtts {

struct ContextTree;

// One same-length 1-D convolution. `filters` is d_out x (d_in * kernel) with
// element [m][c * kernel + k] weighting input channel c at tap k for output
// channel m.
struct ConvLayer {
    Matrix filters;
    std::vector<float> bias;
    std::size_t kernel = 1;

    std::size_t in_channels() const { return kernel ? filters.cols() / kernel : 0; }
    std::size_t out_channels() const { return filters.rows(); }
};

struct LevelEncoderWeights {
    ConvLayer conv1;
    ConvLayer conv2;
    Matrix key;    // d x d_k
    Matrix value;  // d x d_k
};

struct EncoderWeights {
    std::array<LevelEncoderWeights, 3> levels;

    const LevelEncoderWeights& at(Level l) const { return levels[static_cast<std::size_t>(l)]; }
};

// Pooled keys/values for one attention head.
struct SourceEncoding {
    Level level = Level::kWord;
    Matrix keys;    // pooled_len x d_k
    Matrix values;  // pooled_len x d_k
    std::size_t source_len = 0;
    std::size_t pooled_len = 0;
    std::size_t stride = 1;

    std::size_t d_k() const { return keys.cols(); }
};

using Encodings = std::array<SourceEncoding, 3>;

// Zero-padded convolution whose output has the input's length. Counts
// L * d_in * d_out * K MACs, padding taps included.
Matrix conv1d_same(const Matrix& x, const ConvLayer& layer, MacCounter* counter = nullptr);

struct PoolResult {
    Matrix pooled;
    std::size_t stride = 1;
};

// Dynamic max-pooling: stride S = ceil(L / l_max), output length
// min(L, l_max), input zero-padded to S * min(L, l_max) rows. Pass
// kNoPooling for l_max to get the identity.
PoolResult dynamic_max_pool(const Matrix& x, std::size_t l_max);

// conv -> ReLU -> conv -> ReLU -> pool -> key/value projections.
SourceEncoding encode_source(Level level, const Matrix& x, const LevelEncoderWeights& w, std::size_t l_max,
                             MacCounter* counter = nullptr);

// All three heads of an utterance, pooled per `config.level_l_max`.
Encodings encode_tree(const ContextTree& tree, const EncoderWeights& w, const ModelConfig& config,
                      MacCounter* counter = nullptr);

// Closed-form encoder cost for one level.
std::uint64_t encoder_level_macs(std::size_t length, std::size_t dim, std::size_t kernel, std::size_t l_max);

}  // namespace mrtts
