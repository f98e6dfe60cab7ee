#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <string_view>

namespace mrtts {

// Width of one predicted spectrum frame: 13 MFCC + f0 + 5 periodicity.
inline constexpr std::size_t kMfccDim = 13;
inline constexpr std::size_t kPeriodicityDim = 5;
inline constexpr std::size_t kFrameDim = kMfccDim + 1 + kPeriodicityDim;

inline constexpr double kFrameShiftMs = 12.5;
inline constexpr double kFramesPerSecond = 1000.0 / kFrameShiftMs;

// Pooling limit meaning "no dynamic pooling".
inline constexpr std::size_t kNoPooling = std::numeric_limits<std::size_t>::max();

enum class Level : std::size_t { kWord = 0, kSyllable = 1, kPhone = 2 };
inline constexpr std::array<Level, 3> kLevels = {Level::kWord, Level::kSyllable, Level::kPhone};

constexpr std::string_view level_name(Level l) {
    switch (l) {
        case Level::kWord: return "word";
        case Level::kSyllable: return "syllable";
        case Level::kPhone: return "phone";
    }
    return "?";
}

// Model variants selectable from the command line.
enum class ModelKind { kMultirate, kMultirateNoPool, kPlainRecurrent, kSelfAttention };
inline constexpr std::array<ModelKind, 4> kModelKinds = {ModelKind::kMultirate, ModelKind::kMultirateNoPool,
                                                         ModelKind::kPlainRecurrent, ModelKind::kSelfAttention};

constexpr std::string_view model_name(ModelKind k) {
    switch (k) {
        case ModelKind::kMultirate: return "multirate";
        case ModelKind::kMultirateNoPool: return "multirate-nopool";
        case ModelKind::kPlainRecurrent: return "lstm";
        case ModelKind::kSelfAttention: return "selfattn";
    }
    return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
    for (auto k : kModelKinds) {
        if (model_name(k) == s) return k;
    }
    return std::nullopt;
}

// Number of fixed positional fields at the start of every frame feature row.
inline constexpr std::size_t kFramePositionalDim = 8;

struct ModelConfig {
    // Input feature widths.
    std::size_t d_word = 32;
    std::size_t d_syllable = 16;
    std::size_t d_phone = 24;
    std::size_t d_sentence = 4;
    std::size_t d_phrase = 4;
    std::size_t d_frame = 16;  // kFramePositionalDim + d_sentence + d_phrase

    // Multi-rate model.
    std::size_t hidden1 = 256;
    std::size_t hidden2 = 128;
    std::size_t d_model = 128;
    std::size_t kernel = 5;
    std::array<std::size_t, 3> l_max = {50, 50, 50};  // per level; kNoPooling disables
    bool feedback = true;
    bool pooling = true;

    // Frame-rate self-attention baseline.
    std::size_t sa_layers = 2;
    std::size_t sa_heads = 4;
    std::size_t sa_dim = 128;
    std::size_t sa_ffn = 256;

    std::size_t level_dim(Level l) const {
        switch (l) {
            case Level::kWord: return d_word;
            case Level::kSyllable: return d_syllable;
            case Level::kPhone: return d_phone;
        }
        return 0;
    }
    std::size_t context_dim() const { return d_word + d_syllable + d_phone; }
    std::size_t level_l_max(Level l) const { return pooling ? l_max[static_cast<std::size_t>(l)] : kNoPooling; }
    void set_l_max(std::size_t v) { l_max = {v, v, v}; }

    // Throws ConfigError when the dimensions are inconsistent.
    void validate() const;
};

}  // namespace mrtts
