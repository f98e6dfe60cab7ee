#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mrtts/config.hpp"
#include "mrtts/numerics.hpp"

namespace mrtts {

struct Phrase {
    std::vector<float> features;
    std::size_t word_count = 0;

    bool operator==(const Phrase&) const = default;
};

// Hierarchical linguistic features of one utterance. Word, syllable and phone
// features stay at their own rate; the alignment counts link each level to
// the next and the phone durations (in frames) link phones to frames.
struct ContextTree {
    std::vector<float> sentence;
    std::vector<Phrase> phrases;
    Matrix words;      // L_w x d_w
    Matrix syllables;  // L_s x d_s
    Matrix phones;     // L_p x d_p
    std::vector<std::uint32_t> word_syllable_counts;
    std::vector<std::uint32_t> syllable_phone_counts;
    std::vector<std::uint32_t> durations;
    std::vector<float> f0;  // per phone

    const Matrix& level(Level l) const;
    std::size_t frame_count() const;
    std::size_t phrase_dim() const { return phrases.empty() ? 0 : phrases.front().features.size(); }
    std::size_t frame_dim() const { return kFramePositionalDim + sentence.size() + phrase_dim(); }

    // Throws ValidationError naming the offending level.
    void validate() const;

    bool operator==(const ContextTree&) const = default;
};

// Column layout of the positional block of a frame feature row.
namespace frame_col {
inline constexpr std::size_t kPosInPhone = 0;
inline constexpr std::size_t kPhoneDuration = 1;
inline constexpr std::size_t kNormalizedPos = 2;  // pos / duration
inline constexpr std::size_t kPhoneIndex = 3;     // phone index / L_p
inline constexpr std::size_t kSyllableIndex = 4;  // syllable index / L_s
inline constexpr std::size_t kWordIndex = 5;      // word index / L_w
inline constexpr std::size_t kPhraseIndex = 6;    // phrase index / #phrases
inline constexpr std::size_t kF0 = 7;
}  // namespace frame_col

struct FrameFeatureTrack {
    Matrix frames;                           // L_f x d_f
    std::vector<std::uint32_t> phone_index;  // phone owning each frame
    double frame_shift_ms = kFrameShiftMs;

    std::size_t length() const { return frames.rows(); }
    double audio_seconds() const { return static_cast<double>(length()) * frame_shift_ms / 1000.0; }
};

// Produces frame feature rows one at a time in O(1) memory beyond the tree.
class FrameUnroller {
public:
    explicit FrameUnroller(const ContextTree& tree);

    std::size_t dim() const { return dim_; }
    std::size_t total() const { return total_; }
    std::size_t position() const { return t_; }
    bool done() const { return t_ == total_; }
    std::uint32_t current_phone() const { return static_cast<std::uint32_t>(phone_); }

    // Writes row `position()` into `out` and advances.
    void next(std::span<float> out);

private:
    const ContextTree& tree_;
    std::size_t dim_;
    std::size_t total_;
    std::size_t t_ = 0;
    std::size_t phone_ = 0;
    std::size_t pos_in_phone_ = 0;
    std::size_t syllable_ = 0;
    std::size_t phones_left_in_syllable_ = 0;
    std::size_t word_ = 0;
    std::size_t syllables_left_in_word_ = 0;
    std::size_t phrase_ = 0;
    std::size_t words_left_in_phrase_ = 0;
};

FrameFeatureTrack unroll_frames(const ContextTree& tree);

ContextTree parse_context_tree(const std::string& document);
std::string serialize_context_tree(const ContextTree& tree);
ContextTree load_context_tree(const std::string& path);
void save_context_tree(const ContextTree& tree, const std::string& path);

struct CorpusSpec {
    std::size_t utterances = 1;
    std::size_t min_words = 5;
    std::size_t max_words = 20;
    std::size_t min_syllables_per_word = 1;
    std::size_t max_syllables_per_word = 4;
    std::size_t min_phones_per_syllable = 1;
    std::size_t max_phones_per_syllable = 3;
    std::size_t min_duration = 3;
    std::size_t max_duration = 30;
    // When > 0, words are appended until the utterance reaches this many
    // seconds of audio and trailing durations are trimmed toward the target;
    // the word range is then ignored.
    double target_seconds = 0.0;
    std::size_t words_per_phrase = 8;
    ModelConfig dims;

    void validate() const;
};

// Deterministic synthetic trees. Feature values are standard normal; phone
// durations follow min + floor(u^3 * (max - min + 1)) for u uniform, which
// puts the mean near 10 frames for the default 3..30 range.
std::vector<ContextTree> synth_corpus(std::uint64_t seed, const CorpusSpec& spec);

// One tree with exactly the requested level lengths. Requires
// words <= syllables <= 4 * words and syllables <= phones <= 3 * syllables.
ContextTree synth_tree_with_counts(std::uint64_t seed, std::size_t words, std::size_t syllables, std::size_t phones,
                                   const ModelConfig& dims, std::size_t min_duration = 3,
                                   std::size_t max_duration = 30);

}  // namespace mrtts
