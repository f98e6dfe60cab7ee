#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mrtts/config.hpp"
#include "mrtts/encoder.hpp"
#include "mrtts/numerics.hpp"

namespace mrtts {

struct ContextTree;
struct FrameFeatureTrack;

using SpectrumFrame = std::array<float, kFrameDim>;

struct DecoderWeights {
    LstmWeights lstm1;               // (d_f + 19) -> hidden1
    LstmWeights lstm2;               // hidden1 -> hidden2
    std::array<Matrix, 3> query;     // hidden2 x d_k per level
    Matrix combine;                  // (d_w + d_s + d_p) x d_model
    Matrix out;                      // (d_model + hidden2) x 19
    std::vector<float> out_bias;     // 19

    std::size_t frame_input_dim() const { return lstm1.input_size() - kFrameDim; }
    void check() const;
};

struct DecoderOptions {
    // Feed the previous predicted frame back into the first LSTM layer. When
    // off, that part of the input is held at zero.
    bool feedback = true;
};

// Everything that carries information from frame t-1 to frame t.
struct DecoderState {
    std::vector<float> h1, c1, h2, c2;
    SpectrumFrame y_prev{};
    std::uint64_t t = 0;

    static DecoderState initial(const DecoderWeights& w);

    std::vector<std::uint8_t> serialize() const;
    static DecoderState deserialize(std::span<const std::uint8_t> bytes);

    bool operator==(const DecoderState&) const = default;
};

// Scaled dot-product attention of one query against one head.
// `weights`, if non-null, receives the attention distribution.
std::vector<float> attend_head(std::span<const float> q, const SourceEncoding& enc, MacCounter* counter = nullptr,
                               std::vector<double>* weights = nullptr);

// Allocation-free form; `scores` needs at least enc.pooled_len entries and
// holds the attention distribution on return.
void attend_head_into(std::span<const float> q, const SourceEncoding& enc, std::span<double> scores,
                      std::span<float> out, MacCounter* counter = nullptr);

// concat(c_w, c_s, c_p) . W
std::vector<float> combine_heads(std::span<const float> c_w, std::span<const float> c_s, std::span<const float> c_p,
                                 const Matrix& w, MacCounter* counter = nullptr);

// Streaming decoder for one utterance. Holds preallocated scratch so that
// step() never allocates.
class DecoderSession {
public:
    DecoderSession(const DecoderWeights& w, const Encodings& enc, DecoderOptions opts = {});
    DecoderSession(DecoderWeights&&, const Encodings&, DecoderOptions = {}) = delete;
    DecoderSession(const DecoderWeights&, Encodings&&, DecoderOptions = {}) = delete;

    const DecoderState& state() const { return state_; }
    void set_state(DecoderState s);

    // Decodes frame state().t from its frame features. The returned span
    // stays valid until the next call.
    std::span<const float> step(std::span<const float> x_f, MacCounter* counter = nullptr);

    // Attention distribution of the last step for one head.
    std::span<const double> last_attention(Level l) const;

private:
    const DecoderWeights& w_;
    const Encodings& enc_;
    DecoderOptions opts_;
    DecoderState state_;
    std::vector<float> u_;
    std::array<std::vector<float>, 3> q_;
    std::vector<float> ctx_;       // concat(c_w, c_s, c_p)
    std::vector<float> combined_;  // c(t), then h(t) appended
    std::array<std::vector<double>, 3> scores_;
    SpectrumFrame y_{};
};

struct StepResult {
    SpectrumFrame frame;
    DecoderState state;
};

StepResult decode_step(std::span<const float> x_f, const DecoderState& state, const Encodings& enc,
                       const DecoderWeights& w, DecoderOptions opts = {}, MacCounter* counter = nullptr);

// Receives (frame index, 19 values); returning false aborts the stream.
using FrameSink = std::function<bool(std::size_t, std::span<const float>)>;

// Emits every frame of `track` in order. Throws SinkError carrying the number
// of frames delivered if the sink refuses one.
std::size_t decode_stream(const FrameFeatureTrack& track, const Encodings& enc, const DecoderWeights& w,
                          const FrameSink& sink, DecoderOptions opts = {}, MacCounter* counter = nullptr);

// Same, but unrolls frame features from the tree on the fly (memory
// independent of utterance length).
std::size_t decode_tree_stream(const ContextTree& tree, const Encodings& enc, const DecoderWeights& w,
                               const FrameSink& sink, DecoderOptions opts = {}, MacCounter* counter = nullptr);

// Closed-form MACs of one decode step for the given pooled head lengths.
std::uint64_t decode_step_macs(const DecoderWeights& w, const std::array<std::size_t, 3>& pooled_len);

}  // namespace mrtts
