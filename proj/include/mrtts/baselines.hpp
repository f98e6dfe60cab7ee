#pragma once

#include <cstdint>
#include <vector>

#include "mrtts/config.hpp"
#include "mrtts/decoder.hpp"
#include "mrtts/numerics.hpp"

namespace mrtts {

struct FrameFeatureTrack;

enum class BaselineKind { kPlainRecurrent, kFrameSelfAttention };

// Two stacked LSTM layers and the 19-dim output head; no attention.
struct PlainRecurrentWeights {
    LstmWeights lstm1;  // (d_f + 19) -> hidden1
    LstmWeights lstm2;  // hidden1 -> hidden2
    Matrix out;         // hidden2 x 19
    std::vector<float> out_bias;
};

Matrix plain_recurrent_decode(const FrameFeatureTrack& track, const PlainRecurrentWeights& w,
                              DecoderOptions opts = {}, MacCounter* counter = nullptr);

std::uint64_t plain_recurrent_step_macs(const PlainRecurrentWeights& w);

struct SelfAttentionLayer {
    Matrix wq, wk, wv, wo;  // dim x dim
    std::vector<float> bq, bk, bv, bo;
    Matrix ffn1;  // dim x ffn
    std::vector<float> b1;
    Matrix ffn2;  // ffn x dim
    std::vector<float> b2;
};

// Non-streaming transformer encoder over frame-rate features, followed by a
// per-frame output head. Every position attends to every other position.
struct SelfAttentionWeights {
    Matrix in;  // d_f x dim
    std::vector<float> in_bias;
    std::vector<SelfAttentionLayer> layers;
    Matrix out;  // dim x 19
    std::vector<float> out_bias;
    std::size_t heads = 4;

    std::size_t dim() const { return in.cols(); }
};

struct SelfAttentionCost {
    MacCounter total;
    MacCounter attention;  // score and context terms only
};

// Runs the encoder stack over the whole track, then the output head. Rows
// of the attention are split across threads; results do not depend on the
// thread count.
Matrix self_attention_decode(const FrameFeatureTrack& track, const SelfAttentionWeights& w,
                             SelfAttentionCost* cost = nullptr);

// Encoder stack only (what has to finish before frame 0 can be emitted).
Matrix self_attention_encode(const Matrix& frames, const SelfAttentionWeights& w, SelfAttentionCost* cost = nullptr);

// Closed forms for a track of `frames` rows.
std::uint64_t self_attention_attention_macs(const SelfAttentionWeights& w, std::size_t frames);
std::uint64_t self_attention_total_macs(const SelfAttentionWeights& w, std::size_t frames);

}  // namespace mrtts
