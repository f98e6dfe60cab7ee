#pragma once

#include "mrtts/baselines.hpp"
#include "mrtts/config.hpp"
#include "mrtts/decoder.hpp"
#include "mrtts/encoder.hpp"
#include "mrtts/weights.hpp"

namespace mrtts {

// Weights of one model variant unpacked into kernel-ready form.
struct Model {
    ModelKind kind = ModelKind::kMultirate;
    ModelConfig config;
    EncoderWeights encoder;
    DecoderWeights decoder;
    PlainRecurrentWeights plain;
    SelfAttentionWeights self_attention;

    DecoderOptions options() const { return {config.feedback}; }
};

// Throws IntegrityError if `w` lacks tensors for `kind`. The no-pooling
// variant reuses the multi-rate tensors with pooling switched off.
Model prepare_model(const ModelWeights& w, ModelKind kind);

// Synthesizes every frame of `tree` into `sink`. Multi-rate models stream
// frame by frame; the baselines compute all frames and then emit them.
std::size_t synthesize(const Model& m, const ContextTree& tree, const FrameSink& sink, MacCounter* counter = nullptr);

}  // namespace mrtts
