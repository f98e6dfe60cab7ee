#include "mrtts/model.hpp"

#include <string>

#include "mrtts/errors.hpp"
#include "mrtts/features.hpp"

namespace mrtts {

Model prepare_model(const ModelWeights& w, ModelKind kind) {
    Model m;
    m.kind = kind;
    m.config = w.config;
    switch (kind) {
        case ModelKind::kMultirateNoPool:
            m.config.pooling = false;
            [[fallthrough]];
        case ModelKind::kMultirate:
            m.encoder = w.encoder();
            m.decoder = w.decoder();
            break;
        case ModelKind::kPlainRecurrent:
            m.plain = w.plain_recurrent();
            break;
        case ModelKind::kSelfAttention:
            m.self_attention = w.self_attention();
            break;
    }
    return m;
}

namespace {

std::size_t emit_all(const Matrix& frames, const FrameSink& sink) {
    for (std::size_t t = 0; t < frames.rows(); ++t) {
        if (!sink(t, frames.row(t))) throw SinkError(t, "frame sink failed at frame " + std::to_string(t));
    }
    return frames.rows();
}

}  // namespace

std::size_t synthesize(const Model& m, const ContextTree& tree, const FrameSink& sink, MacCounter* counter) {
    if (tree.frame_dim() != m.config.d_frame) {
        throw ShapeError("context tree frame width " + std::to_string(tree.frame_dim()) + " != model d_frame " +
                         std::to_string(m.config.d_frame));
    }
    switch (m.kind) {
        case ModelKind::kMultirate:
        case ModelKind::kMultirateNoPool: {
            const Encodings enc = encode_tree(tree, m.encoder, m.config, counter);
            return decode_tree_stream(tree, enc, m.decoder, sink, m.options(), counter);
        }
        case ModelKind::kPlainRecurrent:
            return emit_all(plain_recurrent_decode(unroll_frames(tree), m.plain, m.options(), counter), sink);
        case ModelKind::kSelfAttention: {
            SelfAttentionCost cost;
            const Matrix y = self_attention_decode(unroll_frames(tree), m.self_attention, counter ? &cost : nullptr);
            if (counter) {
                counter->macs += cost.total.macs;
                counter->exps += cost.total.exps;
            }
            return emit_all(y, sink);
        }
    }
    return 0;
}

}  // namespace mrtts
