#include "mrtts/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mrtts/bytes.hpp"
#include "mrtts/errors.hpp"
#include "mrtts/features.hpp"

namespace mrtts {

void DecoderWeights::check() const {
    lstm1.check();
    lstm2.check();
    if (lstm1.input_size() < kFrameDim) throw ShapeError("decoder: lstm1 input narrower than a spectrum frame");
    if (lstm2.input_size() != lstm1.hidden_size()) throw ShapeError("decoder: lstm2 input != lstm1 hidden");
    std::size_t ctx = 0;
    for (const auto& q : query) {
        if (q.rows() != lstm2.hidden_size()) throw ShapeError("decoder: query projection rows != hidden2");
        ctx += q.cols();
    }
    if (combine.rows() != ctx) throw ShapeError("decoder: combine rows != d_w + d_s + d_p");
    if (out.rows() != combine.cols() + lstm2.hidden_size() || out.cols() != kFrameDim ||
        out_bias.size() != kFrameDim) {
        throw ShapeError("decoder: output head must be (d_model + hidden2) x 19");
    }
}

DecoderState DecoderState::initial(const DecoderWeights& w) {
    DecoderState s;
    s.h1.assign(w.lstm1.hidden_size(), 0.0f);
    s.c1.assign(w.lstm1.hidden_size(), 0.0f);
    s.h2.assign(w.lstm2.hidden_size(), 0.0f);
    s.c2.assign(w.lstm2.hidden_size(), 0.0f);
    return s;
}

namespace {
constexpr std::uint32_t kStateMagic = 0x5344524DU;  // "MRDS"
}

std::vector<std::uint8_t> DecoderState::serialize() const {
    std::vector<std::uint8_t> out;
    bytes::put_uint<std::uint32_t>(out, kStateMagic);
    bytes::put_uint<std::uint64_t>(out, t);
    bytes::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(h1.size()));
    bytes::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(h2.size()));
    for (const auto* v : {&h1, &c1, &h2, &c2}) bytes::put_f32s(out, *v);
    bytes::put_f32s(out, y_prev);
    return out;
}

DecoderState DecoderState::deserialize(std::span<const std::uint8_t> data) {
    bytes::Reader r(data);
    if (r.uint<std::uint32_t>() != kStateMagic) throw FormatError("decoder state: bad magic");
    DecoderState s;
    s.t = r.uint<std::uint64_t>();
    const auto n1 = r.uint<std::uint32_t>();
    const auto n2 = r.uint<std::uint32_t>();
    s.h1.resize(n1);
    s.c1.resize(n1);
    s.h2.resize(n2);
    s.c2.resize(n2);
    for (auto* v : {&s.h1, &s.c1, &s.h2, &s.c2}) r.f32s(*v);
    r.f32s(s.y_prev);
    if (r.remaining() != 0) throw IntegrityError("decoder state: trailing bytes");
    return s;
}

void attend_head_into(std::span<const float> q, const SourceEncoding& enc, std::span<double> scores,
                      std::span<float> out, MacCounter* counter) {
    const std::size_t dk = enc.d_k();
    const std::size_t len = enc.keys.rows();
    if (q.size() != dk || out.size() != dk || enc.values.rows() != len || enc.values.cols() != dk ||
        scores.size() < len || len == 0) {
        throw ShapeError("attend_head: query " + std::to_string(q.size()) + " against " +
                         std::string(level_name(enc.level)) + " head d_k=" + std::to_string(dk) +
                         " len=" + std::to_string(len));
    }
    auto p = scores.first(len);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    for (std::size_t j = 0; j < len; ++j) {
        const auto k = enc.keys.row(j);
        double s = 0.0;
        for (std::size_t d = 0; d < dk; ++d) s += static_cast<double>(q[d]) * k[d];
        p[j] = s * scale;
    }
    softmax_inplace(p, counter);
    for (std::size_t d = 0; d < dk; ++d) {
        double acc = 0.0;
        for (std::size_t j = 0; j < len; ++j) acc += p[j] * enc.values(j, d);
        out[d] = static_cast<float>(acc);
    }
    count_macs(counter, 2ULL * dk * len);
}

std::vector<float> attend_head(std::span<const float> q, const SourceEncoding& enc, MacCounter* counter,
                               std::vector<double>* weights) {
    std::vector<double> scores(enc.keys.rows());
    std::vector<float> out(enc.d_k());
    attend_head_into(q, enc, scores, out, counter);
    if (weights) *weights = std::move(scores);
    return out;
}

std::vector<float> combine_heads(std::span<const float> c_w, std::span<const float> c_s, std::span<const float> c_p,
                                 const Matrix& w, MacCounter* counter) {
    std::vector<float> cat;
    cat.reserve(c_w.size() + c_s.size() + c_p.size());
    cat.insert(cat.end(), c_w.begin(), c_w.end());
    cat.insert(cat.end(), c_s.begin(), c_s.end());
    cat.insert(cat.end(), c_p.begin(), c_p.end());
    if (cat.size() != w.rows()) {
        throw ShapeError("combine_heads: concatenated context " + std::to_string(cat.size()) + " != W rows " +
                         std::to_string(w.rows()));
    }
    return linear(cat, w, {}, counter);
}

DecoderSession::DecoderSession(const DecoderWeights& w, const Encodings& enc, DecoderOptions opts)
    : w_(w), enc_(enc), opts_(opts), state_(DecoderState::initial(w)) {
    w.check();
    u_.assign(w.lstm1.input_size(), 0.0f);
    std::size_t ctx = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& e = enc[i];
        if (e.d_k() != w.query[i].cols()) {
            throw ShapeError("decoder: " + std::string(level_name(e.level)) + " encoding d_k " +
                             std::to_string(e.d_k()) + " != query width " + std::to_string(w.query[i].cols()));
        }
        q_[i].assign(e.d_k(), 0.0f);
        scores_[i].assign(e.keys.rows(), 0.0);
        ctx += e.d_k();
    }
    ctx_.assign(ctx, 0.0f);
    combined_.assign(w.combine.cols() + w.lstm2.hidden_size(), 0.0f);
}

void DecoderSession::set_state(DecoderState s) {
    if (s.h1.size() != w_.lstm1.hidden_size() || s.c1.size() != s.h1.size() ||
        s.h2.size() != w_.lstm2.hidden_size() || s.c2.size() != s.h2.size()) {
        throw ShapeError("decoder state does not match weights");
    }
    state_ = std::move(s);
}

std::span<const float> DecoderSession::step(std::span<const float> x_f, MacCounter* counter) {
    const std::size_t df = w_.frame_input_dim();
    if (x_f.size() != df) {
        throw ShapeError("decode_step: frame features " + std::to_string(x_f.size()) + " != " + std::to_string(df));
    }
    auto& s = state_;
    std::copy(x_f.begin(), x_f.end(), u_.begin());
    if (opts_.feedback) {
        std::copy(s.y_prev.begin(), s.y_prev.end(), u_.begin() + static_cast<std::ptrdiff_t>(df));
    }
    lstm_cell_step_into(u_, s.h1, s.c1, w_.lstm1, s.h1, s.c1, counter);
    lstm_cell_step_into(s.h1, s.h2, s.c2, w_.lstm2, s.h2, s.c2, counter);

    std::size_t off = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        linear_into(s.h2, w_.query[i], {}, q_[i], counter);
        auto seg = std::span<float>(ctx_).subspan(off, q_[i].size());
        attend_head_into(q_[i], enc_[i], scores_[i], seg, counter);
        off += q_[i].size();
    }
    const std::size_t dm = w_.combine.cols();
    linear_into(ctx_, w_.combine, {}, std::span<float>(combined_).first(dm), counter);
    std::copy(s.h2.begin(), s.h2.end(), combined_.begin() + static_cast<std::ptrdiff_t>(dm));
    linear_into(combined_, w_.out, w_.out_bias, y_, counter);

    s.y_prev = y_;
    ++s.t;
    return y_;
}

std::span<const double> DecoderSession::last_attention(Level l) const {
    return scores_[static_cast<std::size_t>(l)];
}

StepResult decode_step(std::span<const float> x_f, const DecoderState& state, const Encodings& enc,
                       const DecoderWeights& w, DecoderOptions opts, MacCounter* counter) {
    DecoderSession session(w, enc, opts);
    session.set_state(state);
    StepResult r{};
    auto y = session.step(x_f, counter);
    std::copy(y.begin(), y.end(), r.frame.begin());
    r.state = session.state();
    return r;
}

std::size_t decode_stream(const FrameFeatureTrack& track, const Encodings& enc, const DecoderWeights& w,
                          const FrameSink& sink, DecoderOptions opts, MacCounter* counter) {
    DecoderSession session(w, enc, opts);
    const std::size_t n = track.length();
    for (std::size_t t = 0; t < n; ++t) {
        auto y = session.step(track.frames.row(t), counter);
        if (!sink(t, y)) throw SinkError(t, "frame sink failed at frame " + std::to_string(t));
    }
    return n;
}

std::size_t decode_tree_stream(const ContextTree& tree, const Encodings& enc, const DecoderWeights& w,
                               const FrameSink& sink, DecoderOptions opts, MacCounter* counter) {
    DecoderSession session(w, enc, opts);
    FrameUnroller frames(tree);
    std::vector<float> x(frames.dim());
    std::size_t t = 0;
    while (!frames.done()) {
        frames.next(x);
        auto y = session.step(x, counter);
        if (!sink(t, y)) throw SinkError(t, "frame sink failed at frame " + std::to_string(t));
        ++t;
    }
    return t;
}

std::uint64_t decode_step_macs(const DecoderWeights& w, const std::array<std::size_t, 3>& pooled_len) {
    std::uint64_t macs = lstm_step_macs(w.lstm1.input_size(), w.lstm1.hidden_size()) +
                         lstm_step_macs(w.lstm2.input_size(), w.lstm2.hidden_size());
    for (std::size_t i = 0; i < 3; ++i) {
        const std::uint64_t dk = w.query[i].cols();
        macs += w.lstm2.hidden_size() * dk;  // query projection
        macs += 2 * dk * pooled_len[i];      // scores + weighted values
    }
    macs += static_cast<std::uint64_t>(w.combine.rows()) * w.combine.cols();
    macs += static_cast<std::uint64_t>(w.out.rows()) * w.out.cols();
    return macs;
}

}  // namespace mrtts
