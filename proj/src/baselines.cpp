#include "mrtts/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mrtts/errors.hpp"
#include "mrtts/features.hpp"
#include "mrtts/parallel.hpp"

namespace mrtts {

// ---------------------------------------------------------------------------
// Plain recurrent

std::uint64_t plain_recurrent_step_macs(const PlainRecurrentWeights& w) {
    return lstm_step_macs(w.lstm1.input_size(), w.lstm1.hidden_size()) +
           lstm_step_macs(w.lstm2.input_size(), w.lstm2.hidden_size()) +
           static_cast<std::uint64_t>(w.out.rows()) * w.out.cols();
}

Matrix plain_recurrent_decode(const FrameFeatureTrack& track, const PlainRecurrentWeights& w, DecoderOptions opts,
                              MacCounter* counter) {
    w.lstm1.check();
    w.lstm2.check();
    const std::size_t df = track.frames.cols();
    if (w.lstm1.input_size() != df + kFrameDim || w.lstm2.input_size() != w.lstm1.hidden_size() ||
        w.out.rows() != w.lstm2.hidden_size() || w.out.cols() != kFrameDim || w.out_bias.size() != kFrameDim) {
        throw ShapeError("plain_recurrent_decode: weights do not fit frame width " + std::to_string(df));
    }
    const std::size_t h1n = w.lstm1.hidden_size();
    const std::size_t h2n = w.lstm2.hidden_size();
    std::vector<float> u(df + kFrameDim, 0.0f), h1(h1n, 0.0f), c1(h1n, 0.0f), h2(h2n, 0.0f), c2(h2n, 0.0f);
    Matrix y(track.length(), kFrameDim);
    for (std::size_t t = 0; t < track.length(); ++t) {
        const auto x = track.frames.row(t);
        std::copy(x.begin(), x.end(), u.begin());
        if (opts.feedback && t > 0) {
            const auto prev = y.row(t - 1);
            std::copy(prev.begin(), prev.end(), u.begin() + static_cast<std::ptrdiff_t>(df));
        }
        lstm_cell_step_into(u, h1, c1, w.lstm1, h1, c1, counter);
        lstm_cell_step_into(h1, h2, c2, w.lstm2, h2, c2, counter);
        linear_into(h2, w.out, w.out_bias, y.row(t), counter);
    }
    return y;
}

// ---------------------------------------------------------------------------
// Frame-rate self-attention

namespace {

void add_bias_rows(Matrix& m, std::span<const float> b) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) row[c] += b[c];
    }
}

Matrix affine(const Matrix& x, const Matrix& w, std::span<const float> b, MacCounter* counter) {
    if (b.size() != w.cols()) throw ShapeError("self-attention: bias width mismatch");
    Matrix y = matmul(x, w, counter);
    add_bias_rows(y, b);
    return y;
}

void add_positional_encoding(Matrix& x) {
    const std::size_t dim = x.cols();
    for (std::size_t t = 0; t < x.rows(); ++t) {
        auto row = x.row(t);
        for (std::size_t i = 0; i < dim; i += 2) {
            const double angle = static_cast<double>(t) / std::pow(10000.0, static_cast<double>(i) / dim);
            row[i] += static_cast<float>(std::sin(angle));
            if (i + 1 < dim) row[i + 1] += static_cast<float>(std::cos(angle));
        }
    }
}

// x <- layer_norm(x + y), parameter free.
void residual_norm(Matrix& x, const Matrix& y) {
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto xr = x.row(r);
        const auto yr = y.row(r);
        double mean = 0.0;
        for (std::size_t c = 0; c < xr.size(); ++c) {
            xr[c] += yr[c];
            mean += xr[c];
        }
        mean /= static_cast<double>(xr.size());
        double var = 0.0;
        for (float v : xr) var += (v - mean) * (v - mean);
        var /= static_cast<double>(xr.size());
        const double inv = 1.0 / std::sqrt(var + 1e-5);
        for (auto& v : xr) v = static_cast<float>((v - mean) * inv);
    }
}

// Full (unmasked) multi-head attention; returns the concatenated contexts.
Matrix multi_head_attention(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t heads,
                            MacCounter* attention) {
    const long len = static_cast<long>(q.rows());
    const std::size_t dim = q.cols();
    const std::size_t dh = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Matrix ctx(q.rows(), dim);

#pragma omp parallel if (len >= parallel::kMinParallelRows)
    {
        std::vector<double> p(static_cast<std::size_t>(len));
        std::vector<double> acc(dh);
#pragma omp for schedule(static)
        for (long i = 0; i < len; ++i) {
            const auto qi = q.row(static_cast<std::size_t>(i));
            auto out = ctx.row(static_cast<std::size_t>(i));
            for (std::size_t h = 0; h < heads; ++h) {
                const std::size_t off = h * dh;
                double mx = -INFINITY;
                for (long j = 0; j < len; ++j) {
                    const auto kj = k.row(static_cast<std::size_t>(j));
                    double s = 0.0;
#pragma omp simd reduction(+ : s)
                    for (std::size_t d = 0; d < dh; ++d) s += static_cast<double>(qi[off + d]) * kj[off + d];
                    p[j] = s * scale;
                    mx = std::max(mx, p[j]);
                }
                double sum = 0.0;
                for (long j = 0; j < len; ++j) {
                    p[j] = std::exp(p[j] - mx);
                    sum += p[j];
                }
                std::fill(acc.begin(), acc.end(), 0.0);
                for (long j = 0; j < len; ++j) {
                    const double pj = p[j] / sum;
                    const auto vj = v.row(static_cast<std::size_t>(j));
#pragma omp simd
                    for (std::size_t d = 0; d < dh; ++d) acc[d] += pj * vj[off + d];
                }
                for (std::size_t d = 0; d < dh; ++d) out[off + d] = static_cast<float>(acc[d]);
            }
        }
    }
    const auto l = static_cast<std::uint64_t>(len);
    count_macs(attention, 2 * l * l * dim);
    count_exps(attention, l * l * heads);
    return ctx;
}

void check_self_attention(const SelfAttentionWeights& w, std::size_t frame_dim) {
    const std::size_t dim = w.dim();
    if (w.in.rows() != frame_dim || w.in_bias.size() != dim) {
        throw ShapeError("self-attention: input projection does not fit frame width " + std::to_string(frame_dim));
    }
    if (w.heads == 0 || dim % w.heads != 0) throw ShapeError("self-attention: dim not divisible by heads");
    for (const auto& layer : w.layers) {
        for (const Matrix* m : {&layer.wq, &layer.wk, &layer.wv, &layer.wo}) {
            if (m->rows() != dim || m->cols() != dim) throw ShapeError("self-attention: projection must be dim x dim");
        }
        if (layer.ffn1.rows() != dim || layer.ffn2.cols() != dim || layer.ffn1.cols() != layer.ffn2.rows()) {
            throw ShapeError("self-attention: feedforward shapes inconsistent");
        }
    }
    if (w.out.rows() != dim || w.out.cols() != kFrameDim || w.out_bias.size() != kFrameDim) {
        throw ShapeError("self-attention: output head must be dim x 19");
    }
}

}  // namespace

Matrix self_attention_encode(const Matrix& frames, const SelfAttentionWeights& w, SelfAttentionCost* cost) {
    check_self_attention(w, frames.cols());
    MacCounter* total = cost ? &cost->total : nullptr;
    MacCounter scratch_attention;
    MacCounter* attention = cost ? &cost->attention : nullptr;

    Matrix x = affine(frames, w.in, w.in_bias, total);
    add_positional_encoding(x);
    for (const auto& layer : w.layers) {
        const Matrix q = affine(x, layer.wq, layer.bq, total);
        const Matrix k = affine(x, layer.wk, layer.bk, total);
        const Matrix v = affine(x, layer.wv, layer.bv, total);
        scratch_attention.reset();
        const Matrix ctx = multi_head_attention(q, k, v, w.heads, &scratch_attention);
        if (attention) {
            attention->macs += scratch_attention.macs;
            attention->exps += scratch_attention.exps;
        }
        if (total) {
            total->macs += scratch_attention.macs;
            total->exps += scratch_attention.exps;
        }
        residual_norm(x, affine(ctx, layer.wo, layer.bo, total));
        Matrix hidden = affine(x, layer.ffn1, layer.b1, total);
        for (auto& e : hidden.data()) e = e > 0.0f ? e : 0.0f;
        residual_norm(x, affine(hidden, layer.ffn2, layer.b2, total));
    }
    return x;
}

Matrix self_attention_decode(const FrameFeatureTrack& track, const SelfAttentionWeights& w, SelfAttentionCost* cost) {
    if (track.length() == 0) throw ShapeError("self_attention_decode: empty track");
    const Matrix enc = self_attention_encode(track.frames, w, cost);
    return affine(enc, w.out, w.out_bias, cost ? &cost->total : nullptr);
}

std::uint64_t self_attention_attention_macs(const SelfAttentionWeights& w, std::size_t frames) {
    const std::uint64_t l = frames;
    return w.layers.size() * 2 * l * l * w.dim();
}

std::uint64_t self_attention_total_macs(const SelfAttentionWeights& w, std::size_t frames) {
    const std::uint64_t l = frames;
    const std::uint64_t dim = w.dim();
    std::uint64_t macs = l * w.in.rows() * dim + l * dim * kFrameDim;
    for (const auto& layer : w.layers) {
        macs += 4 * l * dim * dim + 2 * l * dim * layer.ffn1.cols();
    }
    return macs + self_attention_attention_macs(w, frames);
}

}  // namespace mrtts
