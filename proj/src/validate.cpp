#include "mrtts/validate.hpp"

#include <algorithm>
#include <array>

#include "mrtts/decoder.hpp"
#include "mrtts/encoder.hpp"
#include "mrtts/features.hpp"
#include "mrtts/prng.hpp"
#include "mrtts/weights.hpp"

namespace mrtts {

namespace {

Matrix random_matrix(Xorshift64Star& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (auto& v : m.storage()) v = static_cast<float>(scale * (2.0 * rng.uniform() - 1.0));
    return m;
}

std::vector<float> random_vector(Xorshift64Star& rng, std::size_t n, double scale = 1.0) {
    std::vector<float> v(n);
    for (auto& e : v) e = static_cast<float>(scale * (2.0 * rng.uniform() - 1.0));
    return v;
}

std::size_t dim(Xorshift64Star& rng, std::size_t lo, std::size_t hi) {
    return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

ConvLayer random_conv(Xorshift64Star& rng, std::size_t d_in, std::size_t d_out, std::size_t kernel) {
    return {random_matrix(rng, d_out, d_in * kernel, 0.5), random_vector(rng, d_out, 0.1), kernel};
}

LstmWeights random_lstm(Xorshift64Star& rng, std::size_t in, std::size_t hid) {
    return {random_matrix(rng, in, 4 * hid, 0.3), random_matrix(rng, hid, 4 * hid, 0.3), random_vector(rng, 4 * hid, 0.1)};
}

SourceEncoding random_encoding(Xorshift64Star& rng, std::size_t len, std::size_t dk) {
    SourceEncoding enc;
    enc.keys = random_matrix(rng, len, dk);
    enc.values = random_matrix(rng, len, dk);
    enc.source_len = enc.pooled_len = len;
    return enc;
}

ValidationCheck check_matmul(Xorshift64Star& rng, std::size_t cases) {
    ValidationCheck c{{"matmul"}, oracle::kKernelTol};
    for (std::size_t i = 0; i < cases; ++i) {
        const Matrix a = random_matrix(rng, dim(rng, 1, 70), dim(rng, 1, 40));
        const Matrix b = random_matrix(rng, a.cols(), dim(rng, 1, 40));
        c.report.merge(oracle::compare(matmul(a, b), oracle::oracle_matmul(a, b)));
    }
    return c;
}

ValidationCheck check_conv(Xorshift64Star& rng, std::size_t cases) {
    ValidationCheck c{{"conv1d_same"}, oracle::kKernelTol};
    for (std::size_t i = 0; i < cases; ++i) {
        const std::size_t kernel = 2 * dim(rng, 0, 3) + 1;
        const Matrix x = random_matrix(rng, dim(rng, 1, 80), dim(rng, 1, 24));
        const ConvLayer layer = random_conv(rng, x.cols(), dim(rng, 1, 24), kernel);
        c.report.merge(oracle::compare(conv1d_same(x, layer), oracle::oracle_conv1d(x, layer.filters, layer.bias, kernel)));
    }
    return c;
}

ValidationCheck check_pool(Xorshift64Star& rng, std::size_t cases) {
    ValidationCheck c{{"dynamic_max_pool"}, 0.0};
    for (std::size_t i = 0; i < cases; ++i) {
        const Matrix x = random_matrix(rng, dim(rng, 1, 300), dim(rng, 1, 8));
        const std::size_t l_max = dim(rng, 1, 60);
        const PoolResult fast = dynamic_max_pool(x, l_max);
        const oracle::OraclePool slow = oracle::oracle_maxpool(x, l_max);
        auto r = oracle::compare(fast.pooled, slow.pooled);
        if (fast.stride != slow.stride) r.max_rel_err = 1.0;
        c.report.merge(r);
    }
    return c;
}

ValidationCheck check_attention(Xorshift64Star& rng, std::size_t cases) {
    ValidationCheck c{{"attend_head"}, oracle::kKernelTol};
    for (std::size_t i = 0; i < cases; ++i) {
        const std::size_t dk = dim(rng, 1, 32);
        const SourceEncoding enc = random_encoding(rng, dim(rng, 1, 60), dk);
        const auto q = random_vector(rng, dk, 2.0);
        c.report.merge(oracle::compare(attend_head(q, enc), oracle::oracle_attention(q, enc.keys, enc.values)));
    }
    return c;
}

ValidationCheck check_combine(Xorshift64Star& rng, std::size_t cases) {
    ValidationCheck c{{"combine_heads"}, oracle::kKernelTol};
    for (std::size_t i = 0; i < cases; ++i) {
        const auto cw = random_vector(rng, dim(rng, 1, 32));
        const auto cs = random_vector(rng, dim(rng, 1, 32));
        const auto cp = random_vector(rng, dim(rng, 1, 32));
        const Matrix w = random_matrix(rng, cw.size() + cs.size() + cp.size(), dim(rng, 1, 64));
        std::vector<float> cat(cw);
        cat.insert(cat.end(), cs.begin(), cs.end());
        cat.insert(cat.end(), cp.begin(), cp.end());
        c.report.merge(oracle::compare(combine_heads(cw, cs, cp, w), oracle::oracle_linear(cat, w, {})));
    }
    return c;
}

ValidationCheck check_lstm(Xorshift64Star& rng, std::size_t cases) {
    ValidationCheck c{{"lstm_cell_step"}, oracle::kKernelTol};
    for (std::size_t i = 0; i < cases; ++i) {
        const LstmWeights w = random_lstm(rng, dim(rng, 1, 40), dim(rng, 1, 48));
        const auto x = random_vector(rng, w.input_size());
        const auto h = random_vector(rng, w.hidden_size());
        const auto cc = random_vector(rng, w.hidden_size());
        const auto fast = lstm_cell_step(x, h, cc, w);
        const auto [h_ref, c_ref] = oracle::oracle_lstm_cell(x, h, cc, w);
        c.report.merge(oracle::compare(fast.h, h_ref));
        c.report.merge(oracle::compare(fast.c, c_ref));
    }
    return c;
}

ValidationCheck check_encoder(Xorshift64Star& rng, std::size_t cases) {
    ValidationCheck c{{"encode_source"}, oracle::kKernelTol};
    for (std::size_t i = 0; i < cases; ++i) {
        const std::size_t d = dim(rng, 1, 24);
        const LevelEncoderWeights w{random_conv(rng, d, d, 5), random_conv(rng, d, d, 5), random_matrix(rng, d, d),
                                    random_matrix(rng, d, d)};
        const Matrix x = random_matrix(rng, dim(rng, 1, 200), d);
        const std::size_t l_max = dim(rng, 1, 60);
        const SourceEncoding fast = encode_source(Level::kPhone, x, w, l_max);
        const SourceEncoding slow = oracle::oracle_encode(x, w, l_max);
        c.report.merge(oracle::compare(fast.keys, slow.keys));
        c.report.merge(oracle::compare(fast.values, slow.values));
    }
    return c;
}

ValidationCheck check_decode(std::uint64_t seed, std::size_t cases) {
    ValidationCheck c{{"decode_stream"}, oracle::kDecodeTol};
    const std::array<ModelKind, 1> kinds = {ModelKind::kMultirate};
    const std::size_t utterances = std::max<std::size_t>(1, cases / 10);
    for (std::size_t i = 0; i < utterances; ++i) {
        ModelConfig config;
        config.feedback = i % 2 == 0;
        const ModelWeights weights = weights_init(seed + i, config, kinds);
        const DecoderWeights dec = weights.decoder();
        CorpusSpec spec;
        spec.dims = config;
        const ContextTree tree = synth_corpus(seed + 1000 + i, spec).front();
        const Encodings enc = encode_tree(tree, weights.encoder(), config);
        const FrameFeatureTrack track = unroll_frames(tree);
        Matrix streamed(track.length(), kFrameDim);
        decode_stream(
            track, enc, dec,
            [&](std::size_t t, std::span<const float> y) {
                std::copy(y.begin(), y.end(), streamed.row(t).begin());
                return true;
            },
            {config.feedback});
        c.report.merge(oracle::compare(streamed, oracle::oracle_batch_decode(track, enc, dec, config.feedback)));
    }
    return c;
}

void kernel_checks(Xorshift64Star& rng, std::size_t cases, std::vector<ValidationCheck>& out) {
    out.push_back(check_matmul(rng, cases));
    out.push_back(check_conv(rng, cases));
    out.push_back(check_pool(rng, cases));
    out.push_back(check_attention(rng, cases));
    out.push_back(check_combine(rng, cases));
    out.push_back(check_lstm(rng, cases));
}

}  // namespace

std::vector<ValidationCheck> run_kernel_validation(std::uint64_t seed, std::size_t cases) {
    Xorshift64Star rng(seed);
    std::vector<ValidationCheck> out;
    kernel_checks(rng, cases, out);
    return out;
}

std::vector<ValidationCheck> run_validation(std::uint64_t seed, std::size_t cases) {
    Xorshift64Star rng(seed);
    std::vector<ValidationCheck> out;
    kernel_checks(rng, cases, out);
    out.push_back(check_encoder(rng, cases));
    out.push_back(check_decode(seed, cases));
    return out;
}

}  // namespace mrtts
