#include <doctest.h>

#include "mrtts/encoder.hpp"
#include "mrtts/errors.hpp"
#include "mrtts/oracle.hpp"
#include "mrtts/parallel.hpp"
#include "support.hpp"

using namespace mrtts;
using mrtts::test::random_matrix;
using mrtts::test::random_size;
using mrtts::test::random_vector;

namespace {

ConvLayer random_conv(Xorshift64Star& rng, std::size_t d_in, std::size_t d_out, std::size_t kernel) {
    return {random_matrix(rng, d_out, d_in * kernel, 0.5), random_vector(rng, d_out, 0.1), kernel};
}

LevelEncoderWeights random_level(Xorshift64Star& rng, std::size_t d) {
    return {random_conv(rng, d, d, 5), random_conv(rng, d, d, 5), random_matrix(rng, d, d), random_matrix(rng, d, d)};
}

Matrix column(std::initializer_list<float> v) {
    Matrix m(v.size(), 1);
    std::size_t i = 0;
    for (float e : v) m(i++, 0) = e;
    return m;
}

}  // namespace

TEST_CASE("kernel-1 identity convolution returns its input") {
    Xorshift64Star rng(1);
    const Matrix x = random_matrix(rng, 9, 4);
    const ConvLayer identity{Matrix::identity(4), std::vector<float>(4, 0.0f), 1};
    CHECK(conv1d_same(x, identity) == x);
    CHECK(oracle::oracle_conv1d(x, identity.filters, identity.bias, 1) == x);
}

TEST_CASE("convolution with zero padding, by hand") {
    const ConvLayer ones{Matrix{{1, 1, 1}}, {0.0f}, 3};
    CHECK(conv1d_same(column({1, 2, 3}), ones) == column({3, 6, 5}));
}

TEST_CASE("convolution counts L x d_in x d_out x K") {
    Xorshift64Star rng(2);
    MacCounter c;
    conv1d_same(random_matrix(rng, 11, 6), random_conv(rng, 6, 7, 5), &c);
    CHECK(c.macs == 11 * 6 * 7 * 5);
}

TEST_CASE("even kernels are rejected") {
    const ConvLayer even{Matrix(2, 4), std::vector<float>(2), 2};
    CHECK_THROWS_AS(conv1d_same(Matrix(5, 2), even), ConfigError);
}

TEST_CASE("seed-3 convolution matches the reference") {
    Xorshift64Star rng(3);
    const Matrix x = random_matrix(rng, 7, 4);
    const ConvLayer layer = random_conv(rng, 4, 4, 5);
    CHECK(oracle::compare(conv1d_same(x, layer), oracle::oracle_conv1d(x, layer.filters, layer.bias, 5)).within(1e-5));
}

TEST_CASE("convolution matches the reference on random inputs up to 64x32") {
    Xorshift64Star rng(33);
    for (int i = 0; i < 150; ++i) {
        const std::size_t kernel = 2 * random_size(rng, 0, 3) + 1;
        const Matrix x = random_matrix(rng, random_size(rng, 1, 64), random_size(rng, 1, 32));
        const ConvLayer layer = random_conv(rng, x.cols(), random_size(rng, 1, 32), kernel);
        CHECK(oracle::compare(conv1d_same(x, layer), oracle::oracle_conv1d(x, layer.filters, layer.bias, kernel))
                  .within(1e-5));
    }
}

TEST_CASE("threaded convolution is bit-identical to single-threaded") {
    Xorshift64Star rng(4);
    const Matrix x = random_matrix(rng, 500, 16);
    const ConvLayer layer = random_conv(rng, 16, 16, 5);
    Matrix one, many;
    {
        parallel::ScopedThreads s(1);
        one = conv1d_same(x, layer);
    }
    {
        parallel::ScopedThreads s(3);
        many = conv1d_same(x, layer);
    }
    CHECK(one == many);
}

TEST_CASE("pooling examples") {
    Xorshift64Star rng(6);
    const Matrix x50 = random_matrix(rng, 50, 3);
    const PoolResult same = dynamic_max_pool(x50, 50);
    CHECK(same.stride == 1);
    CHECK(same.pooled == x50);

    const PoolResult p120 = dynamic_max_pool(random_matrix(rng, 120, 2), 50);
    CHECK(p120.stride == 3);
    CHECK(p120.pooled.rows() == 50);

    const PoolResult hand = dynamic_max_pool(column({1, 5, 2, 9, 3, 7}), 2);
    CHECK(hand.stride == 3);
    CHECK(hand.pooled == column({5, 9}));
}

TEST_CASE("zero padding takes part in the window max") {
    // L=5, l_max=2: S=3, padded to 6 rows; the second window is [-4, -5, 0].
    const PoolResult p = dynamic_max_pool(column({-1, -2, -3, -4, -5}), 2);
    CHECK(p.pooled == column({-1, 0}));
    CHECK(oracle::oracle_maxpool(column({-1, -2, -3, -4, -5}), 2).pooled == column({-1, 0}));
}

TEST_CASE("pooled length, stride and window max over a grid") {
    Xorshift64Star rng(8);
    for (std::size_t len = 1; len <= 130; ++len) {
        const Matrix x = random_matrix(rng, len, 3);
        for (std::size_t l_max : {1, 2, 7, 50, 500}) {
            const PoolResult fast = dynamic_max_pool(x, l_max);
            CHECK(fast.pooled.rows() == std::min(len, l_max));
            CHECK(fast.stride == (len + l_max - 1) / l_max);
            const auto slow = oracle::oracle_maxpool(x, l_max);
            CHECK(fast.pooled == slow.pooled);
            CHECK(fast.stride == slow.stride);
            if (len <= l_max) CHECK(fast.pooled == x);
        }
    }
}

TEST_CASE("disabled pooling keeps the full source length") {
    Xorshift64Star rng(9);
    const Matrix x = random_matrix(rng, 777, 2);
    const PoolResult p = dynamic_max_pool(x, kNoPooling);
    CHECK(p.stride == 1);
    CHECK(p.pooled == x);
    const SourceEncoding enc = encode_source(Level::kSyllable, random_matrix(rng, 300, 5), random_level(rng, 5), kNoPooling);
    CHECK(enc.pooled_len == 300);
}

TEST_CASE("encode_source lengths follow the pooling cap") {
    Xorshift64Star rng(10);
    const LevelEncoderWeights w = random_level(rng, 24);
    const SourceEncoding short_enc = encode_source(Level::kPhone, random_matrix(rng, 10, 24), w, 50);
    CHECK(short_enc.pooled_len == 10);
    CHECK(short_enc.stride == 1);
    CHECK(short_enc.keys.rows() == 10);
    const SourceEncoding long_enc = encode_source(Level::kPhone, random_matrix(rng, 500, 24), w, 50);
    CHECK(long_enc.pooled_len == 50);
    CHECK(long_enc.stride == 10);
    CHECK(long_enc.keys.rows() == 50);
    CHECK(long_enc.values.cols() == 24);
    CHECK(long_enc.d_k() == 24);
    CHECK(long_enc.source_len == 500);
}

TEST_CASE("encode_source matches the reference encoder") {
    Xorshift64Star rng(11);
    for (int i = 0; i < 20; ++i) {
        const std::size_t d = random_size(rng, 1, 24);
        const LevelEncoderWeights w = random_level(rng, d);
        const Matrix x = random_matrix(rng, random_size(rng, 1, 300), d);
        const std::size_t l_max = random_size(rng, 1, 60);
        const SourceEncoding fast = encode_source(Level::kWord, x, w, l_max);
        const SourceEncoding slow = oracle::oracle_encode(x, w, l_max);
        CHECK(oracle::compare(fast.keys, slow.keys).within(1e-5));
        CHECK(oracle::compare(fast.values, slow.values).within(1e-5));
        CHECK(fast.stride == slow.stride);
    }
}

TEST_CASE("encoder MACs are linear in source length") {
    Xorshift64Star rng(12);
    const LevelEncoderWeights w = random_level(rng, 24);
    MacCounter at1000, at2000;
    encode_source(Level::kPhone, random_matrix(rng, 1000, 24), w, 50, &at1000);
    encode_source(Level::kPhone, random_matrix(rng, 2000, 24), w, 50, &at2000);
    const double ratio = static_cast<double>(at2000.macs) / static_cast<double>(at1000.macs);
    CHECK(ratio >= 1.9);
    CHECK(ratio <= 2.1);
    CHECK(at1000.macs == encoder_level_macs(1000, 24, 5, 50));
    CHECK(at2000.macs == encoder_level_macs(2000, 24, 5, 50));
}

TEST_CASE("encode_tree produces one encoding per level") {
    const ModelConfig config;
    const ModelWeights weights = test::multirate_weights(1, config);
    const ContextTree tree = synth_tree_with_counts(4, 30, 70, 160, config);
    const Encodings enc = encode_tree(tree, weights.encoder(), config);
    CHECK(enc[0].level == Level::kWord);
    CHECK(enc[0].pooled_len == 30);
    CHECK(enc[1].pooled_len == 50);
    CHECK(enc[1].stride == 2);
    CHECK(enc[2].pooled_len == 50);
    CHECK(enc[2].stride == 4);
    CHECK(enc[2].d_k() == 24);
}
