#pragma once

// Brute-force reference implementations. Nothing in here calls into the
// numerics, encoder or decoder kernels; only the plain data containers are
// shared. Everything is single-threaded and accumulates in double.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrtts/numerics.hpp"

namespace mrtts {

struct FrameFeatureTrack;
struct SourceEncoding;
struct DecoderWeights;
struct LevelEncoderWeights;

namespace oracle {

// Elementwise relative error is |a - b| / max(|a|, |b|, kRelFloor).
inline constexpr double kRelFloor = 1e-6;
inline constexpr double kKernelTol = 1e-5;
inline constexpr double kDecodeTol = 1e-4;

struct OracleReport {
    std::string name;
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
    std::size_t compared = 0;

    bool within(double rel_tol) const { return compared > 0 && max_rel_err <= rel_tol; }
    void merge(const OracleReport& o);
};

OracleReport compare(std::span<const float> actual, std::span<const float> expected, std::string name = {});
OracleReport compare(const Matrix& actual, const Matrix& expected, std::string name = {});

Matrix oracle_matmul(const Matrix& a, const Matrix& b);
std::vector<float> oracle_linear(std::span<const float> x, const Matrix& w, std::span<const float> b);
std::vector<double> oracle_softmax(std::span<const double> v);

std::pair<std::vector<float>, std::vector<float>> oracle_lstm_cell(std::span<const float> x,
                                                                    std::span<const float> h_prev,
                                                                    std::span<const float> c_prev,
                                                                    const LstmWeights& w);

// filters: d_out x (d_in * kernel), element [m][c * kernel + k].
Matrix oracle_conv1d(const Matrix& x, const Matrix& filters, std::span<const float> bias, std::size_t kernel);

struct OraclePool {
    Matrix pooled;
    std::size_t stride = 1;
};
OraclePool oracle_maxpool(const Matrix& x, std::size_t l_max);

std::vector<float> oracle_attention(std::span<const float> q, const Matrix& keys, const Matrix& values);

// Full encoder for one level: conv, ReLU, conv, ReLU, pool, projections.
SourceEncoding oracle_encode(const Matrix& x, const LevelEncoderWeights& w, std::size_t l_max);

// All frames of an utterance in one pass.
Matrix oracle_batch_decode(const FrameFeatureTrack& track, std::span<const SourceEncoding> encodings,
                           const DecoderWeights& w, bool feedback = true);

double mse_loss(const Matrix& pred, const Matrix& target);

}  // namespace oracle
}  // namespace mrtts
