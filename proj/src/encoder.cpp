#include "mrtts/encoder.hpp"

#include <algorithm>
#include <string>

#include "mrtts/errors.hpp"
#include "mrtts/features.hpp"
#include "mrtts/parallel.hpp"

namespace mrtts {

namespace {

void relu_inplace(Matrix& m) {
    for (auto& v : m.data()) v = v > 0.0f ? v : 0.0f;
}

std::size_t pooled_length(std::size_t len, std::size_t l_max) { return std::min(len, l_max); }

std::size_t pool_stride(std::size_t len, std::size_t l_max) { return len / l_max + (len % l_max != 0 ? 1 : 0); }

}  // namespace

Matrix conv1d_same(const Matrix& x, const ConvLayer& layer, MacCounter* counter) {
    const std::size_t k = layer.kernel;
    if (k % 2 == 0) throw ConfigError("conv1d_same: kernel size " + std::to_string(k) + " is not odd");
    if (x.rows() == 0) throw ShapeError("conv1d_same: empty input");
    const std::size_t d_in = x.cols();
    const std::size_t d_out = layer.out_channels();
    if (layer.filters.cols() != d_in * k || layer.bias.size() != d_out) {
        throw ShapeError("conv1d_same: filters " + std::to_string(layer.filters.rows()) + "x" +
                         std::to_string(layer.filters.cols()) + " do not fit input width " + std::to_string(d_in));
    }
    const long len = static_cast<long>(x.rows());
    const long half = static_cast<long>(k / 2);
    Matrix out(x.rows(), d_out);

    // Tap-major copy of the filters, [tap][c][m], so the innermost loop runs
    // over contiguous output channels.
    std::vector<float> taps(k * d_in * d_out);
    for (std::size_t m = 0; m < d_out; ++m) {
        const auto frow = layer.filters.row(m);
        for (std::size_t c = 0; c < d_in; ++c) {
            for (std::size_t tap = 0; tap < k; ++tap) taps[(tap * d_in + c) * d_out + m] = frow[c * k + tap];
        }
    }

#pragma omp parallel if (len >= parallel::kMinParallelRows)
    {
        std::vector<double> acc(d_out);
#pragma omp for schedule(static)
        for (long n = 0; n < len; ++n) {
            for (std::size_t m = 0; m < d_out; ++m) acc[m] = layer.bias[m];
            for (std::size_t tap = 0; tap < k; ++tap) {
                const long src = n + static_cast<long>(tap) - half;
                if (src < 0 || src >= len) continue;
                const auto xrow = x.row(static_cast<std::size_t>(src));
                for (std::size_t c = 0; c < d_in; ++c) {
                    const double xv = xrow[c];
                    const float* w = taps.data() + (tap * d_in + c) * d_out;
                    double* a = acc.data();
#pragma omp simd
                    for (std::size_t m = 0; m < d_out; ++m) a[m] += xv * w[m];
                }
            }
            auto orow = out.row(static_cast<std::size_t>(n));
            for (std::size_t m = 0; m < d_out; ++m) orow[m] = static_cast<float>(acc[m]);
        }
    }
    count_macs(counter, static_cast<std::uint64_t>(len) * d_in * d_out * k);
    return out;
}

PoolResult dynamic_max_pool(const Matrix& x, std::size_t l_max) {
    if (x.rows() == 0) throw ShapeError("dynamic_max_pool: empty input");
    if (l_max == 0) throw ConfigError("dynamic_max_pool: l_max must be >= 1");
    const std::size_t len = x.rows();
    const std::size_t out_len = pooled_length(len, l_max);
    const std::size_t stride = pool_stride(len, l_max);
    if (stride == 1) return {x, 1};

    Matrix out(out_len, x.cols());
    for (std::size_t n = 0; n < out_len; ++n) {
        auto orow = out.row(n);
        const std::size_t begin = n * stride;
        const std::size_t end = begin + stride;
        // Rows past the input are the zero padding.
        if (end > len) {
            std::fill(orow.begin(), orow.end(), 0.0f);
        } else {
            const auto first = x.row(begin);
            std::copy(first.begin(), first.end(), orow.begin());
        }
        for (std::size_t a = begin; a < std::min(end, len); ++a) {
            const auto xrow = x.row(a);
            for (std::size_t m = 0; m < x.cols(); ++m) orow[m] = std::max(orow[m], xrow[m]);
        }
    }
    return {std::move(out), stride};
}

SourceEncoding encode_source(Level level, const Matrix& x, const LevelEncoderWeights& w, std::size_t l_max,
                             MacCounter* counter) {
    if (x.rows() == 0) throw ShapeError("encode_source: empty " + std::string(level_name(level)) + " features");
    Matrix h = conv1d_same(x, w.conv1, counter);
    relu_inplace(h);
    h = conv1d_same(h, w.conv2, counter);
    relu_inplace(h);
    auto pooled = dynamic_max_pool(h, l_max);

    SourceEncoding enc;
    enc.level = level;
    enc.source_len = x.rows();
    enc.pooled_len = pooled.pooled.rows();
    enc.stride = pooled.stride;
    enc.keys = matmul(pooled.pooled, w.key, counter);
    enc.values = matmul(pooled.pooled, w.value, counter);
    return enc;
}

Encodings encode_tree(const ContextTree& tree, const EncoderWeights& w, const ModelConfig& config,
                      MacCounter* counter) {
    Encodings out;
    for (Level l : kLevels) {
        out[static_cast<std::size_t>(l)] = encode_source(l, tree.level(l), w.at(l), config.level_l_max(l), counter);
    }
    return out;
}

std::uint64_t encoder_level_macs(std::size_t length, std::size_t dim, std::size_t kernel, std::size_t l_max) {
    const std::uint64_t conv = 2ULL * length * dim * dim * kernel;
    const std::uint64_t proj = 2ULL * pooled_length(length, l_max) * dim * dim;
    return conv + proj;
}

}  // namespace mrtts
