#include "mrtts/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "mrtts/decoder.hpp"
#include "mrtts/encoder.hpp"
#include "mrtts/errors.hpp"
#include "mrtts/features.hpp"

namespace mrtts::oracle {

void OracleReport::merge(const OracleReport& o) {
    max_abs_err = std::max(max_abs_err, o.max_abs_err);
    max_rel_err = std::max(max_rel_err, o.max_rel_err);
    compared += o.compared;
}

OracleReport compare(std::span<const float> actual, std::span<const float> expected, std::string name) {
    if (actual.size() != expected.size()) {
        throw ShapeError("oracle compare " + name + ": " + std::to_string(actual.size()) + " vs " +
                         std::to_string(expected.size()) + " elements");
    }
    OracleReport r;
    r.name = std::move(name);
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double a = actual[i];
        const double b = expected[i];
        const double abs_err = std::fabs(a - b);
        const double denom = std::max({std::fabs(a), std::fabs(b), kRelFloor});
        r.max_abs_err = std::max(r.max_abs_err, abs_err);
        r.max_rel_err = std::max(r.max_rel_err, abs_err / denom);
        if (std::isnan(a) != std::isnan(b)) r.max_rel_err = INFINITY;
    }
    r.compared = actual.size();
    return r;
}

OracleReport compare(const Matrix& actual, const Matrix& expected, std::string name) {
    if (actual.rows() != expected.rows() || actual.cols() != expected.cols()) {
        throw ShapeError("oracle compare " + name + ": matrix shapes differ");
    }
    return compare(actual.data(), expected.data(), std::move(name));
}

Matrix oracle_matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ShapeError("oracle_matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<double>(a(i, k)) * b(k, j);
            c(i, j) = static_cast<float>(s);
        }
    }
    return c;
}

std::vector<float> oracle_linear(std::span<const float> x, const Matrix& w, std::span<const float> b) {
    if (x.size() != w.rows() || (!b.empty() && b.size() != w.cols())) throw ShapeError("oracle_linear: shapes");
    std::vector<double> s(w.cols(), 0.0);
    if (!b.empty()) s.assign(b.begin(), b.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) s[j] += static_cast<double>(x[i]) * w(i, j);
    }
    return {s.begin(), s.end()};
}

std::vector<double> oracle_softmax(std::span<const double> v) {
    if (v.empty()) throw ShapeError("oracle_softmax: empty");
    double mx = v[0];
    for (double e : v) mx = e > mx ? e : mx;
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (auto& e : out) e /= sum;
    return out;
}

std::pair<std::vector<float>, std::vector<float>> oracle_lstm_cell(std::span<const float> x,
                                                                    std::span<const float> h_prev,
                                                                    std::span<const float> c_prev,
                                                                    const LstmWeights& w) {
    const std::size_t hid = w.w_hh.rows();
    if (x.size() != w.w_ih.rows() || h_prev.size() != hid || c_prev.size() != hid || w.w_ih.cols() != 4 * hid ||
        w.w_hh.cols() != 4 * hid || w.bias.size() != 4 * hid) {
        throw ShapeError("oracle_lstm_cell: shapes");
    }
    // Pre-activations z = x.W_ih + h.W_hh + b for all four gate blocks.
    std::vector<double> z(w.bias.begin(), w.bias.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t col = 0; col < 4 * hid; ++col) z[col] += static_cast<double>(x[i]) * w.w_ih(i, col);
    }
    for (std::size_t i = 0; i < hid; ++i) {
        for (std::size_t col = 0; col < 4 * hid; ++col) z[col] += static_cast<double>(h_prev[i]) * w.w_hh(i, col);
    }
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    std::vector<float> h(hid), c(hid);
    for (std::size_t j = 0; j < hid; ++j) {
        const double i_g = sig(z[j]);
        const double f_g = sig(z[hid + j]);
        const double g_g = std::tanh(z[2 * hid + j]);
        const double o_g = sig(z[3 * hid + j]);
        const double cn = f_g * c_prev[j] + i_g * g_g;
        c[j] = static_cast<float>(cn);
        h[j] = static_cast<float>(o_g * std::tanh(cn));
    }
    return {h, c};
}

Matrix oracle_conv1d(const Matrix& x, const Matrix& filters, std::span<const float> bias, std::size_t kernel) {
    if (kernel % 2 == 0) throw ConfigError("oracle_conv1d: even kernel");
    const std::size_t d_in = x.cols();
    const std::size_t d_out = filters.rows();
    if (filters.cols() != d_in * kernel || bias.size() != d_out) throw ShapeError("oracle_conv1d: shapes");
    const long len = static_cast<long>(x.rows());
    const long half = static_cast<long>(kernel / 2);
    Matrix y(x.rows(), d_out);
    for (long n = 0; n < len; ++n) {
        for (std::size_t m = 0; m < d_out; ++m) {
            double s = bias[m];
            for (std::size_t c = 0; c < d_in; ++c) {
                for (std::size_t k = 0; k < kernel; ++k) {
                    const long src = n + static_cast<long>(k) - half;
                    const double xv = (src >= 0 && src < len) ? x(static_cast<std::size_t>(src), c) : 0.0;
                    s += static_cast<double>(filters(m, c * kernel + k)) * xv;
                }
            }
            y(static_cast<std::size_t>(n), m) = static_cast<float>(s);
        }
    }
    return y;
}

OraclePool oracle_maxpool(const Matrix& x, std::size_t l_max) {
    if (x.rows() == 0 || l_max == 0) throw ShapeError("oracle_maxpool: empty input or zero l_max");
    const std::size_t len = x.rows();
    const std::size_t out_len = len < l_max ? len : l_max;
    std::size_t stride = 1;
    while (stride * l_max < len) ++stride;  // smallest S with S * l_max >= L
    // Explicit zero padding to S * out_len rows.
    Matrix padded(stride * out_len, x.cols());
    for (std::size_t r = 0; r < len; ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) padded(r, c) = x(r, c);
    }
    Matrix y(out_len, x.cols());
    for (std::size_t n = 0; n < out_len; ++n) {
        for (std::size_t m = 0; m < x.cols(); ++m) {
            float best = padded(n * stride, m);
            for (std::size_t a = n * stride; a <= n * stride + stride - 1; ++a) best = std::max(best, padded(a, m));
            y(n, m) = best;
        }
    }
    return {y, stride};
}

std::vector<float> oracle_attention(std::span<const float> q, const Matrix& keys, const Matrix& values) {
    const std::size_t dk = keys.cols();
    if (q.size() != dk || values.rows() != keys.rows() || keys.rows() == 0) {
        throw ShapeError("oracle_attention: shapes");
    }
    std::vector<double> scores(keys.rows());
    for (std::size_t j = 0; j < keys.rows(); ++j) {
        double s = 0.0;
        for (std::size_t d = 0; d < dk; ++d) s += static_cast<double>(q[d]) * keys(j, d);
        scores[j] = s / std::sqrt(static_cast<double>(dk));
    }
    const auto p = oracle_softmax(scores);
    std::vector<float> out(values.cols());
    for (std::size_t d = 0; d < values.cols(); ++d) {
        double s = 0.0;
        for (std::size_t j = 0; j < values.rows(); ++j) s += p[j] * values(j, d);
        out[d] = static_cast<float>(s);
    }
    return out;
}

SourceEncoding oracle_encode(const Matrix& x, const LevelEncoderWeights& w, std::size_t l_max) {
    auto relu = [](Matrix m) {
        for (std::size_t r = 0; r < m.rows(); ++r) {
            for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = m(r, c) > 0.0f ? m(r, c) : 0.0f;
        }
        return m;
    };
    Matrix h = relu(oracle_conv1d(x, w.conv1.filters, w.conv1.bias, w.conv1.kernel));
    h = relu(oracle_conv1d(h, w.conv2.filters, w.conv2.bias, w.conv2.kernel));
    auto pooled = oracle_maxpool(h, l_max);
    SourceEncoding enc;
    enc.source_len = x.rows();
    enc.pooled_len = pooled.pooled.rows();
    enc.stride = pooled.stride;
    enc.keys = oracle_matmul(pooled.pooled, w.key);
    enc.values = oracle_matmul(pooled.pooled, w.value);
    return enc;
}

Matrix oracle_batch_decode(const FrameFeatureTrack& track, std::span<const SourceEncoding> encodings,
                           const DecoderWeights& w, bool feedback) {
    if (encodings.size() != 3) throw ShapeError("oracle_batch_decode: need three encodings");
    const std::size_t df = track.frames.cols();
    const std::size_t h1n = w.lstm1.w_hh.rows();
    const std::size_t h2n = w.lstm2.w_hh.rows();
    if (w.lstm1.w_ih.rows() != df + kFrameDim) throw ShapeError("oracle_batch_decode: frame width");

    std::vector<float> h1(h1n, 0.0f), c1(h1n, 0.0f), h2(h2n, 0.0f), c2(h2n, 0.0f);
    std::vector<float> y_prev(kFrameDim, 0.0f);
    Matrix frames(track.length(), kFrameDim);
    for (std::size_t t = 0; t < track.length(); ++t) {
        std::vector<float> u(df + kFrameDim, 0.0f);
        for (std::size_t i = 0; i < df; ++i) u[i] = track.frames(t, i);
        if (feedback) {
            for (std::size_t i = 0; i < kFrameDim; ++i) u[df + i] = y_prev[i];
        }
        std::tie(h1, c1) = oracle_lstm_cell(u, h1, c1, w.lstm1);
        std::tie(h2, c2) = oracle_lstm_cell(h1, h2, c2, w.lstm2);

        std::vector<float> ctx;
        for (std::size_t i = 0; i < 3; ++i) {
            const auto q = oracle_linear(h2, w.query[i], {});
            const auto c = oracle_attention(q, encodings[i].keys, encodings[i].values);
            ctx.insert(ctx.end(), c.begin(), c.end());
        }
        auto hc = oracle_linear(ctx, w.combine, {});
        hc.insert(hc.end(), h2.begin(), h2.end());
        const auto y = oracle_linear(hc, w.out, w.out_bias);
        for (std::size_t i = 0; i < kFrameDim; ++i) frames(t, i) = y[i];
        y_prev = y;
    }
    return frames;
}

double mse_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("mse_loss: shapes differ");
    if (pred.size() == 0) throw ShapeError("mse_loss: empty");
    double s = 0.0;
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        for (std::size_t c = 0; c < pred.cols(); ++c) {
            const double d = static_cast<double>(pred(r, c)) - target(r, c);
            s += d * d;
        }
    }
    return s / static_cast<double>(pred.size());
}

}  // namespace mrtts::oracle
