#include "mrtts/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <string>

#include "mrtts/errors.hpp"
#include "mrtts/parallel.hpp"

namespace mrtts {

namespace {

std::atomic<float> g_lstm_offset{0.0f};

std::string dims(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

// Per-thread double accumulator, grown on demand. After the first call with a
// given width no further allocation happens.
std::span<double> scratch(std::size_t n) {
    thread_local std::vector<double> buf;
    if (buf.size() < n) buf.resize(n);
    return {buf.data(), n};
}

// acc[j] += a * row[j]; the inner loop of every dense kernel here.
inline void axpy(double* __restrict acc, double a, const float* __restrict row, std::size_t n) {
#pragma omp simd
    for (std::size_t j = 0; j < n; ++j) acc[j] += a * row[j];
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " + dims(rows, cols));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<float>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("ragged matrix literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b, MacCounter* counter) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + dims(a.rows(), a.cols()) + " x " + dims(b.rows(), b.cols()));
    }
    const long m = static_cast<long>(a.rows());
    const std::size_t k = a.cols();
    const std::size_t n = b.cols();
    Matrix out(a.rows(), n);
    const float* bp = b.data().data();

#pragma omp parallel for schedule(static) if (m >= parallel::kMinParallelRows)
    for (long i = 0; i < m; ++i) {
        auto acc = scratch(n);
        std::fill(acc.begin(), acc.end(), 0.0);
        const auto arow = a.row(static_cast<std::size_t>(i));
        for (std::size_t p = 0; p < k; ++p) {
            axpy(acc.data(), arow[p], bp + p * n, n);
        }
        auto orow = out.row(static_cast<std::size_t>(i));
        for (std::size_t j = 0; j < n; ++j) orow[j] = static_cast<float>(acc[j]);
    }
    count_macs(counter, static_cast<std::uint64_t>(a.rows()) * k * n);
    return out;
}

void linear_into(std::span<const float> x, const Matrix& w, std::span<const float> b, std::span<float> out,
                 MacCounter* counter) {
    const std::size_t n = w.cols();
    if (x.size() != w.rows() || out.size() != n || (!b.empty() && b.size() != n)) {
        throw ShapeError("linear: x[" + std::to_string(x.size()) + "] . w " + dims(w.rows(), n) + " + b[" +
                         std::to_string(b.size()) + "] -> out[" + std::to_string(out.size()) + "]");
    }
    auto acc = scratch(n);
    if (b.empty()) {
        std::fill(acc.begin(), acc.end(), 0.0);
    } else {
        for (std::size_t j = 0; j < n; ++j) acc[j] = b[j];
    }
    const float* wp = w.data().data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        axpy(acc.data(), x[i], wp + i * n, n);
    }
    for (std::size_t j = 0; j < n; ++j) out[j] = static_cast<float>(acc[j]);
    count_macs(counter, static_cast<std::uint64_t>(x.size()) * n);
}

std::vector<float> linear(std::span<const float> x, const Matrix& w, std::span<const float> b, MacCounter* counter) {
    std::vector<float> out(w.cols());
    linear_into(x, w, b, out, counter);
    return out;
}

void softmax_inplace(std::span<double> v, MacCounter* counter) {
    if (v.empty()) throw ShapeError("softmax of empty vector");
    const double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& e : v) {
        e = std::exp(e - mx);
        sum += e;
    }
    for (double& e : v) e /= sum;
    count_exps(counter, v.size());
}

std::vector<float> softmax(std::span<const float> v) {
    std::vector<double> tmp(v.begin(), v.end());
    softmax_inplace(tmp);
    return {tmp.begin(), tmp.end()};
}

void LstmWeights::check() const {
    const std::size_t h = hidden_size();
    if (w_ih.cols() != 4 * h || w_hh.cols() != 4 * h || bias.size() != 4 * h) {
        throw ShapeError("lstm weights: w_ih " + dims(w_ih.rows(), w_ih.cols()) + ", w_hh " +
                         dims(w_hh.rows(), w_hh.cols()) + ", bias " + std::to_string(bias.size()));
    }
}

void lstm_cell_step_into(std::span<const float> x, std::span<const float> h_prev, std::span<const float> c_prev,
                         const LstmWeights& w, std::span<float> h_out, std::span<float> c_out, MacCounter* counter) {
    const std::size_t hid = w.hidden_size();
    const std::size_t g = 4 * hid;
    if (x.size() != w.input_size() || h_prev.size() != hid || c_prev.size() != hid || h_out.size() != hid ||
        c_out.size() != hid || w.w_ih.cols() != g || w.w_hh.cols() != g || w.bias.size() != g) {
        throw ShapeError("lstm_cell_step: x[" + std::to_string(x.size()) + "] h[" + std::to_string(h_prev.size()) +
                         "] against w_ih " + dims(w.w_ih.rows(), w.w_ih.cols()));
    }
    auto acc = scratch(g);
    for (std::size_t j = 0; j < g; ++j) acc[j] = w.bias[j];
    const float* wi = w.w_ih.data().data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        axpy(acc.data(), x[i], wi + i * g, g);
    }
    const float* wh = w.w_hh.data().data();
    for (std::size_t i = 0; i < hid; ++i) {
        axpy(acc.data(), h_prev[i], wh + i * g, g);
    }
    const float offset = g_lstm_offset.load(std::memory_order_relaxed);
    for (std::size_t j = 0; j < hid; ++j) {
        const double in = sigmoid(acc[j]);
        const double forget = sigmoid(acc[hid + j]);
        const double cand = std::tanh(acc[2 * hid + j]);
        const double outg = sigmoid(acc[3 * hid + j]);
        const double c = forget * c_prev[j] + in * cand;
        c_out[j] = static_cast<float>(c);
        h_out[j] = static_cast<float>(outg * std::tanh(c)) + offset;
    }
    count_macs(counter, lstm_step_macs(x.size(), hid));
    count_exps(counter, 5 * hid);
}

LstmOutput lstm_cell_step(std::span<const float> x, std::span<const float> h_prev, std::span<const float> c_prev,
                          const LstmWeights& w, MacCounter* counter) {
    LstmOutput out{std::vector<float>(w.hidden_size()), std::vector<float>(w.hidden_size())};
    lstm_cell_step_into(x, h_prev, c_prev, w, out.h, out.c, counter);
    return out;
}

namespace fault {
void set_lstm_offset(float delta) { g_lstm_offset.store(delta, std::memory_order_relaxed); }
float lstm_offset() { return g_lstm_offset.load(std::memory_order_relaxed); }
}  // namespace fault

}  // namespace mrtts
