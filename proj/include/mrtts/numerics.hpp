#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace mrtts {

// Dense row-major float matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);
    Matrix(std::initializer_list<std::initializer_list<float>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    std::vector<float>& storage() { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

// Multiply-accumulate and exponential tallies. Counting is opt-in: every
// kernel takes a nullable pointer and does nothing extra when it is null.
struct MacCounter {
    std::uint64_t macs = 0;
    std::uint64_t exps = 0;

    void add_macs(std::uint64_t n) { macs += n; }
    void add_exps(std::uint64_t n) { exps += n; }
    void reset() { macs = exps = 0; }
};

inline void count_macs(MacCounter* counter, std::uint64_t n) {
    if (counter) counter->macs += n;
}
inline void count_exps(MacCounter* counter, std::uint64_t n) {
    if (counter) counter->exps += n;
}

// a (m x k) times b (k x n). Rows are computed in parallel for large m.
Matrix matmul(const Matrix& a, const Matrix& b, MacCounter* counter = nullptr);

// x . w + b, where w is len(x) x out.
std::vector<float> linear(std::span<const float> x, const Matrix& w, std::span<const float> b,
                          MacCounter* counter = nullptr);

// Allocation-free form of `linear`; `out` must have w.cols() elements and may
// not alias `x`. An empty `b` means no bias.
void linear_into(std::span<const float> x, const Matrix& w, std::span<const float> b, std::span<float> out,
                 MacCounter* counter = nullptr);

std::vector<float> softmax(std::span<const float> v);

// In-place softmax over double scores (max-subtracted).
void softmax_inplace(std::span<double> v, MacCounter* counter = nullptr);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Weights of one LSTM layer. Gate blocks are laid out along the columns in
// the order (input, forget, candidate, output), each `hidden` wide.
struct LstmWeights {
    Matrix w_ih;              // input x 4*hidden
    Matrix w_hh;              // hidden x 4*hidden
    std::vector<float> bias;  // 4*hidden

    std::size_t input_size() const { return w_ih.rows(); }
    std::size_t hidden_size() const { return w_hh.rows(); }
    void check() const;
};

struct LstmOutput {
    std::vector<float> h;
    std::vector<float> c;
};

LstmOutput lstm_cell_step(std::span<const float> x, std::span<const float> h_prev, std::span<const float> c_prev,
                          const LstmWeights& w, MacCounter* counter = nullptr);

// Allocation-free form. h_out/c_out may alias h_prev/c_prev.
void lstm_cell_step_into(std::span<const float> x, std::span<const float> h_prev, std::span<const float> c_prev,
                         const LstmWeights& w, std::span<float> h_out, std::span<float> c_out,
                         MacCounter* counter = nullptr);

inline std::uint64_t lstm_step_macs(std::size_t input, std::size_t hidden) {
    return static_cast<std::uint64_t>(input + hidden) * 4 * hidden;
}

namespace fault {
// Test hook: a non-zero value is added to every LSTM hidden output. Used to
// prove that the validation suite detects a broken kernel.
void set_lstm_offset(float delta);
float lstm_offset();
}  // namespace fault

}  // namespace mrtts
