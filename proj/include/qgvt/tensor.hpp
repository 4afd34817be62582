// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qgvt {

/// Dense row-major float32 matrix. Vectors are stored as 1 x n matrices.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

    static Matrix identity(std::size_t n);
    static Matrix row_vector(std::span<const float> values);

    std::size_t rows() const { return m_rows; }
    std::size_t cols() const { return m_cols; }
    std::size_t size() const { return m_data.size(); }
    bool empty() const { return m_data.empty(); }

    float& operator()(std::size_t r, std::size_t c) { return m_data[r * m_cols + c]; }
    float operator()(std::size_t r, std::size_t c) const { return m_data[r * m_cols + c]; }

    std::span<float> row(std::size_t r) { return {m_data.data() + r * m_cols, m_cols}; }
    std::span<const float> row(std::size_t r) const { return {m_data.data() + r * m_cols, m_cols}; }

    std::span<float> data() { return m_data; }
    std::span<const float> data() const { return m_data; }

    bool all_finite() const;
    std::string shape_string() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<float> m_data;
};

/// Matrix product. Each output element accumulates a(i,k)*b(k,j) in double
/// precision in ascending k and is rounded to float once, so results are
/// bit-identical to the naive triple loop written the same way.
/// Throws ShapeError when a.cols() != b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);

namespace detail {
// matmul uses an AVX2/FMA kernel when the CPU has one. Tests switch it off to
// exercise the portable kernel; both produce identical bits.
bool matmul_simd_available();
void set_matmul_simd(bool enabled);
}  // namespace detail

Matrix transpose(const Matrix& m);

/// Columns [first, first + count) of m.
Matrix column_block(const Matrix& m, std::size_t first, std::size_t count);

/// Elementwise a + b. Throws ShapeError on mismatch.
Matrix add(const Matrix& a, const Matrix& b);

/// Row-wise softmax of scale * m, stabilized by subtracting each row maximum.
Matrix softmax_rows(const Matrix& m, double scale);

/// (x - mean) / sqrt(var + eps) * gamma + beta with the population variance.
std::vector<float> layer_norm(std::span<const float> x, std::span<const float> gamma,
                              std::span<const float> beta, double eps);

/// Applies layer_norm to every row of m.
Matrix layer_norm_rows(const Matrix& m, std::span<const float> gamma, std::span<const float> beta, double eps);

/// GELU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
float gelu(float x);

void gelu_inplace(Matrix& m);

}  // namespace qgvt
