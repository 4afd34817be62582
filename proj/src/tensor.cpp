// SPDX-License-Identifier: Apache-2.0

#include "qgvt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qgvt/error.hpp"

#if defined(__x86_64__)
#include <immintrin.h>
#endif

namespace qgvt {

Matrix::Matrix(std::size_t rows, std::size_t cols) : m_rows(rows), m_cols(cols), m_data(rows * cols, 0.0f) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : m_rows(rows), m_cols(cols), m_data(std::move(data)) {
    if (m_data.size() != rows * cols) {
        throw ShapeError("matrix data length " + std::to_string(m_data.size()) + " does not match shape " +
                         shape_string());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0f;
    }
    return m;
}

Matrix Matrix::row_vector(std::span<const float> values) {
    return Matrix(1, values.size(), std::vector<float>(values.begin(), values.end()));
}

bool Matrix::all_finite() const {
    return std::all_of(m_data.begin(), m_data.end(), [](float v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
    std::ostringstream os;
    os << m_rows << "x" << m_cols;
    return os.str();
}

namespace {

// Register tiles: every output element still sums its k terms in ascending
// order in double with one rounding at the end, so the tile shape only changes
// which elements are computed together. A float*float product is exact in
// double, which makes a fused multiply-add round identically to mul + add.
constexpr std::size_t kTileCols = 8;
constexpr std::size_t kPortableRows = 4;
constexpr std::size_t kSimdRows = 6;

bool g_simd_enabled = true;

// Packs columns [j0, j0 + kTileCols) of b as doubles laid out [k][kTileCols],
// zero-filling past the last column.
void pack_panel(const Matrix& b, std::size_t j0, std::vector<double>& panel) {
    const std::size_t cols = std::min(kTileCols, b.cols() - j0);
    for (std::size_t k = 0; k < b.rows(); ++k) {
        const float* brow = b.row(k).data() + j0;
        double* dst = panel.data() + k * kTileCols;
        for (std::size_t c = 0; c < kTileCols; ++c) {
            dst[c] = c < cols ? static_cast<double>(brow[c]) : 0.0;
        }
    }
}

template <std::size_t Rows>
void store_tile(const double (&acc)[Rows][kTileCols], std::size_t i0, std::size_t rows, std::size_t j0,
                std::size_t cols, Matrix& out) {
    for (std::size_t r = 0; r < rows; ++r) {
        float* orow = out.row(i0 + r).data() + j0;
        for (std::size_t c = 0; c < cols; ++c) {
            orow[c] = static_cast<float>(acc[r][c]);
        }
    }
}

// Short blocks repeat their last row; the duplicates are never stored.
template <std::size_t Rows>
void tile_rows(const Matrix& a, std::size_t i0, std::size_t rows, const float* (&arows)[Rows]) {
    for (std::size_t r = 0; r < Rows; ++r) {
        arows[r] = a.row(i0 + std::min(r, rows - 1)).data();
    }
}

void panel_portable(const Matrix& a, const double* panel, std::size_t j0, std::size_t cols, Matrix& out) {
    const std::size_t inner = a.cols();
    for (std::size_t i0 = 0; i0 < a.rows(); i0 += kPortableRows) {
        const std::size_t rows = std::min(kPortableRows, a.rows() - i0);
        const float* arows[kPortableRows];
        tile_rows(a, i0, rows, arows);
        double acc[kPortableRows][kTileCols] = {};
        for (std::size_t k = 0; k < inner; ++k) {
            const double* bk = panel + k * kTileCols;
            for (std::size_t r = 0; r < kPortableRows; ++r) {
                const double av = arows[r][k];
                for (std::size_t c = 0; c < kTileCols; ++c) {
                    acc[r][c] += av * bk[c];
                }
            }
        }
        store_tile(acc, i0, rows, j0, cols, out);
    }
}

#if defined(__x86_64__) && defined(__GNUC__)
#define QGVT_X86_SIMD 1

__attribute__((target("avx2,fma"))) void panel_avx2(const Matrix& a, const double* panel, std::size_t j0,
                                                    std::size_t cols, Matrix& out) {
    const std::size_t inner = a.cols();
    for (std::size_t i0 = 0; i0 < a.rows(); i0 += kSimdRows) {
        const std::size_t rows = std::min(kSimdRows, a.rows() - i0);
        const float* arows[kSimdRows];
        tile_rows(a, i0, rows, arows);
        __m256d lo[kSimdRows], hi[kSimdRows];
        for (std::size_t r = 0; r < kSimdRows; ++r) {
            lo[r] = _mm256_setzero_pd();
            hi[r] = _mm256_setzero_pd();
        }
        for (std::size_t k = 0; k < inner; ++k) {
            const __m256d b0 = _mm256_loadu_pd(panel + k * kTileCols);
            const __m256d b1 = _mm256_loadu_pd(panel + k * kTileCols + 4);
#pragma GCC unroll 6
            for (std::size_t r = 0; r < kSimdRows; ++r) {
                const __m256d av = _mm256_set1_pd(static_cast<double>(arows[r][k]));
                lo[r] = _mm256_fmadd_pd(av, b0, lo[r]);
                hi[r] = _mm256_fmadd_pd(av, b1, hi[r]);
            }
        }
        double acc[kSimdRows][kTileCols];
        for (std::size_t r = 0; r < kSimdRows; ++r) {
            _mm256_storeu_pd(acc[r], lo[r]);
            _mm256_storeu_pd(acc[r] + 4, hi[r]);
        }
        store_tile(acc, i0, rows, j0, cols, out);
    }
}

bool cpu_has_avx2_fma() {
    static const bool has = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return has;
}
#endif

}  // namespace

namespace detail {

bool matmul_simd_available() {
#ifdef QGVT_X86_SIMD
    return cpu_has_avx2_fma();
#else
    return false;
#endif
}

void set_matmul_simd(bool enabled) {
    g_simd_enabled = enabled;
}

}  // namespace detail

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul shape mismatch: " + a.shape_string() + " x " + b.shape_string());
    }
    Matrix out(a.rows(), b.cols());
    if (a.rows() == 0) {
        return out;
    }
    const bool simd = g_simd_enabled && detail::matmul_simd_available();
    std::vector<double> panel(a.cols() * kTileCols);
    for (std::size_t j0 = 0; j0 < b.cols(); j0 += kTileCols) {
        const std::size_t cols = std::min(kTileCols, b.cols() - j0);
        pack_panel(b, j0, panel);
#ifdef QGVT_X86_SIMD
        if (simd) {
            panel_avx2(a, panel.data(), j0, cols, out);
            continue;
        }
#endif
        panel_portable(a, panel.data(), j0, cols, out);
    }
    (void)simd;
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            t(c, r) = m(r, c);
        }
    }
    return t;
}

Matrix column_block(const Matrix& m, std::size_t first, std::size_t count) {
    if (first + count > m.cols()) {
        throw ShapeError("column block [" + std::to_string(first) + ", " + std::to_string(first + count) +
                         ") outside " + m.shape_string());
    }
    Matrix out(m.rows(), count);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::copy_n(m.row(r).begin() + static_cast<std::ptrdiff_t>(first), count, out.row(r).begin());
    }
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("add shape mismatch: " + a.shape_string() + " + " + b.shape_string());
    }
    Matrix out = a;
    auto dst = out.data();
    auto src = b.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += src[i];
    }
    return out;
}

Matrix softmax_rows(const Matrix& m, double scale) {
    Matrix out(m.rows(), m.cols());
    std::vector<double> e(m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto in = m.row(r);
        if (in.empty()) {
            continue;
        }
        double mx = scale * static_cast<double>(in[0]);
        for (float v : in) {
            mx = std::max(mx, scale * static_cast<double>(v));
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            e[c] = std::exp(scale * static_cast<double>(in[c]) - mx);
            sum += e[c];
        }
        auto dst = out.row(r);
        for (std::size_t c = 0; c < in.size(); ++c) {
            dst[c] = static_cast<float>(e[c] / sum);
        }
    }
    return out;
}

std::vector<float> layer_norm(std::span<const float> x, std::span<const float> gamma, std::span<const float> beta,
                              double eps) {
    if (gamma.size() != x.size() || beta.size() != x.size()) {
        throw ShapeError("layer_norm length mismatch: x=" + std::to_string(x.size()) +
                         " gamma=" + std::to_string(gamma.size()) + " beta=" + std::to_string(beta.size()));
    }
    if (!(eps > 0.0)) {
        throw ValidationError("layer_norm eps must be positive");
    }
    std::vector<float> out(x.size());
    if (x.empty()) {
        return out;
    }
    double mean = 0.0;
    for (float v : x) {
        mean += v;
    }
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (float v : x) {
        const double c = v - mean;
        var += c * c;
    }
    var /= static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = static_cast<float>((x[i] - mean) * inv * gamma[i] + beta[i]);
    }
    return out;
}

Matrix layer_norm_rows(const Matrix& m, std::span<const float> gamma, std::span<const float> beta, double eps) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto y = layer_norm(m.row(r), gamma, beta, eps);
        std::copy(y.begin(), y.end(), out.row(r).begin());
    }
    return out;
}

float gelu(float x) {
    const double xd = x;
    const double k = std::sqrt(2.0 / std::numbers::pi);
    return static_cast<float>(0.5 * xd * (1.0 + std::tanh(k * (xd + 0.044715 * xd * xd * xd))));
}

void gelu_inplace(Matrix& m) {
    for (float& v : m.data()) {
        v = gelu(v);
    }
}

}  // namespace qgvt
