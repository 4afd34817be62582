// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qgvt/tensor.hpp"

namespace qgvt {

/// Original raster index of a patch token; the CLS row carries kClsOrigin.
using Origin = std::int32_t;
inline constexpr Origin kClsOrigin = -1;

/// Encoder activations: CLS at row 0, then one row per surviving patch.
struct TokenMatrix {
    Matrix tokens;
    std::vector<Origin> origin;
    /// Producing encoder layer; empty for the patch-embedding output.
    std::optional<std::size_t> layer;

    std::size_t patch_count() const { return tokens.rows() == 0 ? 0 : tokens.rows() - 1; }
    std::vector<Origin> patch_origins() const { return {origin.begin() + (origin.empty() ? 0 : 1), origin.end()}; }

    friend bool operator==(const TokenMatrix&, const TokenMatrix&) = default;
};

/// Per-head Q, K, V, each (rows x head_dim).
struct AttentionProjections {
    std::vector<Matrix> q;
    std::vector<Matrix> k;
    std::vector<Matrix> v;
};

/// Row-stochastic attention scores per head plus their arithmetic mean.
struct AttentionTensor {
    std::vector<Matrix> per_head;
    Matrix head_mean;
};

}  // namespace qgvt
