// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "qgvt/compressor.hpp"
#include "qgvt/image.hpp"
#include "qgvt/tokens.hpp"
#include "qgvt/weights_io.hpp"

namespace qgvt {

/// Views into one layer's tensors, shape-checked against the config.
struct LayerWeights {
    const Matrix* wq = nullptr;
    const Matrix* wk = nullptr;
    const Matrix* wv = nullptr;
    const Matrix* wo = nullptr;
    std::span<const float> ln1_gamma;
    std::span<const float> ln1_beta;
    std::span<const float> ln2_gamma;
    std::span<const float> ln2_beta;
    const Matrix* ffn_w1 = nullptr;
    const Matrix* ffn_w2 = nullptr;
};

/// Checked views over an archive. Construction validates every tensor the
/// encoder touches, so a bad archive fails before any compute. The archive
/// must outlive this object.
class EncoderWeights {
public:
    EncoderWeights(const TensorArchive& archive, const EncoderConfig& config);

    const EncoderConfig& config() const { return m_config; }
    const TensorArchive& archive() const { return *m_archive; }
    const LayerWeights& layer(std::size_t i) const;

    const Matrix& patch_weight() const { return *m_patch_weight; }
    const Matrix& patch_pos() const { return *m_patch_pos; }
    const Matrix& patch_cls() const { return *m_patch_cls; }

private:
    const TensorArchive* m_archive;
    EncoderConfig m_config;
    const Matrix* m_patch_weight;
    const Matrix* m_patch_pos;
    const Matrix* m_patch_cls;
    std::vector<LayerWeights> m_layers;
};

/// Splits the image into non-overlapping patches (pixel values / 255, each
/// patch flattened as (y, x, channel)), maps them through patch.weight,
/// prepends patch.cls and adds patch.pos. Origins follow raster order.
/// Throws ValidationError unless the image is exactly image_size square.
TokenMatrix patch_embed(const RgbImage& image, const EncoderWeights& weights);

struct AttentionOutput {
    AttentionProjections projections;
    AttentionTensor attention;
    /// Heads concatenated and mapped through attn.wo.
    Matrix output;
};

/// Multi-head self-attention over the (already normalized) rows of x.
AttentionOutput attention_forward(const Matrix& x, const LayerWeights& w, std::size_t heads);

struct LayerOutput {
    TokenMatrix tokens;
    AttentionTensor attention;
    AttentionProjections projections;
};

/// Pre-norm block: x += attn(LN1(x)); x += W2 gelu(W1 LN2(x)).
LayerOutput layer_forward(const TokenMatrix& z, std::size_t layer, const EncoderWeights& weights);

struct EncodeOptions {
    CompressionOptions compression;
};

struct EncodeStats {
    /// Patch tokens (CLS excluded) output by each layer.
    std::vector<std::size_t> layer_token_counts;
    std::vector<double> layer_ms;
    double total_ms = 0.0;
};

struct EncodeResult {
    TokenMatrix tokens;
    std::vector<RetentionRecord> records;
    std::vector<CorrelationVector> correlations;
    EncodeStats stats;
};

/// Runs every layer and, after each scheduled layer's output, the compression
/// stage for it. `guidance` holds one query per stage (same layers, same order)
/// and may be empty for image_cls guidance or an empty schedule.
/// Inconsistent schedule, guidance or input fail with ValidationError before any compute.
EncodeResult encode(const TokenMatrix& z0, std::span<const GuidanceVector> guidance,
                    const CompressionSchedule& schedule, const EncodeOptions& options, const EncoderWeights& weights);

}  // namespace qgvt
