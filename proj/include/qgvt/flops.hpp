// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "qgvt/compressor.hpp"
#include "qgvt/weights_io.hpp"

namespace qgvt {

using Flops = std::uint64_t;

struct LayerCost {
    std::size_t layer = 0;
    /// Patch tokens entering the layer (CLS excluded).
    std::size_t tokens = 0;
    Flops flops = 0;

    friend bool operator==(const LayerCost&, const LayerCost&) = default;
};

struct OverheadItem {
    std::string name;
    Flops flops = 0;

    friend bool operator==(const OverheadItem&, const OverheadItem&) = default;
};

struct FlopsReport {
    std::vector<LayerCost> per_layer;
    Flops encoder_total = 0;
    Flops baseline_total = 0;
    /// (encoder_total + guidance_overhead) / baseline_total.
    double ratio = 1.0;
    Flops guidance_overhead = 0;
    std::vector<OverheadItem> guidance_breakdown;

    friend bool operator==(const FlopsReport&, const FlopsReport&) = default;
};

struct LlmConfig {
    std::size_t layers = 32;
    std::size_t dim = 4096;
    std::size_t ffn_dim = 11008;
    std::size_t text_tokens = 60;
};

/// One transformer layer: 4 n d^2 + 2 n^2 d + 2 n d ffn, exact integer
/// arithmetic. Throws ValidationError on zero inputs or overflow.
Flops layer_flops(std::size_t n, std::size_t d, std::size_t ffn);

/// Encoder compute relative to the uncompressed encoder. Every layer is costed
/// at its input token count; compression happens at layer output. When
/// `guided`, the question-guidance work (MLP projection, per-stage query
/// projection and correlation logits) is added and itemized.
FlopsReport encoder_ratio(const CompressionSchedule& schedule, const EncoderConfig& config, bool guided);

/// Encoder (with guidance overhead) + projector (2 v d d_llm) + LLM prefill over
/// visual_tokens + text_tokens. Prefill only; no decode steps.
Flops pipeline_estimate(std::size_t visual_tokens, const FlopsReport& encoder_report, std::size_t encoder_dim,
                        const LlmConfig& llm);

nlohmann::json to_json(const FlopsReport& report);

}  // namespace qgvt
