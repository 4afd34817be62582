// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qgvt/encoder.hpp"
#include "qgvt/guidance.hpp"
#include "qgvt/viz.hpp"

namespace qgvt {

struct PipelineRequest {
    std::string question;
    /// Required for question guidance; ignored for image_cls.
    std::optional<TextEmbedding> text;
    CompressionSchedule schedule;
    CompressionOptions options;
    bool record_timings = false;
};

struct PipelineResult {
    EncodeResult encoded;
    RunStats stats;
    std::vector<MaskImage> masks;
};

/// Builds one query per stage from the shared vision-space projection of `text`.
std::vector<GuidanceVector> stage_queries(const TextEmbedding& text, const CompressionSchedule& schedule,
                                          const TensorArchive& weights, const EncoderConfig& config);

/// guidance -> patch embedding -> encode -> masks and run statistics.
PipelineResult run_pipeline(const RgbImage& image, const EncoderWeights& weights, const PipelineRequest& request);

}  // namespace qgvt
