// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qgvt/compressor.hpp"
#include "qgvt/flops.hpp"
#include "qgvt/image.hpp"

namespace qgvt {

struct MaskImage {
    RgbImage image;
    std::size_t stage_layer = 0;
    std::size_t kept_count = 0;
};

struct CorrelationSummary {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

CorrelationSummary summarize(const CorrelationVector& c);

struct StageStats {
    std::size_t layer = 0;
    std::vector<Origin> kept;
    CorrelationSummary correlation;
};

struct RunStats {
    std::string question;
    std::string guidance;
    bool recycle = true;
    CompressionSchedule schedule;
    std::vector<std::size_t> layer_token_counts;
    std::vector<StageStats> per_stage;
    FlopsReport flops;
    /// Wall-clock milliseconds per phase. Written only when present, since
    /// timings make otherwise identical runs differ.
    std::optional<std::map<std::string, double>> timings_ms;
};

/// Darkens (channel * 0.25, rounded down) every patch whose origin is not in
/// rec.kept; kept patches are copied untouched. Patch p covers the
/// patch_size block at grid row p / grid, column p % grid.
/// Throws ValidationError for origins outside the grid or a mismatched image.
MaskImage render_mask(const RgbImage& image, const RetentionRecord& rec, std::size_t patch_size);

nlohmann::json to_json(const RunStats& stats);

/// Writes stage_{layer}.ppm per mask and stats.json into out_dir (created if
/// missing). Throws IoError when the directory or a file cannot be written.
void write_outputs(const RunStats& stats, const std::vector<MaskImage>& masks, const std::filesystem::path& out_dir);

}  // namespace qgvt
