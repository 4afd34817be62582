// SPDX-License-Identifier: Apache-2.0

#include "qgvt/viz.hpp"

#include <algorithm>
#include <fstream>

#include "qgvt/error.hpp"

namespace qgvt {

CorrelationSummary summarize(const CorrelationVector& c) {
    if (c.scores.empty()) {
        return {};
    }
    const auto [lo, hi] = std::minmax_element(c.scores.begin(), c.scores.end());
    double sum = 0.0;
    for (float v : c.scores) {
        sum += v;
    }
    return {*lo, *hi, sum / static_cast<double>(c.scores.size())};
}

MaskImage render_mask(const RgbImage& image, const RetentionRecord& rec, std::size_t patch_size) {
    if (patch_size == 0 || image.width != image.height || image.width % patch_size != 0 ||
        image.pixels.size() != image.width * image.height * 3) {
        throw ValidationError("mask rendering needs a square image tiled by " + std::to_string(patch_size) +
                              "-pixel patches");
    }
    const std::size_t grid = image.width / patch_size;
    const auto total = static_cast<Origin>(grid * grid);
    std::vector<bool> keep(grid * grid, false);
    for (const auto* list : {&rec.kept, &rec.dropped}) {
        for (Origin o : *list) {
            if (o < 0 || o >= total) {
                throw ValidationError("origin " + std::to_string(o) + " outside the " + std::to_string(grid) + "x" +
                                      std::to_string(grid) + " patch grid");
            }
        }
    }
    for (Origin o : rec.kept) {
        keep[static_cast<std::size_t>(o)] = true;
    }

    MaskImage mask{image, rec.layer, rec.kept.size()};
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x) {
            if (keep[(y / patch_size) * grid + x / patch_size]) {
                continue;
            }
            for (std::size_t c = 0; c < 3; ++c) {
                auto& px = mask.image.at(x, y, c);
                px = static_cast<std::uint8_t>(px / 4);
            }
        }
    }
    return mask;
}

nlohmann::json to_json(const RunStats& stats) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : stats.schedule.stages()) {
        stages.push_back({{"layer", s.layer}, {"keep", s.keep}});
    }
    nlohmann::json per_stage = nlohmann::json::array();
    for (const auto& s : stats.per_stage) {
        per_stage.push_back({
            {"layer", s.layer},
            {"kept_count", s.kept.size()},
            {"kept", s.kept},
            {"correlation", {{"min", s.correlation.min}, {"max", s.correlation.max}, {"mean", s.correlation.mean}}},
        });
    }
    nlohmann::json doc = {
        {"version", 1},
        {"question", stats.question},
        {"guidance", stats.guidance},
        {"recycle", stats.recycle},
        {"schedule",
         {{"initial", stats.schedule.initial()}, {"final", stats.schedule.final_count()}, {"stages", stages}}},
        {"layer_token_counts", stats.layer_token_counts},
        {"final_token_count",
         stats.layer_token_counts.empty() ? stats.schedule.final_count() : stats.layer_token_counts.back()},
        {"per_stage", per_stage},
        {"flops", to_json(stats.flops)},
    };
    if (stats.timings_ms) {
        doc["timings_ms"] = *stats.timings_ms;
    }
    return doc;
}

void write_outputs(const RunStats& stats, const std::vector<MaskImage>& masks, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw IoError("cannot create output directory '" + out_dir.string() + "'");
    }
    for (const auto& m : masks) {
        write_ppm(m.image, out_dir / ("stage_" + std::to_string(m.stage_layer) + ".ppm"));
    }
    const auto path = out_dir / "stats.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << to_json(stats).dump(2) << '\n';
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

}  // namespace qgvt
