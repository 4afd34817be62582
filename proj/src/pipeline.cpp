// SPDX-License-Identifier: Apache-2.0

#include "qgvt/pipeline.hpp"

#include <chrono>
#include <map>

#include "qgvt/error.hpp"

namespace qgvt {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

}  // namespace

std::vector<GuidanceVector> stage_queries(const TextEmbedding& text, const CompressionSchedule& schedule,
                                          const TensorArchive& weights, const EncoderConfig& config) {
    std::vector<GuidanceVector> queries;
    if (schedule.empty()) {
        return queries;
    }
    const auto v = project_to_vision(text, weights);
    for (const auto& s : schedule.stages()) {
        queries.push_back(make_query(v, s.layer, weights, config));
    }
    return queries;
}

PipelineResult run_pipeline(const RgbImage& image, const EncoderWeights& weights, const PipelineRequest& request) {
    const auto& cfg = weights.config();
    request.schedule.validate(cfg);
    const bool question = request.options.guidance == GuidanceSource::question;
    if (question && !request.text) {
        throw ValidationError("question guidance needs a text embedding");
    }
    if (image.width != cfg.image_size || image.height != cfg.image_size) {
        throw ValidationError("image must be exactly " + std::to_string(cfg.image_size) + "x" +
                              std::to_string(cfg.image_size) + ", got " + std::to_string(image.width) + "x" +
                              std::to_string(image.height));
    }
    std::map<std::string, double> timings;

    auto t = Clock::now();
    std::vector<GuidanceVector> queries;
    if (question) {
        queries = stage_queries(*request.text, request.schedule, weights.archive(), cfg);
    }
    timings["guidance"] = ms_since(t);

    t = Clock::now();
    const TokenMatrix z0 = patch_embed(image, weights);
    timings["patch_embed"] = ms_since(t);

    t = Clock::now();
    PipelineResult result;
    result.encoded = encode(z0, queries, request.schedule, EncodeOptions{request.options}, weights);
    timings["encode"] = ms_since(t);

    t = Clock::now();
    for (const auto& rec : result.encoded.records) {
        result.masks.push_back(render_mask(image, rec, cfg.patch_size));
    }
    timings["render"] = ms_since(t);

    RunStats& stats = result.stats;
    stats.question = request.question;
    stats.guidance = question ? "question" : "image-cls";
    stats.recycle = request.options.recycle;
    stats.schedule = request.schedule;
    stats.layer_token_counts = result.encoded.stats.layer_token_counts;
    for (std::size_t s = 0; s < result.encoded.records.size(); ++s) {
        stats.per_stage.push_back({result.encoded.records[s].layer, result.encoded.records[s].kept,
                                   summarize(result.encoded.correlations[s])});
    }
    stats.flops = encoder_ratio(request.schedule, cfg, question);
    if (request.record_timings) {
        stats.timings_ms = timings;
    }
    return result;
}

}  // namespace qgvt
