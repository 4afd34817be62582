// SPDX-License-Identifier: Apache-2.0

#include "qgvt/flops.hpp"

#include <string>

#include "qgvt/error.hpp"

namespace qgvt {

namespace {

Flops checked_mul(Flops a, Flops b) {
    Flops r = 0;
    if (__builtin_mul_overflow(a, b, &r)) {
        throw ValidationError("FLOP count overflows 64 bits");
    }
    return r;
}

Flops checked_add(Flops a, Flops b) {
    Flops r = 0;
    if (__builtin_add_overflow(a, b, &r)) {
        throw ValidationError("FLOP count overflows 64 bits");
    }
    return r;
}

Flops product(std::initializer_list<Flops> factors) {
    Flops r = 1;
    for (Flops f : factors) {
        r = checked_mul(r, f);
    }
    return r;
}

}  // namespace

Flops layer_flops(std::size_t n, std::size_t d, std::size_t ffn) {
    if (n == 0 || d == 0 || ffn == 0) {
        throw ValidationError("layer_flops needs positive n, d and ffn (got " + std::to_string(n) + ", " +
                              std::to_string(d) + ", " + std::to_string(ffn) + ")");
    }
    const Flops projections = product({4, n, d, d});
    const Flops attention = product({2, n, n, d});
    const Flops ffn_cost = product({2, n, d, ffn});
    return checked_add(checked_add(projections, attention), ffn_cost);
}

FlopsReport encoder_ratio(const CompressionSchedule& schedule, const EncoderConfig& config, bool guided) {
    config.validate();
    schedule.validate(config);
    FlopsReport report;
    const auto inputs = schedule.input_counts(config.layers);
    for (std::size_t i = 0; i < config.layers; ++i) {
        const Flops f = layer_flops(inputs[i], config.dim, config.ffn_dim);
        report.per_layer.push_back({i, inputs[i], f});
        report.encoder_total = checked_add(report.encoder_total, f);
    }
    report.baseline_total =
        checked_mul(config.layers, layer_flops(config.token_count(), config.dim, config.ffn_dim));

    if (guided && !schedule.empty()) {
        const std::size_t d = config.dim;
        report.guidance_breakdown.push_back(
            {"mlp_projection", checked_add(product({2, config.text_dim, d}), product({2, d, d}))});
        for (const auto& s : schedule.stages()) {
            const std::string at = "@layer" + std::to_string(s.layer);
            report.guidance_breakdown.push_back({"query_projection" + at, product({2, d, d})});
            report.guidance_breakdown.push_back({"correlation_logits" + at, product({2, inputs[s.layer], d})});
        }
        for (const auto& item : report.guidance_breakdown) {
            report.guidance_overhead = checked_add(report.guidance_overhead, item.flops);
        }
    }
    report.ratio = static_cast<double>(checked_add(report.encoder_total, report.guidance_overhead)) /
                   static_cast<double>(report.baseline_total);
    return report;
}

Flops pipeline_estimate(std::size_t visual_tokens, const FlopsReport& encoder_report, std::size_t encoder_dim,
                        const LlmConfig& llm) {
    if (llm.layers == 0 || llm.dim == 0 || llm.ffn_dim == 0 || encoder_dim == 0) {
        throw ValidationError("LLM config and encoder width must be positive");
    }
    Flops total = checked_add(encoder_report.encoder_total, encoder_report.guidance_overhead);
    total = checked_add(total, product({2, visual_tokens, encoder_dim, llm.dim}));
    const std::size_t sequence = visual_tokens + llm.text_tokens;
    if (sequence > 0) {
        total = checked_add(total, checked_mul(llm.layers, layer_flops(sequence, llm.dim, llm.ffn_dim)));
    }
    return total;
}

nlohmann::json to_json(const FlopsReport& report) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : report.per_layer) {
        layers.push_back({{"layer", l.layer}, {"tokens", l.tokens}, {"flops", l.flops}});
    }
    nlohmann::json breakdown = nlohmann::json::array();
    for (const auto& item : report.guidance_breakdown) {
        breakdown.push_back({{"name", item.name}, {"flops", item.flops}});
    }
    return {
        {"per_layer", std::move(layers)},
        {"encoder_total", report.encoder_total},
        {"baseline_total", report.baseline_total},
        {"ratio", report.ratio},
        {"guidance_overhead", report.guidance_overhead},
        {"guidance_breakdown", std::move(breakdown)},
    };
}

}  // namespace qgvt
