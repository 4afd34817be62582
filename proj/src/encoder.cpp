// SPDX-License-Identifier: Apache-2.0

#include "qgvt/encoder.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "qgvt/error.hpp"

namespace qgvt {

namespace {

std::span<const float> vector_param(const TensorArchive& a, const std::string& name, std::size_t d) {
    return a.get(name, 1, d).row(0);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

EncoderWeights::EncoderWeights(const TensorArchive& archive, const EncoderConfig& config)
    : m_archive(&archive), m_config(config) {
    m_config.validate();
    const std::size_t d = m_config.dim;
    m_patch_weight = &archive.get("patch.weight", m_config.patch_dim(), d);
    m_patch_pos = &archive.get("patch.pos", m_config.token_count() + 1, d);
    m_patch_cls = &archive.get("patch.cls", 1, d);
    m_layers.reserve(m_config.layers);
    for (std::size_t i = 0; i < m_config.layers; ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        LayerWeights w;
        w.wq = &archive.get(p + "attn.wq", d, d);
        w.wk = &archive.get(p + "attn.wk", d, d);
        w.wv = &archive.get(p + "attn.wv", d, d);
        w.wo = &archive.get(p + "attn.wo", d, d);
        w.ln1_gamma = vector_param(archive, p + "ln1.gamma", d);
        w.ln1_beta = vector_param(archive, p + "ln1.beta", d);
        w.ln2_gamma = vector_param(archive, p + "ln2.gamma", d);
        w.ln2_beta = vector_param(archive, p + "ln2.beta", d);
        w.ffn_w1 = &archive.get(p + "ffn.w1", d, m_config.ffn_dim);
        w.ffn_w2 = &archive.get(p + "ffn.w2", m_config.ffn_dim, d);
        m_layers.push_back(w);
    }
}

const LayerWeights& EncoderWeights::layer(std::size_t i) const {
    if (i >= m_layers.size()) {
        throw ValidationError("layer " + std::to_string(i) + " outside encoder of " + std::to_string(m_layers.size()) +
                              " layers");
    }
    return m_layers[i];
}

TokenMatrix patch_embed(const RgbImage& image, const EncoderWeights& weights) {
    const auto& cfg = weights.config();
    if (image.width != cfg.image_size || image.height != cfg.image_size) {
        throw ValidationError("image must be exactly " + std::to_string(cfg.image_size) + "x" +
                              std::to_string(cfg.image_size) + ", got " + std::to_string(image.width) + "x" +
                              std::to_string(image.height));
    }
    const std::size_t grid = cfg.grid();
    const std::size_t p = cfg.patch_size;
    Matrix patches(cfg.token_count(), cfg.patch_dim());
    for (std::size_t idx = 0; idx < cfg.token_count(); ++idx) {
        const std::size_t py = idx / grid;
        const std::size_t px = idx % grid;
        auto row = patches.row(idx);
        std::size_t k = 0;
        for (std::size_t y = 0; y < p; ++y) {
            for (std::size_t x = 0; x < p; ++x) {
                for (std::size_t c = 0; c < 3; ++c) {
                    row[k++] = static_cast<float>(image.at(px * p + x, py * p + y, c)) / 255.0f;
                }
            }
        }
    }
    const Matrix embedded = matmul(patches, weights.patch_weight());

    TokenMatrix z;
    z.tokens = Matrix(cfg.token_count() + 1, cfg.dim);
    z.origin.reserve(cfg.token_count() + 1);
    z.origin.push_back(kClsOrigin);
    const Matrix& pos = weights.patch_pos();
    for (std::size_t c = 0; c < cfg.dim; ++c) {
        z.tokens(0, c) = weights.patch_cls()(0, c) + pos(0, c);
    }
    for (std::size_t idx = 0; idx < cfg.token_count(); ++idx) {
        for (std::size_t c = 0; c < cfg.dim; ++c) {
            z.tokens(idx + 1, c) = embedded(idx, c) + pos(idx + 1, c);
        }
        z.origin.push_back(static_cast<Origin>(idx));
    }
    return z;
}

AttentionOutput attention_forward(const Matrix& x, const LayerWeights& w, std::size_t heads) {
    const std::size_t d = w.wq->rows();
    if (x.cols() != d) {
        throw ShapeError("attention input " + x.shape_string() + " does not match width " + std::to_string(d));
    }
    if (heads == 0 || d % heads != 0) {
        throw ShapeError("width " + std::to_string(d) + " cannot be split into " + std::to_string(heads) + " heads");
    }
    const std::size_t head_dim = d / heads;
    const std::size_t n = x.rows();
    const Matrix q = matmul(x, *w.wq);
    const Matrix k = matmul(x, *w.wk);
    const Matrix v = matmul(x, *w.wv);
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

    AttentionOutput out;
    Matrix concat(n, d);
    std::vector<double> mean(n * n, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
        Matrix qh = column_block(q, h * head_dim, head_dim);
        Matrix kh = column_block(k, h * head_dim, head_dim);
        Matrix vh = column_block(v, h * head_dim, head_dim);
        Matrix a = softmax_rows(matmul(qh, transpose(kh)), scale);
        const Matrix zh = matmul(a, vh);
        for (std::size_t r = 0; r < n; ++r) {
            std::copy(zh.row(r).begin(), zh.row(r).end(),
                      concat.row(r).begin() + static_cast<std::ptrdiff_t>(h * head_dim));
        }
        auto av = a.data();
        for (std::size_t i = 0; i < av.size(); ++i) {
            mean[i] += av[i];
        }
        out.projections.q.push_back(std::move(qh));
        out.projections.k.push_back(std::move(kh));
        out.projections.v.push_back(std::move(vh));
        out.attention.per_head.push_back(std::move(a));
    }
    out.attention.head_mean = Matrix(n, n);
    auto hm = out.attention.head_mean.data();
    for (std::size_t i = 0; i < hm.size(); ++i) {
        hm[i] = static_cast<float>(mean[i] / static_cast<double>(heads));
    }
    out.output = matmul(concat, *w.wo);
    return out;
}

LayerOutput layer_forward(const TokenMatrix& z, std::size_t layer, const EncoderWeights& weights) {
    const auto& w = weights.layer(layer);
    const double eps = weights.config().eps;
    if (z.tokens.cols() != weights.config().dim) {
        throw ShapeError("layer input " + z.tokens.shape_string() + " does not match encoder width " +
                         std::to_string(weights.config().dim));
    }
    AttentionOutput attn = attention_forward(layer_norm_rows(z.tokens, w.ln1_gamma, w.ln1_beta, eps), w,
                                             weights.config().heads);
    Matrix x = add(z.tokens, attn.output);
    Matrix hidden = matmul(layer_norm_rows(x, w.ln2_gamma, w.ln2_beta, eps), *w.ffn_w1);
    gelu_inplace(hidden);
    x = add(x, matmul(hidden, *w.ffn_w2));

    LayerOutput out;
    out.tokens.tokens = std::move(x);
    out.tokens.origin = z.origin;
    out.tokens.layer = layer;
    out.attention = std::move(attn.attention);
    out.projections = std::move(attn.projections);
    return out;
}

EncodeResult encode(const TokenMatrix& z0, std::span<const GuidanceVector> guidance,
                    const CompressionSchedule& schedule, const EncodeOptions& options, const EncoderWeights& weights) {
    const auto& cfg = weights.config();
    schedule.validate(cfg);
    if (z0.tokens.rows() != cfg.token_count() + 1 || z0.tokens.cols() != cfg.dim ||
        z0.origin.size() != z0.tokens.rows()) {
        throw ValidationError("encoder input " + z0.tokens.shape_string() + " does not match config (" +
                              std::to_string(cfg.token_count() + 1) + "x" + std::to_string(cfg.dim) + ")");
    }
    const bool question = options.compression.guidance == GuidanceSource::question;
    if (question && !schedule.empty()) {
        if (guidance.size() != schedule.stages().size()) {
            throw ValidationError("question guidance needs one query per stage: " + std::to_string(guidance.size()) +
                                  " queries for " + std::to_string(schedule.stages().size()) + " stages");
        }
        for (std::size_t s = 0; s < guidance.size(); ++s) {
            if (guidance[s].layer != schedule.stages()[s].layer) {
                throw ValidationError("guidance query " + std::to_string(s) + " targets layer " +
                                      std::to_string(guidance[s].layer) + ", stage runs at layer " +
                                      std::to_string(schedule.stages()[s].layer));
            }
            if (guidance[s].values.size() != cfg.dim) {
                throw ValidationError("guidance query " + std::to_string(s) + " has width " +
                                      std::to_string(guidance[s].values.size()));
            }
        }
    }

    const auto start = std::chrono::steady_clock::now();
    EncodeResult result;
    TokenMatrix z = z0;
    auto stage = schedule.stages().begin();
    std::size_t stage_index = 0;
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        const auto layer_start = std::chrono::steady_clock::now();
        LayerOutput out = layer_forward(z, i, weights);
        if (stage != schedule.stages().end() && stage->layer == i) {
            const GuidanceVector* query = question ? &guidance[stage_index] : nullptr;
            StageResult sr = compress_stage(out.tokens, out.attention, out.projections, query, stage->keep,
                                            options.compression);
            z = std::move(sr.tokens);
            result.records.push_back(std::move(sr.record));
            result.correlations.push_back(std::move(sr.correlation));
            ++stage;
            ++stage_index;
        } else {
            z = std::move(out.tokens);
        }
        if (!z.tokens.all_finite()) {
            throw ValidationError("non-finite activations after layer " + std::to_string(i));
        }
        result.stats.layer_token_counts.push_back(z.patch_count());
        result.stats.layer_ms.push_back(elapsed_ms(layer_start));
    }
    result.stats.total_ms = elapsed_ms(start);
    result.tokens = std::move(z);
    return result;
}

}  // namespace qgvt
