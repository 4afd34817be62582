// SPDX-License-Identifier: Apache-2.0

#include "qgvt/compressor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "qgvt/error.hpp"

namespace qgvt {

CompressionSchedule::CompressionSchedule(std::size_t initial, std::vector<ScheduleStage> stages)
    : m_initial(initial), m_stages(std::move(stages)) {
    if (m_initial == 0) {
        throw ValidationError("schedule needs at least one initial token");
    }
    std::size_t prev_keep = m_initial;
    for (std::size_t i = 0; i < m_stages.size(); ++i) {
        const auto& s = m_stages[i];
        if (i > 0 && s.layer <= m_stages[i - 1].layer) {
            throw ValidationError("schedule layers must be strictly increasing (layer " + std::to_string(s.layer) +
                                  " after " + std::to_string(m_stages[i - 1].layer) + ")");
        }
        if (s.keep == 0) {
            throw ValidationError("schedule keep counts must be at least 1");
        }
        if (s.keep >= prev_keep) {
            throw ValidationError("schedule keep counts must strictly decrease (keep " + std::to_string(s.keep) +
                                  " at layer " + std::to_string(s.layer) + " from " + std::to_string(prev_keep) +
                                  ")");
        }
        prev_keep = s.keep;
    }
}

std::vector<std::size_t> CompressionSchedule::output_counts(std::size_t layers) const {
    std::vector<std::size_t> out(layers);
    std::size_t current = m_initial;
    auto stage = m_stages.begin();
    for (std::size_t i = 0; i < layers; ++i) {
        if (stage != m_stages.end() && stage->layer == i) {
            current = stage->keep;
            ++stage;
        }
        out[i] = current;
    }
    return out;
}

std::vector<std::size_t> CompressionSchedule::input_counts(std::size_t layers) const {
    auto out = output_counts(layers);
    if (!out.empty()) {
        out.insert(out.begin(), m_initial);
        out.pop_back();
    }
    return out;
}

void CompressionSchedule::validate(const EncoderConfig& config) const {
    if (m_initial != config.token_count()) {
        throw ValidationError("schedule starts from " + std::to_string(m_initial) + " tokens but the encoder has " +
                              std::to_string(config.token_count()));
    }
    for (const auto& s : m_stages) {
        if (s.layer >= config.layers) {
            throw ValidationError("schedule layer " + std::to_string(s.layer) + " outside encoder of " +
                                  std::to_string(config.layers) + " layers");
        }
    }
}

CompressionSchedule build_schedule(std::size_t n_initial, std::size_t m_final, std::span<const std::size_t> layers) {
    if (m_final < 1 || m_final >= n_initial) {
        throw ValidationError("target count " + std::to_string(m_final) + " must satisfy 1 <= M < N = " +
                              std::to_string(n_initial));
    }
    if (layers.empty()) {
        throw ValidationError("schedule needs at least one compression layer");
    }
    const std::size_t total = n_initial - m_final;
    const std::size_t step = total / layers.size();
    const std::size_t remainder = total % layers.size();
    if (step == 0) {
        throw ValidationError("cannot drop " + std::to_string(total) + " tokens over " +
                              std::to_string(layers.size()) + " stages with strictly decreasing counts");
    }
    std::vector<ScheduleStage> stages;
    std::size_t current = n_initial;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        current -= step + (i < remainder ? 1 : 0);
        stages.push_back({layers[i], current});
    }
    return CompressionSchedule(n_initial, std::move(stages));
}

CorrelationVector correlation(const GuidanceVector& query, const AttentionProjections& projections) {
    const auto& keys = projections.k;
    if (keys.empty()) {
        throw ShapeError("correlation needs at least one key head");
    }
    const std::size_t head_dim = keys.front().cols();
    const std::size_t rows = keys.front().rows();
    if (query.values.size() != keys.size() * head_dim) {
        throw ShapeError("query width " + std::to_string(query.values.size()) + " does not match " +
                         std::to_string(keys.size()) + " heads of width " + std::to_string(head_dim));
    }
    if (rows < 2) {
        throw ShapeError("correlation needs at least one patch token besides CLS");
    }
    const std::size_t n = rows - 1;
    std::vector<double> logits(n, 0.0);
    for (std::size_t h = 0; h < keys.size(); ++h) {
        const Matrix& k = keys[h];
        if (k.rows() != rows || k.cols() != head_dim) {
            throw ShapeError("key head " + std::to_string(h) + " has shape " + k.shape_string());
        }
        const float* q = query.values.data() + h * head_dim;
        for (std::size_t j = 0; j < n; ++j) {
            auto key = k.row(j + 1);
            double dot = 0.0;
            for (std::size_t c = 0; c < head_dim; ++c) {
                dot += static_cast<double>(q[c]) * key[c];
            }
            logits[j] += dot;
        }
    }
    Matrix mean_logits(1, n);
    for (std::size_t j = 0; j < n; ++j) {
        mean_logits(0, j) = static_cast<float>(logits[j] / static_cast<double>(keys.size()));
    }
    const Matrix c = softmax_rows(mean_logits, 1.0 / std::sqrt(static_cast<double>(head_dim)));
    return {{c.data().begin(), c.data().end()}, query.layer};
}

RetentionRecord partition(const CorrelationVector& c, std::size_t keep, std::span<const Origin> origins) {
    const std::size_t n = c.scores.size();
    if (origins.size() != n) {
        throw ValidationError("partition got " + std::to_string(n) + " scores for " + std::to_string(origins.size()) +
                              " origins");
    }
    if (keep < 1 || keep > n) {
        throw ValidationError("keep count " + std::to_string(keep) + " outside [1, " + std::to_string(n) + "]");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (c.scores[a] != c.scores[b]) {
            return c.scores[a] > c.scores[b];
        }
        return origins[a] < origins[b];
    });
    RetentionRecord rec;
    rec.layer = c.layer;
    for (std::size_t r = 0; r < n; ++r) {
        (r < keep ? rec.kept : rec.dropped).push_back(origins[order[r]]);
    }
    std::sort(rec.kept.begin(), rec.kept.end());
    std::sort(rec.dropped.begin(), rec.dropped.end());
    return rec;
}

namespace {

// Row index of every origin; validates that rec splits the patch rows exactly.
std::unordered_map<Origin, std::size_t> checked_rows(const TokenMatrix& tokens, const RetentionRecord& rec) {
    if (tokens.origin.size() != tokens.tokens.rows() || tokens.origin.empty() || tokens.origin[0] != kClsOrigin) {
        throw ValidationError("token matrix origins are inconsistent with its rows");
    }
    std::unordered_map<Origin, std::size_t> row_of;
    for (std::size_t r = 1; r < tokens.origin.size(); ++r) {
        if (!row_of.emplace(tokens.origin[r], r).second) {
            throw ValidationError("duplicate origin " + std::to_string(tokens.origin[r]) + " in token matrix");
        }
    }
    if (rec.kept.size() + rec.dropped.size() != row_of.size()) {
        throw ValidationError("retention record covers " + std::to_string(rec.kept.size() + rec.dropped.size()) +
                              " origins, token matrix has " + std::to_string(row_of.size()));
    }
    std::unordered_map<Origin, bool> seen;
    for (const auto* list : {&rec.kept, &rec.dropped}) {
        for (Origin o : *list) {
            if (!row_of.contains(o)) {
                throw ValidationError("retention record origin " + std::to_string(o) + " not in token matrix");
            }
            if (!seen.emplace(o, true).second) {
                throw ValidationError("origin " + std::to_string(o) + " listed twice in retention record");
            }
        }
    }
    if (!std::is_sorted(rec.kept.begin(), rec.kept.end()) || !std::is_sorted(rec.dropped.begin(), rec.dropped.end())) {
        throw ValidationError("retention record lists must ascend by origin");
    }
    return row_of;
}

std::vector<std::size_t> retained_rows(const std::unordered_map<Origin, std::size_t>& row_of,
                                       const RetentionRecord& rec) {
    std::vector<std::size_t> rows{0};
    for (Origin o : rec.kept) {
        rows.push_back(row_of.at(o));
    }
    return rows;
}

TokenMatrix gather(const TokenMatrix& tokens, const std::vector<std::size_t>& rows) {
    TokenMatrix out;
    out.tokens = Matrix(rows.size(), tokens.tokens.cols());
    out.origin.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = tokens.tokens.row(rows[i]);
        std::copy(src.begin(), src.end(), out.tokens.row(i).begin());
        out.origin.push_back(tokens.origin[rows[i]]);
    }
    out.layer = tokens.layer;
    return out;
}

}  // namespace

TokenMatrix prune(const TokenMatrix& tokens, const RetentionRecord& rec) {
    const auto row_of = checked_rows(tokens, rec);
    return gather(tokens, retained_rows(row_of, rec));
}

TokenMatrix recycle(const TokenMatrix& tokens, const Matrix& a_mean, const RetentionRecord& rec) {
    const auto row_of = checked_rows(tokens, rec);
    const std::size_t n = tokens.tokens.rows();
    if (a_mean.rows() != n || a_mean.cols() != n) {
        throw ValidationError("attention " + a_mean.shape_string() + " does not index " + std::to_string(n) +
                              " tokens");
    }
    const auto rows = retained_rows(row_of, rec);
    TokenMatrix out = gather(tokens, rows);
    std::vector<std::size_t> dropped_rows;
    dropped_rows.reserve(rec.dropped.size());
    for (Origin o : rec.dropped) {
        dropped_rows.push_back(row_of.at(o));
    }
    if (dropped_rows.empty()) {
        return out;
    }
    const std::size_t d = tokens.tokens.cols();
    std::vector<double> acc(d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto self = tokens.tokens.row(rows[i]);
        std::copy(self.begin(), self.end(), acc.begin());
        for (std::size_t j : dropped_rows) {
            const double w = a_mean(rows[i], j);
            auto other = tokens.tokens.row(j);
            for (std::size_t c = 0; c < d; ++c) {
                acc[c] += w * other[c];
            }
        }
        auto dst = out.tokens.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            dst[c] = static_cast<float>(acc[c]);
        }
    }
    return out;
}

StageResult compress_stage(const TokenMatrix& tokens, const AttentionTensor& attention,
                           const AttentionProjections& projections, const GuidanceVector* query, std::size_t keep,
                           const CompressionOptions& options) {
    const std::size_t layer = tokens.layer.value_or(0);
    CorrelationVector scores;
    if (options.guidance == GuidanceSource::question) {
        if (query == nullptr) {
            throw ValidationError("question-guided compression needs a guidance query");
        }
        scores = correlation(*query, projections);
    } else {
        const Matrix& a = attention.head_mean;
        if (a.rows() != tokens.tokens.rows() || a.cols() != tokens.tokens.rows()) {
            throw ValidationError("attention " + a.shape_string() + " does not match " +
                                  std::to_string(tokens.tokens.rows()) + " tokens");
        }
        double sum = 0.0;
        for (std::size_t j = 1; j < a.cols(); ++j) {
            sum += a(0, j);
        }
        scores.scores.resize(a.cols() - 1);
        for (std::size_t j = 1; j < a.cols(); ++j) {
            scores.scores[j - 1] = sum > 0.0 ? static_cast<float>(a(0, j) / sum)
                                             : static_cast<float>(1.0 / static_cast<double>(a.cols() - 1));
        }
    }
    scores.layer = layer;
    if (scores.scores.size() != tokens.patch_count()) {
        throw ValidationError("stage scores cover " + std::to_string(scores.scores.size()) + " tokens, layer output has " +
                              std::to_string(tokens.patch_count()));
    }

    const auto origins = tokens.patch_origins();
    RetentionRecord rec = partition(scores, keep, origins);
    rec.layer = layer;
    TokenMatrix out = options.recycle ? recycle(tokens, attention.head_mean, rec) : prune(tokens, rec);
    out.layer = layer;
    return {std::move(out), std::move(rec), std::move(scores)};
}

}  // namespace qgvt
