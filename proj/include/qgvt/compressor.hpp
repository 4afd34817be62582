// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "qgvt/guidance.hpp"
#include "qgvt/tokens.hpp"
#include "qgvt/weights_io.hpp"

namespace qgvt {

/// Relevance of each patch token (CLS excluded) to the guidance query; sums to 1.
struct CorrelationVector {
    std::vector<float> scores;
    std::size_t layer = 0;
};

/// Outcome of one top-n / bottom-m split. Both lists ascend by origin.
struct RetentionRecord {
    std::size_t layer = 0;
    std::vector<Origin> kept;
    std::vector<Origin> dropped;

    std::size_t keep_count() const { return kept.size(); }
    std::size_t drop_count() const { return dropped.size(); }

    friend bool operator==(const RetentionRecord&, const RetentionRecord&) = default;
};

struct ScheduleStage {
    std::size_t layer = 0;
    std::size_t keep = 0;

    friend bool operator==(const ScheduleStage&, const ScheduleStage&) = default;
};

/// Ordered compression stages. An empty stage list means no compression.
class CompressionSchedule {
public:
    CompressionSchedule() = default;

    /// Checks ordering invariants: layers strictly increasing, keeps strictly
    /// decreasing, first keep < initial, last keep >= 1.
    CompressionSchedule(std::size_t initial, std::vector<ScheduleStage> stages);

    std::size_t initial() const { return m_initial; }
    std::size_t final_count() const { return m_stages.empty() ? m_initial : m_stages.back().keep; }
    const std::vector<ScheduleStage>& stages() const { return m_stages; }
    bool empty() const { return m_stages.empty(); }

    /// Patch tokens leaving each layer (after any compression attributed to it).
    std::vector<std::size_t> output_counts(std::size_t layers) const;
    /// Patch tokens entering each layer.
    std::vector<std::size_t> input_counts(std::size_t layers) const;

    /// Throws ValidationError if a stage layer is out of range or the initial
    /// count differs from the encoder's token count.
    void validate(const EncoderConfig& config) const;

    friend bool operator==(const CompressionSchedule&, const CompressionSchedule&) = default;

private:
    std::size_t m_initial = 0;
    std::vector<ScheduleStage> m_stages;
};

/// Uniform hierarchical schedule from n_initial down to m_final over `layers`.
/// The per-stage drop is (N - M) / |layers|; the first (N - M) % |layers|
/// stages each drop one extra token.
CompressionSchedule build_schedule(std::size_t n_initial, std::size_t m_final, std::span<const std::size_t> layers);

/// Question relevance over patch tokens: per-head logits query_h . K_h[1..N]^T
/// scaled by 1/sqrt(head_dim), averaged over heads, then one softmax.
CorrelationVector correlation(const GuidanceVector& query, const AttentionProjections& projections);

/// Keeps the `keep` highest-scoring origins; ties go to the lower origin.
RetentionRecord partition(const CorrelationVector& c, std::size_t keep, std::span<const Origin> origins);

/// Adds sum_{j in dropped} a_mean(i, j) * token_j to every retained row i
/// (CLS included) and removes the dropped rows. No renormalization.
/// Each element is accumulated in double, dropped origins ascending, and rounded once.
TokenMatrix recycle(const TokenMatrix& tokens, const Matrix& a_mean, const RetentionRecord& rec);

/// Drops the rows not listed in rec.kept without recycling.
TokenMatrix prune(const TokenMatrix& tokens, const RetentionRecord& rec);

enum class GuidanceSource { question, image_cls };

struct CompressionOptions {
    GuidanceSource guidance = GuidanceSource::question;
    bool recycle = true;
};

struct StageResult {
    TokenMatrix tokens;
    RetentionRecord record;
    CorrelationVector correlation;
};

/// One compression module invocation on a layer's output.
///  - question guidance scores with `query` (required, else ValidationError);
///  - image_cls guidance scores with the CLS row of the head-mean attention,
///    renormalized over patch columns.
StageResult compress_stage(const TokenMatrix& tokens, const AttentionTensor& attention,
                           const AttentionProjections& projections, const GuidanceVector* query, std::size_t keep,
                           const CompressionOptions& options);

}  // namespace qgvt
