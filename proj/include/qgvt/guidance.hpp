// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "qgvt/weights_io.hpp"

namespace qgvt {

/// Unit-norm text-CLS embedding of the user's question.
struct TextEmbedding {
    enum class Source { toy, imported };

    std::vector<float> values;
    Source source = Source::toy;
};

/// Question query in one encoder layer's query space.
struct GuidanceVector {
    std::vector<float> values;
    std::size_t layer = 0;
};

std::uint64_t fnv1a64(std::string_view bytes);

/// Deterministic stand-in for a text encoder. The question is lowercased (ASCII)
/// and split on whitespace; every token seeds splitmix64 with
/// fnv1a64(token) ^ seed and draws a d_text vector in [-1, 1). Token vectors are
/// averaged and L2-normalized. Throws ValidationError for a blank question.
TextEmbedding toy_text_embed(std::string_view question, std::size_t d_text, std::uint64_t seed);

/// Reads tensor "text.cls" (1 x d_text) from a QGVT archive and normalizes it.
TextEmbedding load_text_embedding(const std::filesystem::path& path);
TextEmbedding text_embedding_from_archive(const TensorArchive& archive);

/// Aligns the text embedding with the vision feature space:
/// v = gelu(t * guide.mlp.w1) * guide.mlp.w2.
std::vector<float> project_to_vision(const TextEmbedding& t, const TensorArchive& weights);

/// query = v * layers.{layer}.attn.wq.
GuidanceVector make_query(std::span<const float> v, std::size_t layer, const TensorArchive& weights,
                          const EncoderConfig& config);

}  // namespace qgvt
