// SPDX-License-Identifier: Apache-2.0

#include "qgvt/guidance.hpp"

#include <cmath>
#include <string>

#include "qgvt/error.hpp"

namespace qgvt {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::vector<std::string> normalized_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (is_space(c)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
            continue;
        }
        current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

std::vector<float> normalized(std::span<const double> v) {
    double norm = 0.0;
    for (double x : v) {
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw ValidationError("text embedding has zero or non-finite norm");
    }
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(v[i] / norm);
    }
    return out;
}

}  // namespace

TextEmbedding toy_text_embed(std::string_view question, std::size_t d_text, std::uint64_t seed) {
    if (d_text == 0) {
        throw ValidationError("text embedding width must be positive");
    }
    const auto tokens = normalized_tokens(question);
    if (tokens.empty()) {
        throw ValidationError("question is empty");
    }
    std::vector<double> sum(d_text, 0.0);
    for (const auto& token : tokens) {
        SplitMix64 rng(fnv1a64(token) ^ seed);
        for (double& s : sum) {
            s += 2.0 * rng.next_unit() - 1.0;
        }
    }
    for (double& s : sum) {
        s /= static_cast<double>(tokens.size());
    }
    return {normalized(sum), TextEmbedding::Source::toy};
}

TextEmbedding text_embedding_from_archive(const TensorArchive& archive) {
    const Matrix& m = archive.get("text.cls");
    if (m.rows() != 1 || m.cols() == 0) {
        throw ValidationError("tensor 'text.cls' must have shape 1xd_text, got " + m.shape_string());
    }
    std::vector<double> v(m.data().begin(), m.data().end());
    return {normalized(v), TextEmbedding::Source::imported};
}

TextEmbedding load_text_embedding(const std::filesystem::path& path) {
    return text_embedding_from_archive(load_archive(path));
}

std::vector<float> project_to_vision(const TextEmbedding& t, const TensorArchive& weights) {
    const Matrix& w1 = weights.get("guide.mlp.w1");
    const Matrix& w2 = weights.get("guide.mlp.w2");
    if (w1.rows() != t.values.size()) {
        throw ValidationError("guide.mlp.w1 expects text width " + std::to_string(w1.rows()) + ", embedding has " +
                              std::to_string(t.values.size()));
    }
    if (w2.rows() != w1.cols() || w2.cols() != w1.cols()) {
        throw ValidationError("guide.mlp.w2 has shape " + w2.shape_string() + ", expected " +
                              std::to_string(w1.cols()) + "x" + std::to_string(w1.cols()));
    }
    Matrix hidden = matmul(Matrix::row_vector(t.values), w1);
    gelu_inplace(hidden);
    const Matrix v = matmul(hidden, w2);
    if (!v.all_finite()) {
        throw ValidationError("vision-space guidance vector is not finite");
    }
    return {v.data().begin(), v.data().end()};
}

GuidanceVector make_query(std::span<const float> v, std::size_t layer, const TensorArchive& weights,
                          const EncoderConfig& config) {
    if (layer >= config.layers) {
        throw ValidationError("query layer " + std::to_string(layer) + " outside encoder of " +
                              std::to_string(config.layers) + " layers");
    }
    if (v.size() != config.dim) {
        throw ValidationError("guidance vector width " + std::to_string(v.size()) + " != encoder dim " +
                              std::to_string(config.dim));
    }
    const Matrix& wq = weights.get("layers." + std::to_string(layer) + ".attn.wq", config.dim, config.dim);
    const Matrix q = matmul(Matrix::row_vector(v), wq);
    return {{q.data().begin(), q.data().end()}, layer};
}

}  // namespace qgvt
