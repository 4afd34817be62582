// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>

#include "qgvt/tensor.hpp"

namespace qgvt {

/// Shape of the ViT encoder plus the text-embedding width feeding the guidance MLP.
struct EncoderConfig {
    std::size_t layers = 24;
    std::size_t dim = 1024;
    std::size_t heads = 16;
    std::size_t ffn_dim = 4096;
    std::size_t patch_size = 14;
    std::size_t image_size = 336;
    std::size_t text_dim = 768;
    double eps = 1e-5;

    std::size_t grid() const { return image_size / patch_size; }
    std::size_t token_count() const { return grid() * grid(); }
    std::size_t head_dim() const { return dim / heads; }
    std::size_t patch_dim() const { return patch_size * patch_size * 3; }

    /// Throws ValidationError when a dimension is zero, dim % heads != 0 or
    /// image_size % patch_size != 0.
    void validate() const;

    /// Named presets: "vit-l-14" (CLIP ViT-L/14 @ 336), "vit-tiny-14" (24 layers,
    /// 336 px, narrow width) and "toy" (4 layers, 56 px, d = 16).
    static EncoderConfig preset(std::string_view name);

    std::map<std::string, std::string> to_metadata() const;
    static EncoderConfig from_metadata(const std::map<std::string, std::string>& meta);

    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Named float32 tensors plus free-form string metadata.
class TensorArchive {
public:
    /// Throws ValidationError on a duplicate name or non-finite entries.
    void add(const std::string& name, Matrix m);

    bool contains(const std::string& name) const { return m_entries.contains(name); }

    /// Throws ValidationError naming the missing tensor.
    const Matrix& get(const std::string& name) const;

    /// Like get() but also checks the shape; throws ValidationError otherwise.
    const Matrix& get(const std::string& name, std::size_t rows, std::size_t cols) const;

    const std::map<std::string, Matrix>& entries() const { return m_entries; }
    std::map<std::string, std::string>& metadata() { return m_metadata; }
    const std::map<std::string, std::string>& metadata() const { return m_metadata; }

    friend bool operator==(const TensorArchive&, const TensorArchive&) = default;

private:
    std::map<std::string, Matrix> m_entries;
    std::map<std::string, std::string> m_metadata;
};

// QGVT archive layout (all integers little-endian):
//   "QGVT" | u32 version (1) | u64 header length | UTF-8 JSON header | payload
// The header maps each tensor name to {"shape": [rows, cols], "offset": o,
// "length": bytes}, with offsets counted from the first payload byte. The
// reserved key "__metadata__" holds the string metadata map. The payload is
// the concatenation of the tensors' row-major float32 data in name order.
inline constexpr char kArchiveMagic[4] = {'Q', 'G', 'V', 'T'};
inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr const char* kMetadataKey = "__metadata__";

std::string serialize_archive(const TensorArchive& archive);
TensorArchive parse_archive(std::string_view bytes);

void save_archive(const TensorArchive& archive, const std::filesystem::path& path);
TensorArchive load_archive(const std::filesystem::path& path);

/// Reference splitmix64 step: returns (output, next state).
std::pair<std::uint64_t, std::uint64_t> splitmix64_next(std::uint64_t state);

/// Stateful wrapper around splitmix64_next.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : m_state(seed) {}

    std::uint64_t next();
    /// Top 53 bits of the next output as a double in [0, 1).
    double next_unit();

private:
    std::uint64_t m_state;
};

/// Maps a unit draw onto the synthetic weight range. Result lies in [-0.1f, 0.1f).
float synthetic_value(double unit);

/// Canonical tensor names and shapes required by the encoder, guidance MLP and
/// patch embedding, in sorted-name order.
std::map<std::string, std::pair<std::size_t, std::size_t>> canonical_shapes(const EncoderConfig& config);

/// Every canonical tensor filled from one splitmix64 stream, tensors visited in
/// sorted-name order, elements row-major. Metadata records preset, seed and dims.
TensorArchive gen_synthetic(std::uint64_t seed, const EncoderConfig& config, std::string_view preset_name = "custom");

}  // namespace qgvt
