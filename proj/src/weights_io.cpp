// SPDX-License-Identifier: Apache-2.0

#include "qgvt/weights_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "qgvt/error.hpp"

namespace qgvt {

using json = nlohmann::json;

void EncoderConfig::validate() const {
    if (layers == 0 || dim == 0 || heads == 0 || ffn_dim == 0 || patch_size == 0 || image_size == 0 ||
        text_dim == 0) {
        throw ValidationError("encoder config dimensions must all be positive");
    }
    if (dim % heads != 0) {
        throw ValidationError("encoder dim " + std::to_string(dim) + " not divisible by heads " +
                              std::to_string(heads));
    }
    if (image_size % patch_size != 0) {
        throw ValidationError("image size " + std::to_string(image_size) + " not divisible by patch size " +
                              std::to_string(patch_size));
    }
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw ValidationError("encoder eps must be positive and finite");
    }
}

EncoderConfig EncoderConfig::preset(std::string_view name) {
    if (name == "vit-l-14") {
        return EncoderConfig{};
    }
    if (name == "vit-tiny-14") {
        return EncoderConfig{.layers = 24, .dim = 32, .heads = 4, .ffn_dim = 64, .patch_size = 14,
                             .image_size = 336, .text_dim = 32, .eps = 1e-5};
    }
    if (name == "toy") {
        return EncoderConfig{.layers = 4, .dim = 16, .heads = 2, .ffn_dim = 32, .patch_size = 14,
                             .image_size = 56, .text_dim = 16, .eps = 1e-5};
    }
    throw ValidationError("unknown preset '" + std::string(name) + "' (expected vit-l-14, vit-tiny-14 or toy)");
}

std::map<std::string, std::string> EncoderConfig::to_metadata() const {
    std::ostringstream eps_text;
    eps_text.precision(17);
    eps_text << eps;
    return {
        {"layers", std::to_string(layers)},         {"dim", std::to_string(dim)},
        {"heads", std::to_string(heads)},           {"ffn_dim", std::to_string(ffn_dim)},
        {"patch_size", std::to_string(patch_size)}, {"image_size", std::to_string(image_size)},
        {"text_dim", std::to_string(text_dim)},     {"eps", eps_text.str()},
    };
}

EncoderConfig EncoderConfig::from_metadata(const std::map<std::string, std::string>& meta) {
    auto count = [&](const char* key) -> std::size_t {
        auto it = meta.find(key);
        if (it == meta.end()) {
            throw ValidationError(std::string("archive metadata lacks '") + key + "'");
        }
        try {
            std::size_t used = 0;
            const auto v = std::stoull(it->second, &used);
            if (used != it->second.size()) {
                throw std::invalid_argument(it->second);
            }
            return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ValidationError(std::string("archive metadata '") + key + "' is not a count: " + it->second);
        }
    };
    EncoderConfig c;
    c.layers = count("layers");
    c.dim = count("dim");
    c.heads = count("heads");
    c.ffn_dim = count("ffn_dim");
    c.patch_size = count("patch_size");
    c.image_size = count("image_size");
    c.text_dim = count("text_dim");
    if (auto it = meta.find("eps"); it != meta.end()) {
        try {
            c.eps = std::stod(it->second);
        } catch (const std::exception&) {
            throw ValidationError("archive metadata 'eps' is not a number: " + it->second);
        }
    }
    c.validate();
    return c;
}

void TensorArchive::add(const std::string& name, Matrix m) {
    if (name.empty() || name == kMetadataKey) {
        throw ValidationError("invalid tensor name '" + name + "'");
    }
    if (m_entries.contains(name)) {
        throw ValidationError("duplicate tensor name '" + name + "'");
    }
    if (!m.all_finite()) {
        throw ValidationError("tensor '" + name + "' contains non-finite values");
    }
    m_entries.emplace(name, std::move(m));
}

const Matrix& TensorArchive::get(const std::string& name) const {
    auto it = m_entries.find(name);
    if (it == m_entries.end()) {
        throw ValidationError("missing tensor '" + name + "'");
    }
    return it->second;
}

const Matrix& TensorArchive::get(const std::string& name, std::size_t rows, std::size_t cols) const {
    const Matrix& m = get(name);
    if (m.rows() != rows || m.cols() != cols) {
        throw ValidationError("tensor '" + name + "' has shape " + m.shape_string() + ", expected " +
                              std::to_string(rows) + "x" + std::to_string(cols));
    }
    return m;
}

namespace {

void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
}

std::uint64_t get_le(std::string_view in, std::size_t pos, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    return v;
}

std::size_t header_count(const json& v, const std::string& what) {
    if (!v.is_number_unsigned()) {
        throw FormatError("archive header field " + what + " must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

}  // namespace

namespace {

void write_archive(const TensorArchive& archive, std::ostream& out) {
    json header = json::object();
    std::size_t offset = 0;
    for (const auto& [name, m] : archive.entries()) {
        const std::size_t length = m.size() * sizeof(float);
        header[name] = {{"shape", {m.rows(), m.cols()}}, {"offset", offset}, {"length", length}};
        offset += length;
    }
    if (!archive.metadata().empty()) {
        header[kMetadataKey] = archive.metadata();
    }
    const std::string text = header.dump();

    std::string preamble(kArchiveMagic, 4);
    put_le(preamble, kArchiveVersion, 4);
    put_le(preamble, text.size(), 8);
    out.write(preamble.data(), static_cast<std::streamsize>(preamble.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    std::string buf;
    for (const auto& [name, m] : archive.entries()) {
        buf.clear();
        buf.reserve(m.size() * sizeof(float));
        for (float v : m.data()) {
            put_le(buf, std::bit_cast<std::uint32_t>(v), 4);
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
}

}  // namespace

std::string serialize_archive(const TensorArchive& archive) {
    std::ostringstream out(std::ios::binary);
    write_archive(archive, out);
    return std::move(out).str();
}

namespace {

struct HeaderEntry {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
    std::size_t length = 0;
};

struct ParsedHeader {
    std::vector<HeaderEntry> entries;
    std::map<std::string, std::string> metadata;
};

constexpr std::size_t kPreambleSize = 16;

// Checks magic and version; returns the header length.
std::uint64_t read_preamble(std::string_view preamble, std::uint64_t file_size) {
    if (preamble.size() < 4 || std::memcmp(preamble.data(), kArchiveMagic, 4) != 0) {
        throw FormatError("not a QGVT archive (bad magic)");
    }
    if (preamble.size() < kPreambleSize) {
        throw CorruptionError("QGVT archive truncated inside the preamble");
    }
    const auto version = get_le(preamble, 4, 4);
    if (version != kArchiveVersion) {
        throw FormatError("unsupported QGVT version " + std::to_string(version));
    }
    const auto header_len = get_le(preamble, 8, 8);
    if (header_len > file_size - kPreambleSize) {
        throw CorruptionError("QGVT header length " + std::to_string(header_len) + " exceeds file size");
    }
    return header_len;
}

ParsedHeader parse_header(std::string_view text, std::uint64_t payload_size) {
    std::set<std::string> seen;
    std::string duplicate;
    json header;
    try {
        header = json::parse(text.begin(), text.end(), [&](int depth, json::parse_event_t event, json& parsed) {
            if (event == json::parse_event_t::key && depth == 1) {
                auto key = parsed.get<std::string>();
                if (!seen.insert(key).second && duplicate.empty()) {
                    duplicate = std::move(key);
                }
            }
            return true;
        });
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("QGVT header is not valid JSON: ") + e.what());
    }
    if (!duplicate.empty()) {
        throw ValidationError("duplicate tensor name '" + duplicate + "' in archive header");
    }
    if (!header.is_object()) {
        throw FormatError("QGVT header must be a JSON object");
    }

    ParsedHeader parsed;
    for (const auto& [name, entry] : header.items()) {
        if (name == kMetadataKey) {
            if (!entry.is_object()) {
                throw FormatError("archive metadata must be an object");
            }
            for (const auto& [k, v] : entry.items()) {
                if (!v.is_string()) {
                    throw FormatError("archive metadata value for '" + k + "' must be a string");
                }
                parsed.metadata[k] = v.get<std::string>();
            }
            continue;
        }
        if (!entry.is_object() || !entry.contains("shape") || !entry.contains("offset") ||
            !entry.contains("length")) {
            throw FormatError("header entry '" + name + "' needs shape, offset and length");
        }
        const json& shape = entry["shape"];
        if (!shape.is_array() || shape.size() != 2) {
            throw FormatError("header entry '" + name + "' shape must be [rows, cols]");
        }
        HeaderEntry e;
        e.name = name;
        e.rows = header_count(shape[0], name + ".shape[0]");
        e.cols = header_count(shape[1], name + ".shape[1]");
        e.offset = header_count(entry["offset"], name + ".offset");
        e.length = header_count(entry["length"], name + ".length");
        if (e.rows != 0 && e.cols > (SIZE_MAX / sizeof(float)) / e.rows) {
            throw FormatError("header entry '" + name + "' shape overflows");
        }
        if (e.length != e.rows * e.cols * sizeof(float)) {
            throw FormatError("header entry '" + name + "' length " + std::to_string(e.length) +
                              " does not match shape " + std::to_string(e.rows) + "x" + std::to_string(e.cols));
        }
        if (e.offset > payload_size || e.length > payload_size - e.offset) {
            throw CorruptionError("tensor '" + name + "' region [" + std::to_string(e.offset) + ", +" +
                                  std::to_string(e.length) + ") exceeds payload of " + std::to_string(payload_size) +
                                  " bytes");
        }
        parsed.entries.push_back(std::move(e));
    }

    std::vector<const HeaderEntry*> by_offset;
    for (const auto& e : parsed.entries) {
        if (e.length > 0) {
            by_offset.push_back(&e);
        }
    }
    std::sort(by_offset.begin(), by_offset.end(),
              [](const HeaderEntry* a, const HeaderEntry* b) { return a->offset < b->offset; });
    for (std::size_t i = 1; i < by_offset.size(); ++i) {
        if (by_offset[i - 1]->offset + by_offset[i - 1]->length > by_offset[i]->offset) {
            throw CorruptionError("tensor regions '" + by_offset[i - 1]->name + "' and '" + by_offset[i]->name +
                                  "' overlap");
        }
    }
    return parsed;
}

Matrix decode_tensor(const HeaderEntry& e, std::string_view bytes) {
    std::vector<float> data(e.rows * e.cols);
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, 4 * i, 4)));
    }
    return Matrix(e.rows, e.cols, std::move(data));
}

}  // namespace

TensorArchive parse_archive(std::string_view bytes) {
    const auto header_len = read_preamble(bytes.substr(0, kPreambleSize), bytes.size());
    const auto payload = bytes.substr(kPreambleSize + header_len);
    auto header = parse_header(bytes.substr(kPreambleSize, header_len), payload.size());
    TensorArchive archive;
    archive.metadata() = std::move(header.metadata);
    for (const auto& e : header.entries) {
        archive.add(e.name, decode_tensor(e, payload.substr(e.offset, e.length)));
    }
    return archive;
}

void save_archive(const TensorArchive& archive, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    write_archive(archive, out);
    out.flush();
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

TensorArchive load_archive(const std::filesystem::path& path) {
    std::error_code ec;
    const auto file_size = std::filesystem::file_size(path, ec);
    std::ifstream in(path, std::ios::binary);
    if (ec || !in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    auto read_at = [&](std::uint64_t pos, std::size_t n) {
        std::string buf(n, '\0');
        in.seekg(static_cast<std::streamoff>(pos));
        in.read(buf.data(), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) {
            throw IoError("short read from '" + path.string() + "'");
        }
        return buf;
    };
    const auto preamble = read_at(0, std::min<std::uint64_t>(kPreambleSize, file_size));
    const auto header_len = read_preamble(preamble, file_size);
    const auto payload_start = kPreambleSize + header_len;
    auto header = parse_header(read_at(kPreambleSize, header_len), file_size - payload_start);
    TensorArchive archive;
    archive.metadata() = std::move(header.metadata);
    for (const auto& e : header.entries) {
        archive.add(e.name, decode_tensor(e, read_at(payload_start + e.offset, e.length)));
    }
    return archive;
}

std::pair<std::uint64_t, std::uint64_t> splitmix64_next(std::uint64_t state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return {z ^ (z >> 31), state};
}

std::uint64_t SplitMix64::next() {
    auto [value, state] = splitmix64_next(m_state);
    m_state = state;
    return value;
}

double SplitMix64::next_unit() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

float synthetic_value(double unit) {
    float v = static_cast<float>(-0.1 + 0.2 * unit);
    if (v >= 0.1f) {
        v = std::nextafter(0.1f, 0.0f);
    }
    return v;
}

std::map<std::string, std::pair<std::size_t, std::size_t>> canonical_shapes(const EncoderConfig& config) {
    config.validate();
    const std::size_t d = config.dim;
    std::map<std::string, std::pair<std::size_t, std::size_t>> shapes;
    shapes["patch.weight"] = {config.patch_dim(), d};
    shapes["patch.pos"] = {config.token_count() + 1, d};
    shapes["patch.cls"] = {1, d};
    shapes["guide.mlp.w1"] = {config.text_dim, d};
    shapes["guide.mlp.w2"] = {d, d};
    for (std::size_t i = 0; i < config.layers; ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
            shapes[p + w] = {d, d};
        }
        for (const char* w : {"ln1.gamma", "ln1.beta", "ln2.gamma", "ln2.beta"}) {
            shapes[p + w] = {1, d};
        }
        shapes[p + "ffn.w1"] = {d, config.ffn_dim};
        shapes[p + "ffn.w2"] = {config.ffn_dim, d};
    }
    return shapes;
}

TensorArchive gen_synthetic(std::uint64_t seed, const EncoderConfig& config, std::string_view preset_name) {
    TensorArchive archive;
    SplitMix64 rng(seed);
    for (const auto& [name, shape] : canonical_shapes(config)) {
        std::vector<float> data(shape.first * shape.second);
        for (float& v : data) {
            v = synthetic_value(rng.next_unit());
        }
        archive.add(name, Matrix(shape.first, shape.second, std::move(data)));
    }
    archive.metadata() = config.to_metadata();
    archive.metadata()["preset"] = std::string(preset_name);
    archive.metadata()["seed"] = std::to_string(seed);
    archive.metadata()["generator"] = "splitmix64-uniform-0.1";
    return archive;
}

}  // namespace qgvt
