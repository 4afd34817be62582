// SPDX-License-Identifier: Apache-2.0

#include "qgvt/image.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

#include "qgvt/error.hpp"

namespace qgvt {

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::string_view bytes) : m_bytes(bytes) {}

    void skip_space_and_comments() {
        while (m_pos < m_bytes.size()) {
            const char c = m_bytes[m_pos];
            if (c == '#') {
                while (m_pos < m_bytes.size() && m_bytes[m_pos] != '\n') {
                    ++m_pos;
                }
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++m_pos;
            } else {
                return;
            }
        }
    }

    std::size_t number(const char* what) {
        skip_space_and_comments();
        std::size_t value = 0;
        std::size_t digits = 0;
        while (m_pos < m_bytes.size() && std::isdigit(static_cast<unsigned char>(m_bytes[m_pos]))) {
            value = value * 10 + static_cast<std::size_t>(m_bytes[m_pos] - '0');
            if (++digits > 9) {
                throw FormatError(std::string("PPM ") + what + " is too large");
            }
            ++m_pos;
        }
        if (digits == 0) {
            throw FormatError(std::string("PPM header lacks ") + what);
        }
        return value;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_start() {
        if (m_pos >= m_bytes.size() || !std::isspace(static_cast<unsigned char>(m_bytes[m_pos]))) {
            throw FormatError("PPM header must end with a single whitespace byte");
        }
        return m_pos + 1;
    }

private:
    std::string_view m_bytes;
    std::size_t m_pos = 2;
};

}  // namespace

RgbImage parse_ppm(std::string_view bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        throw FormatError("not a binary PPM (expected magic P6)");
    }
    HeaderReader header(bytes);
    const std::size_t width = header.number("width");
    const std::size_t height = header.number("height");
    const std::size_t maxval = header.number("maxval");
    if (maxval != 255) {
        throw FormatError("PPM maxval must be 255, got " + std::to_string(maxval));
    }
    if (width == 0 || height == 0) {
        throw FormatError("PPM image has zero size");
    }
    const std::size_t start = header.raster_start();
    const std::size_t need = width * height * 3;
    if (bytes.size() - start < need) {
        throw CorruptionError("PPM raster truncated: need " + std::to_string(need) + " bytes, have " +
                              std::to_string(bytes.size() - start));
    }
    RgbImage img(width, height);
    for (std::size_t i = 0; i < need; ++i) {
        img.pixels[i] = static_cast<std::uint8_t>(bytes[start + i]);
    }
    return img;
}

std::string serialize_ppm(const RgbImage& image) {
    std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.append(image.pixels.begin(), image.pixels.end());
    return out;
}

RgbImage read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open image '" + path.string() + "'");
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_ppm(bytes);
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
    const std::string bytes = serialize_ppm(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

}  // namespace qgvt
