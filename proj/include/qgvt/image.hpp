// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace qgvt {

/// 8-bit interleaved RGB image, row-major.
struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t channel) { return pixels[(y * width + x) * 3 + channel]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t channel) const {
        return pixels[(y * width + x) * 3 + channel];
    }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Binary PPM (P6, maxval 255). Comments in the header are skipped.
RgbImage parse_ppm(std::string_view bytes);
std::string serialize_ppm(const RgbImage& image);

RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);

}  // namespace qgvt
