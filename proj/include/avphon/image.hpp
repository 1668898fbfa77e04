#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "avphon/types.hpp"

namespace avphon {

inline constexpr int kMouthWidth = 100;
inline constexpr int kMouthHeight = 150;

/// 8-bit grayscale image, row-major (index = row * width + col).
struct Image8 {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;

    uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
    uint8_t at(int row, int col) const {
        return pixels[static_cast<std::size_t>(row) * width + col];
    }
    int size() const { return width * height; }
};

/// A mouth frame together with its capture timestamp.
struct FrameImage {
    Image8 image;
    double timestamp = 0.0;
};

/// Weighted grayscale conversion, rounded to nearest and clamped to [0, 255].
uint8_t to_grayscale(double r, double g, double b);

/// Flattens an image to a real vector, pixel order row-major.
Vec vectorize(const Image8& image);

namespace io {

/// Reads a binary PGM (P5) or PPM (P6) image with maxval 255; PPM input is
/// converted through to_grayscale.
Image8 read_image(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const Image8& image);

}  // namespace io
}  // namespace avphon
