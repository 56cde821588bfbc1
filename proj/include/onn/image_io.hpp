#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "onn/tensor.hpp"

namespace onn {

/// 8-bit raster with 1 (gray), 3 (RGB) or 4 (RGBA) interleaved channels.
struct Raster {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 1;
    std::vector<std::uint8_t> pixels;
};

/// Reads binary/ASCII PGM and PPM (P2, P3, P5, P6) and PNG files.
Raster read_raster(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Raster& raster);

/// Luminance 0.299 R + 0.587 G + 0.114 B, scaled to [0, 1].
Tensor to_grayscale(const Raster& raster);
/// Rounds [0, 1] intensities (clamped) to an 8-bit grayscale raster.
Raster to_raster(const Tensor& image);

/// Bilinear resampling with half-pixel centers and edge clamping.
Tensor resize_bilinear(const Tensor& image, std::size_t rows, std::size_t cols);

}  // namespace onn
