#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "leafscope/image.hpp"

namespace leafscope {

struct RawImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // HWC, 3 channels
};

// Decodes a JPEG or PNG file (detected by magic bytes) to 8-bit RGB.
// Grayscale inputs are replicated to 3 channels; alpha is dropped.
// Throws std::runtime_error naming the path on failure.
RawImage load_raw_image(const std::filesystem::path& path);

void save_png_rgb(const std::filesystem::path& path, const ImageTensor& img);

// Heatmap output: values clamped to [0,1], written as 8-bit grayscale.
void save_png_gray(const std::filesystem::path& path, const PlaneF& map);

void save_jpeg_rgb(const std::filesystem::path& path, const ImageTensor& img,
                   int quality = 95);

}  // namespace leafscope
