#pragma once

#include <cstdint>
#include <vector>

namespace leafscope {

// H x W x 3 image, RGB, values in [0,1], row-major HWC.
struct ImageTensor {
  int height = 0;
  int width = 0;
  static constexpr int channels = 3;
  std::vector<double> values;

  ImageTensor() = default;
  ImageTensor(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w * 3, 0.0) {}

  double& at(int y, int x, int c) {
    return values[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double at(int y, int x, int c) const {
    return values[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::size_t size() const { return values.size(); }
  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width;
  }
};

// Single-channel map, row-major, arbitrary range unless stated otherwise.
struct PlaneF {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  PlaneF() = default;
  PlaneF(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w, 0.0) {}

  double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// 8-bit <-> [0,1] conversions. from_u8 divides by 255; to_u8 rounds half up.
ImageTensor image_from_u8(const std::uint8_t* rgb, int height, int width);
std::vector<std::uint8_t> image_to_u8(const ImageTensor& img);

// Plain square-capable bilinear resize, half-pixel centers, no aspect
// preservation. Identity when sizes already match.
ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w);
PlaneF resize_bilinear(const PlaneF& map, int out_h, int out_w);

// Rotation about the image center by `degrees` (counterclockwise), bilinear
// sampling with reflection padding at the borders.
ImageTensor rotate(const ImageTensor& img, double degrees);

ImageTensor hflip(const ImageTensor& img);

// Axis-aligned crop; the rectangle must lie inside the image.
ImageTensor crop(const ImageTensor& img, int y0, int x0, int h, int w);

// value + delta, clamped to [0,1].
ImageTensor adjust_brightness(const ImageTensor& img, double delta);

// mean + factor * (value - mean) per image (mean over all pixels/channels),
// clamped to [0,1].
ImageTensor adjust_contrast(const ImageTensor& img, double factor);

void clamp01(ImageTensor& img);

}  // namespace leafscope
