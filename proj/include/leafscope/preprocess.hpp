#pragma once

#include <cstdint>
#include <filesystem>

#include "leafscope/image.hpp"
#include "leafscope/imageio.hpp"
#include "leafscope/rng.hpp"

namespace leafscope {

struct AugmentationConfig {
  double rotation_degrees = 20.0;   // max |rotation|, in [0,180]
  double hflip_probability = 0.5;   // in [0,1]
  double crop_area_fraction = 0.9;  // minimum retained area, in (0,1]
  double brightness_delta = 0.2;    // max additive shift, in [0,1)
  double contrast_lo = 0.8;         // multiplicative bounds, 0 < lo <= hi
  double contrast_hi = 1.2;

  bool enable_rotation = true;
  bool enable_hflip = true;
  bool enable_crop = true;
  bool enable_brightness = true;
  bool enable_contrast = true;

  // Throws std::invalid_argument when a field is out of range.
  void validate() const;

  static AugmentationConfig disabled() {
    AugmentationConfig c;
    c.enable_rotation = c.enable_hflip = c.enable_crop = false;
    c.enable_brightness = c.enable_contrast = false;
    return c;
  }
};

// Decode + square bilinear resize to side x side + scale to [0,1].
// Grayscale inputs come back replicated to 3 channels.
ImageTensor load_and_resize(const std::filesystem::path& path, int side);

// raw 8-bit values / 255.
ImageTensor normalize_u8(const RawImage& raw);
ImageTensor normalize_u8(const std::uint8_t* rgb, int height, int width);

// Inverse of normalize_u8 on representable 8-bit values.
std::vector<std::uint8_t> denormalize_u8(const ImageTensor& image);

// Train-split augmentation. Applies, in order: rotation (reflection padding),
// horizontal flip, random area crop + resize back, brightness shift, contrast
// about the mean, then a final clamp to [0,1]. Pure in (image, config, rng).
ImageTensor augment(const ImageTensor& image, const AugmentationConfig& config,
                    Rng& rng);

}  // namespace leafscope
