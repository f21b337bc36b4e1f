#include "leafscope/preprocess.hpp"

#include <cmath>
#include <stdexcept>

namespace leafscope {

void AugmentationConfig::validate() const {
  if (rotation_degrees < 0.0 || rotation_degrees > 180.0)
    throw std::invalid_argument("augment: rotation_degrees must be in [0,180]");
  if (hflip_probability < 0.0 || hflip_probability > 1.0)
    throw std::invalid_argument("augment: hflip_probability must be in [0,1]");
  if (crop_area_fraction <= 0.0 || crop_area_fraction > 1.0)
    throw std::invalid_argument("augment: crop_area_fraction must be in (0,1]");
  if (brightness_delta < 0.0 || brightness_delta >= 1.0)
    throw std::invalid_argument("augment: brightness_delta must be in [0,1)");
  if (contrast_lo <= 0.0 || contrast_hi < contrast_lo)
    throw std::invalid_argument("augment: contrast bounds must satisfy 0 < lo <= hi");
}

ImageTensor load_and_resize(const std::filesystem::path& path, int side) {
  if (side <= 0) throw std::invalid_argument("load_and_resize: side must be positive");
  const RawImage raw = load_raw_image(path);
  return resize_bilinear(normalize_u8(raw), side, side);
}

ImageTensor normalize_u8(const RawImage& raw) {
  return image_from_u8(raw.rgb.data(), raw.height, raw.width);
}

ImageTensor normalize_u8(const std::uint8_t* rgb, int height, int width) {
  return image_from_u8(rgb, height, width);
}

std::vector<std::uint8_t> denormalize_u8(const ImageTensor& image) {
  return image_to_u8(image);
}

ImageTensor augment(const ImageTensor& image, const AugmentationConfig& config,
                    Rng& rng) {
  config.validate();
  ImageTensor out = image;

  if (config.enable_rotation && config.rotation_degrees > 0.0) {
    const double deg = rng.next_range(-config.rotation_degrees, config.rotation_degrees);
    out = rotate(out, deg);
  }
  if (config.enable_hflip) {
    if (rng.next_double() < config.hflip_probability) out = hflip(out);
  }
  if (config.enable_crop && config.crop_area_fraction < 1.0) {
    // Uniform area in [crop_area_fraction, 1], square aspect, uniform offset.
    const double area = rng.next_range(config.crop_area_fraction, 1.0);
    const double scale = std::sqrt(area);
    const int ch = std::max(1, static_cast<int>(std::lround(out.height * scale)));
    const int cw = std::max(1, static_cast<int>(std::lround(out.width * scale)));
    const int max_y = out.height - ch;
    const int max_x = out.width - cw;
    const int y0 = max_y > 0 ? static_cast<int>(rng.next_below(max_y + 1)) : 0;
    const int x0 = max_x > 0 ? static_cast<int>(rng.next_below(max_x + 1)) : 0;
    out = resize_bilinear(crop(out, y0, x0, ch, cw), image.height, image.width);
  }
  if (config.enable_brightness && config.brightness_delta > 0.0) {
    const double delta = rng.next_range(-config.brightness_delta, config.brightness_delta);
    out = adjust_brightness(out, delta);
  }
  if (config.enable_contrast) {
    const double factor = rng.next_range(config.contrast_lo, config.contrast_hi);
    out = adjust_contrast(out, factor);
  }
  clamp01(out);
  return out;
}

}  // namespace leafscope
