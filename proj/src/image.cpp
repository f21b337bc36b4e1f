#include "leafscope/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace leafscope {

namespace {

// Reflect an out-of-range coordinate back into [0, n) (mirror without
// repeating the border pixel; matches half-sample symmetric reflection for
// the offsets rotation produces).
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

double clamp01d(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

ImageTensor image_from_u8(const std::uint8_t* rgb, int height, int width) {
  ImageTensor out(height, width);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out.values[i] = rgb[i] / 255.0;
  return out;
}

std::vector<std::uint8_t> image_to_u8(const ImageTensor& img) {
  std::vector<std::uint8_t> out(img.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = clamp01d(img.values[i]);
    out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize: non-positive size");
  if (out_h == img.height && out_w == img.width) return img;
  ImageTensor out(out_h, out_w);
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(y0, x0, c) * (1 - wx) + img.at(y0, x1, c) * wx;
        const double bot = img.at(y1, x0, c) * (1 - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

PlaneF resize_bilinear(const PlaneF& map, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize: non-positive size");
  if (out_h == map.height && out_w == map.width) return map;
  PlaneF out(out_h, out_w);
  const double sy = static_cast<double>(map.height) / out_h;
  const double sx = static_cast<double>(map.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(map.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, map.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(map.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, map.width - 1);
      const double wx = fx - x0;
      const double top = map.at(y0, x0) * (1 - wx) + map.at(y0, x1) * wx;
      const double bot = map.at(y1, x0) * (1 - wx) + map.at(y1, x1) * wx;
      out.at(y, x) = top * (1 - wy) + bot * wy;
    }
  }
  return out;
}

ImageTensor rotate(const ImageTensor& img, double degrees) {
  if (degrees == 0.0) return img;
  ImageTensor out(img.height, img.width);
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  const double cy = (img.height - 1) / 2.0;
  const double cx = (img.width - 1) / 2.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // Inverse mapping: destination pixel samples the source.
      const double dy = y - cy;
      const double dx = x - cx;
      const double srcy = cy + sn * dx + cs * dy;
      const double srcx = cx + cs * dx - sn * dy;
      const int y0 = static_cast<int>(std::floor(srcy));
      const int x0 = static_cast<int>(std::floor(srcx));
      const double wy = srcy - y0;
      const double wx = srcx - x0;
      const int ya = reflect_index(y0, img.height);
      const int yb = reflect_index(y0 + 1, img.height);
      const int xa = reflect_index(x0, img.width);
      const int xb = reflect_index(x0 + 1, img.width);
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(ya, xa, c) * (1 - wx) + img.at(ya, xb, c) * wx;
        const double bot = img.at(yb, xa, c) * (1 - wx) + img.at(yb, xb, c) * wx;
        out.at(y, x, c) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

ImageTensor hflip(const ImageTensor& img) {
  ImageTensor out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

ImageTensor crop(const ImageTensor& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || h <= 0 || w <= 0 || y0 + h > img.height || x0 + w > img.width) {
    throw std::invalid_argument("crop: rectangle outside image");
  }
  ImageTensor out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

ImageTensor adjust_brightness(const ImageTensor& img, double delta) {
  ImageTensor out = img;
  for (auto& v : out.values) v = clamp01d(v + delta);
  return out;
}

ImageTensor adjust_contrast(const ImageTensor& img, double factor) {
  ImageTensor out = img;
  double mean = 0.0;
  for (const auto& v : img.values) mean += v;
  mean /= static_cast<double>(img.values.empty() ? 1 : img.values.size());
  for (auto& v : out.values) v = clamp01d(mean + factor * (v - mean));
  return out;
}

void clamp01(ImageTensor& img) {
  for (auto& v : img.values) v = clamp01d(v);
}

}  // namespace leafscope
