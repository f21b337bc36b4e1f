// Regenerates fixtures/corpus: 25 synthetic 64x64 leaves, 5 per class, with
// class-specific color signatures so the toy backbone can separate them.
// Deterministic; committed output only changes if this generator changes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "leafscope/dataset.hpp"
#include "leafscope/image.hpp"
#include "leafscope/imageio.hpp"
#include "leafscope/rng.hpp"

namespace fs = std::filesystem;
using namespace leafscope;

namespace {

constexpr int kSide = 64;

// Rounded leaf silhouette mask centered in the frame.
bool inside_leaf(int y, int x) {
  const double dy = (y - kSide / 2.0) / (kSide * 0.42);
  const double dx = (x - kSide / 2.0) / (kSide * 0.34);
  return dy * dy + dx * dx <= 1.0;
}

ImageTensor render(ClassLabel label, int index) {
  Rng rng = Rng::from_words({77u, static_cast<std::uint64_t>(label),
                             static_cast<std::uint64_t>(index)});
  ImageTensor img(kSide, kSide);
  const double soil_r = 0.35 + 0.1 * rng.next_double();
  const double soil_g = 0.25 + 0.1 * rng.next_double();
  const double base_g = 0.55 + 0.2 * rng.next_double();

  for (int y = 0; y < kSide; ++y) {
    for (int x = 0; x < kSide; ++x) {
      if (!inside_leaf(y, x)) {
        img.at(y, x, 0) = soil_r;
        img.at(y, x, 1) = soil_g;
        img.at(y, x, 2) = 0.15;
        continue;
      }
      double r = 0.12, g = base_g, b = 0.10;
      switch (label) {
        case ClassLabel::HealthyLeaf:
          g += 0.15 * std::sin(0.3 * y);
          break;
        case ClassLabel::BacterialLeafSpot:
          // dark brown speckles
          if ((y * 31 + x * 17 + index * 7) % 23 < 3) {
            r = 0.45;
            g = 0.25;
            b = 0.08;
          }
          break;
        case ClassLabel::DownyMildew:
          // yellowing patches
          if (((y / 6) + (x / 6) + index) % 3 == 0) {
            r = 0.75;
            g = 0.72;
            b = 0.18;
          }
          break;
        case ClassLabel::MosaicDisease:
          // alternating light/dark mosaic tiles
          if (((y / 8) ^ (x / 8)) & 1) {
            r = 0.55;
            g = 0.78;
            b = 0.25;
          }
          break;
        case ClassLabel::PowderyMildew:
          // white powder dust
          if ((y * 13 + x * 29 + index * 11) % 17 < 4) {
            r = 0.88;
            g = 0.9;
            b = 0.86;
          }
          break;
      }
      img.at(y, x, 0) = r + 0.03 * rng.next_double();
      img.at(y, x, 1) = g + 0.03 * rng.next_double();
      img.at(y, x, 2) = b + 0.03 * rng.next_double();
    }
  }
  clamp01(img);
  return img;
}

std::string dir_name(ClassLabel label) {
  // Lowercase underscore names; exercises the tolerant class-name mapping.
  switch (label) {
    case ClassLabel::BacterialLeafSpot: return "bacterial_leaf_spot";
    case ClassLabel::DownyMildew: return "downy_mildew";
    case ClassLabel::HealthyLeaf: return "healthy_leaf";
    case ClassLabel::MosaicDisease: return "mosaic_disease";
    case ClassLabel::PowderyMildew: return "powdery_mildew";
  }
  return "unknown";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? argv[1] : "fixtures/corpus";
  for (int c = 0; c < kNumClasses; ++c) {
    const auto label = static_cast<ClassLabel>(c);
    const fs::path dir = root / dir_name(label);
    fs::create_directories(dir);
    for (int i = 0; i < 5; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "leaf_%02d.png", i);
      save_png_rgb(dir / name, render(label, i));
    }
  }
  std::cout << "fixture corpus written to " << root.string() << "\n";
  return 0;
}
