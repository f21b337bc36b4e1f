#pragma once

#include <stdexcept>
#include <vector>

#include "leafscope/image.hpp"
#include "leafscope/nn/tensor.hpp"

namespace leafscope {

inline nn::Tensor to_tensor(const ImageTensor& img) {
  nn::Tensor t(1, img.height, img.width, 3);
  t.data.assign(img.values.begin(), img.values.end());
  return t;
}

inline nn::Tensor to_batch(const std::vector<ImageTensor>& images) {
  if (images.empty()) throw std::invalid_argument("to_batch: empty batch");
  nn::Tensor t(static_cast<int>(images.size()), images[0].height, images[0].width, 3);
  std::size_t offset = 0;
  for (const auto& img : images) {
    if (!img.same_shape(images[0])) {
      throw std::invalid_argument("to_batch: mixed image sizes");
    }
    std::copy(img.values.begin(), img.values.end(), t.data.begin() + offset);
    offset += img.values.size();
  }
  return t;
}

inline ImageTensor to_image(const nn::Tensor& t, int batch_index = 0) {
  if (t.c != 3) throw std::invalid_argument("to_image: tensor is not 3-channel");
  ImageTensor img(t.h, t.w);
  const std::size_t plane = static_cast<std::size_t>(t.h) * t.w * 3;
  std::copy(t.data.begin() + batch_index * plane,
            t.data.begin() + (batch_index + 1) * plane, img.values.begin());
  return img;
}

}  // namespace leafscope
