#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace leafscope::nn {

using Scalar = double;

// Dense NHWC tensor. Vectors (logits, biases) use n x 1 x 1 x c; conv
// weights reuse the four axes as (kh, kw, in_c, out_c).
struct Tensor {
  int n = 0, h = 0, w = 0, c = 0;
  std::vector<Scalar> data;

  Tensor() = default;
  Tensor(int n_, int h_, int w_, int c_)
      : n(n_), h(h_), w(w_), c(c_),
        data(static_cast<std::size_t>(n_) * h_ * w_ * c_, Scalar(0)) {}

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  Scalar& at(int in, int iy, int ix, int ic) {
    return data[((static_cast<std::size_t>(in) * h + iy) * w + ix) * c + ic];
  }
  const Scalar& at(int in, int iy, int ix, int ic) const {
    return data[((static_cast<std::size_t>(in) * h + iy) * w + ix) * c + ic];
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && h == o.h && w == o.w && c == o.c;
  }
  std::string shape_str() const;

  void zero();
  void add_scaled(const Tensor& other, Scalar alpha);  // this += alpha * other
};

}  // namespace leafscope::nn
