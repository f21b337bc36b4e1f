#include "leafscope/nn/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace leafscope::nn {

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << n << "x" << h << "x" << w << "x" << c;
  return os.str();
}

void Tensor::zero() { std::fill(data.begin(), data.end(), Scalar(0)); }

void Tensor::add_scaled(const Tensor& other, Scalar alpha) {
  assert(same_shape(other));
  for (std::size_t i = 0; i < data.size(); ++i) data[i] += alpha * other.data[i];
}

}  // namespace leafscope::nn
