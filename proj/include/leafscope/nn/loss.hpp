#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "leafscope/nn/tensor.hpp"

namespace leafscope::nn {

// Row-wise softmax over logits (n x 1 x 1 x c).
inline Tensor softmax(const Tensor& logits) {
  Tensor probs = logits;
  for (int in = 0; in < logits.n; ++in) {
    Scalar* row = probs.data.data() + static_cast<std::size_t>(in) * logits.c;
    Scalar mx = row[0];
    for (int ic = 1; ic < logits.c; ++ic) mx = std::max(mx, row[ic]);
    Scalar sum = 0;
    for (int ic = 0; ic < logits.c; ++ic) {
      row[ic] = std::exp(row[ic] - mx);
      sum += row[ic];
    }
    for (int ic = 0; ic < logits.c; ++ic) row[ic] /= sum;
  }
  return probs;
}

struct CrossEntropyResult {
  Scalar loss = 0;      // mean over the batch; +inf when a true-class
                        // probability underflows (diverged run)
  Tensor grad_logits;   // d(loss)/d(logits)
  Tensor probs;
  std::vector<int> predictions;  // argmax per row
};

// Categorical cross-entropy over softmax. loss_i = -log(p[label_i]).
inline CrossEntropyResult softmax_cross_entropy(const Tensor& logits,
                                                const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.n) {
    throw std::invalid_argument("cross_entropy: label count mismatch");
  }
  CrossEntropyResult res;
  res.probs = softmax(logits);
  res.grad_logits = Tensor(logits.n, 1, 1, logits.c);
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(logits.n);
  for (int in = 0; in < logits.n; ++in) {
    const int y = labels[static_cast<std::size_t>(in)];
    if (y < 0 || y >= logits.c) {
      throw std::out_of_range("cross_entropy: label out of range");
    }
    const Scalar* prow = res.probs.data.data() + static_cast<std::size_t>(in) * logits.c;
    Scalar* grow = res.grad_logits.data.data() + static_cast<std::size_t>(in) * logits.c;
    res.loss += -std::log(prow[y]) * inv_b;
    int argmax = 0;
    for (int ic = 0; ic < logits.c; ++ic) {
      if (prow[ic] > prow[argmax]) argmax = ic;
      grow[ic] = (prow[ic] - (ic == y ? Scalar(1) : Scalar(0))) * inv_b;
    }
    res.predictions.push_back(argmax);
  }
  return res;
}

}  // namespace leafscope::nn
