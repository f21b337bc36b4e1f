#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "leafscope/backbones.hpp"
#include "leafscope/image.hpp"

namespace leafscope {

// Single-image activation block A (h x w x c); k indexes channels.
struct ActivationBlock {
  int h = 0, w = 0, c = 0;
  std::vector<double> values;  // (y, x, k) row-major

  ActivationBlock() = default;
  ActivationBlock(int h_, int w_, int c_)
      : h(h_), w(w_), c(c_), values(static_cast<std::size_t>(h_) * w_ * c_, 0.0) {}
  double& at(int y, int x, int k) {
    return values[(static_cast<std::size_t>(y) * w + x) * c + k];
  }
  double at(int y, int x, int k) const {
    return values[(static_cast<std::size_t>(y) * w + x) * c + k];
  }
};

// d(target logit)/dA with the same shape as its activation block.
using GradientBlock = ActivationBlock;

// Relevance map at input resolution, min-max normalized: values in [0,1] and
// max == 1 exactly unless the raw map was identically zero.
struct Heatmap {
  PlaneF values;
  std::string method;
  std::string layer;
  int class_index = -1;
};

// Batch-element view of a tapped tensor.
ActivationBlock block_from_tensor(const nn::Tensor& t, int batch_index = 0);

// Shared finishing step: bilinear upsample to (out_h, out_w), then min-max
// normalize (all-zero maps stay all-zero; constant positive maps become 1).
PlaneF upsample_normalize(const PlaneF& raw, int out_h, int out_w);

// alpha_k = spatial mean of the gradient; raw = ReLU(sum_k alpha_k A^k).
Heatmap grad_cam(const ActivationBlock& acts, const GradientBlock& grads, int out_h,
                 int out_w);

// Closed-form Grad-CAM++ weights from element-wise powers of the first-order
// gradient; zero denominators contribute nothing.
Heatmap grad_cam_pp(const ActivationBlock& acts, const GradientBlock& grads,
                    int out_h, int out_w);

// raw = ReLU(sum_k ReLU(G^k) * A^k), element-wise spatial weighting.
Heatmap layer_cam(const ActivationBlock& acts, const GradientBlock& grads, int out_h,
                  int out_w);

struct ScoreCamStats {
  int participating_channels = 0;
  std::vector<double> weights;  // softmax over participating channel scores
};

// Gradient-free: masks the input with each (upsampled, normalized) channel
// map, scores the masked forwards, and softmax-combines the channels.
// Runs exactly 1 + participating_channels forward passes, no backward pass.
Heatmap score_cam(ModelHandle& model, const ImageTensor& image,
                  const std::string& layer, int class_index,
                  ScoreCamStats* stats = nullptr);

// Blue -> cyan -> green -> yellow -> red ramp with control points at
// t = 0, 0.25, 0.5, 0.75, 1.
void colormap_bluered(double t, double* r, double* g, double* b);

// (1-alpha) * image + alpha * colormap(heatmap), clamped to [0,1].
ImageTensor overlay(const ImageTensor& image, const Heatmap& heatmap, double alpha = 0.4,
                    const std::string& colormap = "bluered");

struct ExplainRequest {
  std::vector<std::string> methods;  // of {gradcam, gradcampp, scorecam, layercam}
  std::optional<std::string> layer;  // default: spec.default_cam_layer
  std::optional<int> class_index;    // default: argmax prediction
  double overlay_alpha = 0.4;
};

struct ExplainResult {
  int predicted_class = -1;
  std::vector<double> softmax;
  int class_used = -1;
  std::string layer_used;
  std::map<std::string, Heatmap> heatmaps;      // per successful method
  std::map<std::string, std::string> failures;  // method -> error message
};

// Runs the requested methods on one preprocessed image; a failing method is
// recorded and does not abort the rest.
ExplainResult explain(ModelHandle& model, const ImageTensor& image,
                      const ExplainRequest& request);

// explain + artifact writing: heatmap_<method>.png, overlay_<method>.png,
// prediction.json under out_dir.
ExplainResult explain_to_files(ModelHandle& model, const ImageTensor& image,
                               const ExplainRequest& request,
                               const std::filesystem::path& out_dir,
                               const std::vector<std::string>& class_labels);

}  // namespace leafscope
