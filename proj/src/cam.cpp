#include "leafscope/cam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

#include "leafscope/imageio.hpp"
#include "leafscope/nn/loss.hpp"
#include "leafscope/tensor_bridge.hpp"

namespace leafscope {

namespace {

PlaneF relu_plane(PlaneF p) {
  for (auto& v : p.values) v = v > 0 ? v : 0.0;
  return p;
}

Heatmap finish(PlaneF raw, int out_h, int out_w, const char* method) {
  Heatmap hm;
  hm.method = method;
  hm.values = upsample_normalize(raw, out_h, out_w);
  return hm;
}

}  // namespace

ActivationBlock block_from_tensor(const nn::Tensor& t, int batch_index) {
  if (batch_index < 0 || batch_index >= t.n) {
    throw std::invalid_argument("block_from_tensor: batch index out of range");
  }
  ActivationBlock block(t.h, t.w, t.c);
  const std::size_t plane = static_cast<std::size_t>(t.h) * t.w * t.c;
  std::copy(t.data.begin() + batch_index * plane,
            t.data.begin() + (batch_index + 1) * plane, block.values.begin());
  return block;
}

PlaneF upsample_normalize(const PlaneF& raw, int out_h, int out_w) {
  PlaneF up = resize_bilinear(raw, out_h, out_w);
  double lo = up.values.empty() ? 0.0 : up.values[0];
  double hi = lo;
  for (double v : up.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi > lo) {
    // Plain division so the max lands on 1.0 exactly.
    for (auto& v : up.values) v = (v - lo) / (hi - lo);
  } else {
    // Constant map: all-zero stays zero, constant positive saturates.
    const double fill = hi > 0.0 ? 1.0 : 0.0;
    std::fill(up.values.begin(), up.values.end(), fill);
  }
  return up;
}

Heatmap grad_cam(const ActivationBlock& acts, const GradientBlock& grads, int out_h,
                 int out_w) {
  if (acts.h != grads.h || acts.w != grads.w || acts.c != grads.c) {
    throw std::invalid_argument("grad_cam: activation/gradient shape mismatch");
  }
  const double inv_hw = 1.0 / (static_cast<double>(acts.h) * acts.w);
  std::vector<double> alpha(static_cast<std::size_t>(acts.c), 0.0);
  for (int y = 0; y < acts.h; ++y)
    for (int x = 0; x < acts.w; ++x)
      for (int k = 0; k < acts.c; ++k) alpha[k] += grads.at(y, x, k) * inv_hw;

  PlaneF raw(acts.h, acts.w);
  for (int y = 0; y < acts.h; ++y) {
    for (int x = 0; x < acts.w; ++x) {
      double s = 0.0;
      for (int k = 0; k < acts.c; ++k) s += alpha[k] * acts.at(y, x, k);
      raw.at(y, x) = s;
    }
  }
  return finish(relu_plane(std::move(raw)), out_h, out_w, "gradcam");
}

Heatmap grad_cam_pp(const ActivationBlock& acts, const GradientBlock& grads,
                    int out_h, int out_w) {
  if (acts.h != grads.h || acts.w != grads.w || acts.c != grads.c) {
    throw std::invalid_argument("grad_cam_pp: activation/gradient shape mismatch");
  }
  // Per channel: sum_A = sum_ab A_ab, denom_ij = 2 g_ij^2 + sum_A g_ij^3,
  // alpha_ij = g_ij^2 / denom_ij (0 where denom is 0),
  // w_k = sum_ij alpha_ij ReLU(g_ij).
  std::vector<double> sum_a(static_cast<std::size_t>(acts.c), 0.0);
  for (int y = 0; y < acts.h; ++y)
    for (int x = 0; x < acts.w; ++x)
      for (int k = 0; k < acts.c; ++k) sum_a[k] += acts.at(y, x, k);

  std::vector<double> weight(static_cast<std::size_t>(acts.c), 0.0);
  for (int y = 0; y < acts.h; ++y) {
    for (int x = 0; x < acts.w; ++x) {
      for (int k = 0; k < acts.c; ++k) {
        const double g = grads.at(y, x, k);
        const double g2 = g * g;
        const double denom = 2.0 * g2 + sum_a[k] * g2 * g;
        if (denom == 0.0) continue;
        const double a = g2 / denom;
        weight[k] += a * (g > 0 ? g : 0.0);
      }
    }
  }

  PlaneF raw(acts.h, acts.w);
  for (int y = 0; y < acts.h; ++y) {
    for (int x = 0; x < acts.w; ++x) {
      double s = 0.0;
      for (int k = 0; k < acts.c; ++k) s += weight[k] * acts.at(y, x, k);
      raw.at(y, x) = s;
    }
  }
  return finish(relu_plane(std::move(raw)), out_h, out_w, "gradcampp");
}

Heatmap layer_cam(const ActivationBlock& acts, const GradientBlock& grads, int out_h,
                  int out_w) {
  if (acts.h != grads.h || acts.w != grads.w || acts.c != grads.c) {
    throw std::invalid_argument("layer_cam: activation/gradient shape mismatch");
  }
  PlaneF raw(acts.h, acts.w);
  for (int y = 0; y < acts.h; ++y) {
    for (int x = 0; x < acts.w; ++x) {
      double s = 0.0;
      for (int k = 0; k < acts.c; ++k) {
        const double g = grads.at(y, x, k);
        if (g > 0) s += g * acts.at(y, x, k);
      }
      raw.at(y, x) = s;
    }
  }
  return finish(relu_plane(std::move(raw)), out_h, out_w, "layercam");
}

Heatmap score_cam(ModelHandle& model, const ImageTensor& image,
                  const std::string& layer, int class_index, ScoreCamStats* stats) {
  if (!model.is_tap_layer(layer)) {
    throw std::invalid_argument("score_cam: unknown layer \"" + layer + "\"");
  }
  const int node = model.graph().require_node(layer);

  // Base forward to capture the activation block; no gradients anywhere.
  model.forward(to_tensor(image), /*training=*/false, /*keep_cache=*/false);
  const ActivationBlock acts = block_from_tensor(model.graph().node_output(node));

  std::vector<int> participating;
  std::vector<double> scores;
  for (int k = 0; k < acts.c; ++k) {
    double lo = acts.at(0, 0, k), hi = lo;
    for (int y = 0; y < acts.h; ++y) {
      for (int x = 0; x < acts.w; ++x) {
        lo = std::min(lo, acts.at(y, x, k));
        hi = std::max(hi, acts.at(y, x, k));
      }
    }
    if (hi <= lo) continue;  // constant channel does not participate

    // Upsample first, then min-max normalize (same finishing as the heatmaps).
    PlaneF channel(acts.h, acts.w);
    for (int y = 0; y < acts.h; ++y)
      for (int x = 0; x < acts.w; ++x) channel.at(y, x) = acts.at(y, x, k);
    const PlaneF mask = upsample_normalize(channel, image.height, image.width);

    ImageTensor masked = image;
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x)
        for (int ch = 0; ch < 3; ++ch) masked.at(y, x, ch) *= mask.at(y, x);

    const nn::Tensor logits = model.forward(to_tensor(masked), false, false);
    participating.push_back(k);
    scores.push_back(logits.at(0, 0, 0, class_index));
  }

  Heatmap hm;
  hm.method = "scorecam";
  hm.layer = layer;
  hm.class_index = class_index;
  if (participating.empty()) {
    std::cerr << "[leafscope] warning: score_cam found no varying channels on layer "
              << layer << "; emitting an all-zero heatmap\n";
    hm.values = PlaneF(image.height, image.width);
    if (stats) *stats = {};
    return hm;
  }

  // Softmax over participating channel scores.
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  std::vector<double> weights(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    weights[i] = std::exp(scores[i] - mx);
    sum += weights[i];
  }
  for (auto& w : weights) w /= sum;

  PlaneF raw(acts.h, acts.w);
  for (int y = 0; y < acts.h; ++y) {
    for (int x = 0; x < acts.w; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < participating.size(); ++i) {
        s += weights[i] * acts.at(y, x, participating[i]);
      }
      raw.at(y, x) = s > 0 ? s : 0.0;
    }
  }
  hm.values = upsample_normalize(raw, image.height, image.width);
  if (stats) {
    stats->participating_channels = static_cast<int>(participating.size());
    stats->weights = weights;
  }
  return hm;
}

void colormap_bluered(double t, double* r, double* g, double* b) {
  t = std::clamp(t, 0.0, 1.0);
  struct Stop {
    double t, r, g, b;
  };
  static const Stop stops[] = {
      {0.00, 0.0, 0.0, 1.0},  // blue
      {0.25, 0.0, 1.0, 1.0},  // cyan
      {0.50, 0.0, 1.0, 0.0},  // green
      {0.75, 1.0, 1.0, 0.0},  // yellow
      {1.00, 1.0, 0.0, 0.0},  // red
  };
  for (std::size_t i = 1; i < std::size(stops); ++i) {
    if (t <= stops[i].t) {
      const double u = (t - stops[i - 1].t) / (stops[i].t - stops[i - 1].t);
      *r = stops[i - 1].r + u * (stops[i].r - stops[i - 1].r);
      *g = stops[i - 1].g + u * (stops[i].g - stops[i - 1].g);
      *b = stops[i - 1].b + u * (stops[i].b - stops[i - 1].b);
      return;
    }
  }
  *r = stops[std::size(stops) - 1].r;
  *g = stops[std::size(stops) - 1].g;
  *b = stops[std::size(stops) - 1].b;
}

ImageTensor overlay(const ImageTensor& image, const Heatmap& heatmap, double alpha,
                    const std::string& colormap) {
  if (heatmap.values.height != image.height || heatmap.values.width != image.width) {
    throw std::invalid_argument("overlay: heatmap size does not match image");
  }
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("overlay: alpha must be in [0,1]");
  }
  if (colormap != "bluered") {
    throw std::invalid_argument("overlay: unknown colormap \"" + colormap + "\"");
  }
  ImageTensor out(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      double r, g, b;
      colormap_bluered(heatmap.values.at(y, x), &r, &g, &b);
      out.at(y, x, 0) = (1 - alpha) * image.at(y, x, 0) + alpha * r;
      out.at(y, x, 1) = (1 - alpha) * image.at(y, x, 1) + alpha * g;
      out.at(y, x, 2) = (1 - alpha) * image.at(y, x, 2) + alpha * b;
    }
  }
  clamp01(out);
  return out;
}

ExplainResult explain(ModelHandle& model, const ImageTensor& image,
                      const ExplainRequest& request) {
  if (request.methods.empty()) {
    throw std::invalid_argument("explain: no methods requested");
  }
  for (const auto& m : request.methods) {
    if (m != "gradcam" && m != "gradcampp" && m != "scorecam" && m != "layercam") {
      throw std::invalid_argument("explain: unknown method \"" + m + "\"");
    }
  }

  ExplainResult result;
  result.layer_used = request.layer.value_or(model.spec().default_cam_layer);

  const nn::Tensor logits = model.forward(to_tensor(image));
  const nn::Tensor probs = nn::softmax(logits);
  result.softmax.resize(static_cast<std::size_t>(probs.c));
  int argmax = 0;
  for (int ic = 0; ic < probs.c; ++ic) {
    result.softmax[static_cast<std::size_t>(ic)] = probs.at(0, 0, 0, ic);
    if (probs.at(0, 0, 0, ic) > probs.at(0, 0, 0, argmax)) argmax = ic;
  }
  result.predicted_class = argmax;
  result.class_used = request.class_index.value_or(argmax);
  if (result.class_used < 0 || result.class_used >= model.num_classes()) {
    throw std::invalid_argument("explain: class index out of range");
  }

  const bool needs_gradients =
      std::any_of(request.methods.begin(), request.methods.end(),
                  [](const std::string& m) { return m != "scorecam"; });
  ActivationBlock acts;
  GradientBlock grads;
  std::string tap_error;
  if (needs_gradients) {
    try {
      TapResult tap =
          model.forward_with_taps(to_tensor(image), {result.layer_used}, result.class_used);
      acts = block_from_tensor(tap.activations.at(result.layer_used));
      grads = block_from_tensor(tap.gradients.at(result.layer_used));
    } catch (const std::exception& ex) {
      tap_error = ex.what();
    }
  }

  for (const auto& method : request.methods) {
    try {
      Heatmap hm;
      if (method == "scorecam") {
        hm = score_cam(model, image, result.layer_used, result.class_used);
      } else {
        if (!tap_error.empty()) throw std::runtime_error(tap_error);
        if (method == "gradcam") {
          hm = grad_cam(acts, grads, image.height, image.width);
        } else if (method == "gradcampp") {
          hm = grad_cam_pp(acts, grads, image.height, image.width);
        } else {
          hm = layer_cam(acts, grads, image.height, image.width);
        }
      }
      hm.layer = result.layer_used;
      hm.class_index = result.class_used;
      result.heatmaps[method] = std::move(hm);
    } catch (const std::exception& ex) {
      result.failures[method] = ex.what();
      std::cerr << "[leafscope] " << method << " failed: " << ex.what() << "\n";
    }
  }
  return result;
}

ExplainResult explain_to_files(ModelHandle& model, const ImageTensor& image,
                               const ExplainRequest& request,
                               const std::filesystem::path& out_dir,
                               const std::vector<std::string>& class_labels) {
  ExplainResult result = explain(model, image, request);
  std::filesystem::create_directories(out_dir);
  for (const auto& [method, hm] : result.heatmaps) {
    save_png_gray(out_dir / ("heatmap_" + method + ".png"), hm.values);
    save_png_rgb(out_dir / ("overlay_" + method + ".png"),
                 overlay(image, hm, request.overlay_alpha));
  }
  nlohmann::ordered_json j;
  const std::size_t pred = static_cast<std::size_t>(result.predicted_class);
  j["predicted_label"] = pred < class_labels.size() ? class_labels[pred]
                                                    : "class_" + std::to_string(pred);
  j["softmax"] = result.softmax;
  j["class_used"] = result.class_used;
  j["layer_used"] = result.layer_used;
  if (!result.failures.empty()) {
    nlohmann::ordered_json fails;
    for (const auto& [m, err] : result.failures) fails[m] = err;
    j["failures"] = std::move(fails);
  }
  std::ofstream out(out_dir / "prediction.json", std::ios::binary);
  if (!out) {
    throw std::runtime_error("explain: cannot write prediction.json under " +
                             out_dir.string());
  }
  out << j.dump(2) + "\n";
  return result;
}

}  // namespace leafscope
