#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "leafscope/backbones.hpp"

// Graph builders for the eight registered architectures. Shapes follow the
// published topologies (bottleneck ResNets, 32-growth DenseNets, Xception
// entry/middle/exit flow, InceptionResNetV2 stem + 35/17/8 blocks); SAME
// padding uses the TF convention so stride-2 stages downsample by ceil().

namespace leafscope {

namespace {

using nn::Padding;

struct Builder {
  nn::Graph g;
  std::vector<std::string> taps;

  int conv(const std::string& name, int in, int in_c, int out_c, int kh, int kw,
           int stride, Padding pad, bool bias) {
    return g.add(std::make_unique<nn::Conv2D>(name, in_c, out_c, kh, kw, stride, pad, bias),
                 {in});
  }
  int bn(const std::string& name, int in, int c) {
    return g.add(std::make_unique<nn::BatchNorm>(name, c), {in});
  }
  int relu(const std::string& name, int in) {
    return g.add(std::make_unique<nn::ReLU>(name), {in});
  }
  int maxpool(const std::string& name, int in, int k, int stride, Padding pad) {
    return g.add(std::make_unique<nn::MaxPool>(name, k, k, stride, pad), {in});
  }
  int avgpool(const std::string& name, int in, int k, int stride, Padding pad) {
    return g.add(std::make_unique<nn::AvgPool>(name, k, k, stride, pad), {in});
  }
  int add2(const std::string& name, int a, int b, nn::Scalar cb = 1) {
    return g.add(std::make_unique<nn::Add>(name, std::vector<nn::Scalar>{1, cb}), {a, b});
  }
  int concat(const std::string& name, std::vector<int> ins) {
    const std::size_t arity = ins.size();
    return g.add(std::make_unique<nn::Concat>(name, arity), std::move(ins));
  }
  // conv (no bias) + BN + optional ReLU, the transfer-net workhorse.
  int cbr(const std::string& prefix, int in, int in_c, int out_c, int kh, int kw,
          int stride, Padding pad, bool with_relu = true) {
    int x = conv(prefix + "_conv", in, in_c, out_c, kh, kw, stride, pad, false);
    x = bn(prefix + "_bn", x, out_c);
    if (with_relu) x = relu(prefix + "_relu", x);
    return x;
  }
  void tap(const std::string& alias, int node) {
    g.alias(alias, node);
    taps.push_back(alias);
  }
  void finish_head(int features, int channels, int num_classes) {
    int x = g.add(std::make_unique<nn::GlobalAvgPool>("avg_pool"), {features});
    g.add(std::make_unique<nn::Dense>("head", channels, num_classes), {x});
  }
};

// ---- ToyCNN: 2 conv + GAP + linear, ~1.2k parameters ---------------------------

void build_toycnn(Builder& b, int num_classes) {
  const int input = b.g.add_input("input");
  int x = b.conv("conv1", input, 3, 8, 3, 3, 1, Padding::Same, true);
  x = b.relu("conv1_relu", x);
  b.tap("conv1", x);
  x = b.maxpool("pool1", x, 2, 2, Padding::Same);
  x = b.conv("conv2", x, 8, 12, 3, 3, 1, Padding::Same, true);
  x = b.relu("conv2_relu", x);
  b.tap("features", x);
  b.finish_head(x, 12, num_classes);
}

// ---- ResNet50 / ResNet101 ------------------------------------------------------

void build_resnet(Builder& b, const std::vector<int>& blocks, int num_classes) {
  const int input = b.g.add_input("input");
  int x = b.conv("conv1_conv", input, 3, 64, 7, 7, 2, Padding::Same, false);
  x = b.bn("conv1_bn", x, 64);
  x = b.relu("conv1_relu", x);
  x = b.maxpool("pool1", x, 3, 2, Padding::Same);

  int in_c = 64;
  int planes = 64;
  for (std::size_t stage = 0; stage < blocks.size(); ++stage) {
    const std::string sname = "conv" + std::to_string(stage + 2);
    const int out_c = planes * 4;
    for (int j = 0; j < blocks[static_cast<std::size_t>(stage)]; ++j) {
      const std::string prefix = sname + "_block" + std::to_string(j + 1);
      const int stride = (j == 0 && stage > 0) ? 2 : 1;
      int shortcut = x;
      if (j == 0) {
        shortcut = b.conv(prefix + "_0_conv", x, in_c, out_c, 1, 1, stride,
                          Padding::Same, false);
        shortcut = b.bn(prefix + "_0_bn", shortcut, out_c);
      }
      int y = b.cbr(prefix + "_1", x, in_c, planes, 1, 1, stride, Padding::Same);
      y = b.cbr(prefix + "_2", y, planes, planes, 3, 3, 1, Padding::Same);
      y = b.conv(prefix + "_3_conv", y, planes, out_c, 1, 1, 1, Padding::Same, false);
      y = b.bn(prefix + "_3_bn", y, out_c);
      x = b.add2(prefix + "_add", shortcut, y);
      x = b.relu(prefix + "_out", x);
      in_c = out_c;
    }
    b.tap(sname + "_out", x);
    planes *= 2;
  }
  b.tap("features", x);
  b.finish_head(x, in_c, num_classes);
}

// ---- DenseNet121 / 169 / 201 -----------------------------------------------------

void build_densenet(Builder& b, const std::vector<int>& blocks, int num_classes) {
  constexpr int growth = 32;
  const int input = b.g.add_input("input");
  int x = b.conv("conv1_conv", input, 3, 64, 7, 7, 2, Padding::Same, false);
  x = b.bn("conv1_bn", x, 64);
  x = b.relu("conv1_relu", x);
  x = b.maxpool("pool1", x, 3, 2, Padding::Same);

  int channels = 64;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const std::string bname = "conv" + std::to_string(bi + 2);
    for (int li = 0; li < blocks[bi]; ++li) {
      const std::string prefix = bname + "_block" + std::to_string(li + 1);
      int y = b.bn(prefix + "_0_bn", x, channels);
      y = b.relu(prefix + "_0_relu", y);
      y = b.conv(prefix + "_1_conv", y, channels, 4 * growth, 1, 1, 1, Padding::Same,
                 false);
      y = b.bn(prefix + "_1_bn", y, 4 * growth);
      y = b.relu(prefix + "_1_relu", y);
      y = b.conv(prefix + "_2_conv", y, 4 * growth, growth, 3, 3, 1, Padding::Same,
                 false);
      x = b.concat(prefix + "_concat", {x, y});
      channels += growth;
    }
    if (bi + 1 < blocks.size()) {
      const std::string tname = "pool" + std::to_string(bi + 2);
      x = b.bn(tname + "_bn", x, channels);
      x = b.relu(tname + "_relu", x);
      b.tap("block" + std::to_string(bi + 1) + "_out", x);
      channels /= 2;
      x = b.conv(tname + "_conv", x, channels * 2, channels, 1, 1, 1, Padding::Same,
                 false);
      x = b.avgpool(tname + "_pool", x, 2, 2, Padding::Valid);
    }
  }
  x = b.bn("final_bn", x, channels);
  x = b.relu("final_relu", x);
  b.tap("block4_out", x);
  b.tap("features", x);
  b.finish_head(x, channels, num_classes);
}

// ---- Xception ----------------------------------------------------------------------

void build_xception(Builder& b, int num_classes) {
  // depthwise 3x3 + pointwise 1x1 + BN
  auto sepconv_bn = [&](const std::string& prefix, int in, int in_c, int out_c) {
    int x = b.g.add(
        std::make_unique<nn::DepthwiseConv2D>(prefix + "_dw", in_c, 3, 3, 1,
                                              Padding::Same, false),
        {in});
    x = b.conv(prefix + "_pw", x, in_c, out_c, 1, 1, 1, Padding::Same, false);
    return b.bn(prefix + "_bn", x, out_c);
  };

  const int input = b.g.add_input("input");
  int x = b.cbr("block1_conv1", input, 3, 32, 3, 3, 2, Padding::Valid);
  x = b.cbr("block1_conv2", x, 32, 64, 3, 3, 1, Padding::Valid);
  int channels = 64;

  // Entry-flow blocks 2-4; the first has no leading relu.
  const int entry_filters[3] = {128, 256, 728};
  for (int blk = 0; blk < 3; ++blk) {
    const std::string prefix = "block" + std::to_string(blk + 2);
    const int f = entry_filters[blk];
    int res = b.conv(prefix + "_res_conv", x, channels, f, 1, 1, 2, Padding::Same,
                     false);
    res = b.bn(prefix + "_res_bn", res, f);
    int y = x;
    if (blk > 0) y = b.relu(prefix + "_sepconv1_act", y);
    y = sepconv_bn(prefix + "_sepconv1", y, channels, f);
    y = b.relu(prefix + "_sepconv2_act", y);
    y = sepconv_bn(prefix + "_sepconv2", y, f, f);
    y = b.maxpool(prefix + "_pool", y, 3, 2, Padding::Same);
    x = b.add2(prefix + "_add", res, y);
    channels = f;
  }
  b.tap("entry_out", x);

  // Middle flow: 8 blocks of 3 sepconvs at 728.
  for (int blk = 0; blk < 8; ++blk) {
    const std::string prefix = "block" + std::to_string(blk + 5);
    int y = x;
    for (int i = 1; i <= 3; ++i) {
      y = b.relu(prefix + "_sepconv" + std::to_string(i) + "_act", y);
      y = sepconv_bn(prefix + "_sepconv" + std::to_string(i), y, 728, 728);
    }
    x = b.add2(prefix + "_add", x, y);
  }
  b.tap("middle_out", x);

  // Exit flow.
  {
    int res = b.conv("block13_res_conv", x, 728, 1024, 1, 1, 2, Padding::Same, false);
    res = b.bn("block13_res_bn", res, 1024);
    int y = b.relu("block13_sepconv1_act", x);
    y = sepconv_bn("block13_sepconv1", y, 728, 728);
    y = b.relu("block13_sepconv2_act", y);
    y = sepconv_bn("block13_sepconv2", y, 728, 1024);
    y = b.maxpool("block13_pool", y, 3, 2, Padding::Same);
    x = b.add2("block13_add", res, y);
  }
  x = sepconv_bn("block14_sepconv1", x, 1024, 1536);
  x = b.relu("block14_sepconv1_act", x);
  x = sepconv_bn("block14_sepconv2", x, 1536, 2048);
  x = b.relu("block14_sepconv2_act", x);
  b.tap("features", x);
  b.finish_head(x, 2048, num_classes);
}

// ---- InceptionResNetV2 ----------------------------------------------------------------

void build_inception_resnet_v2(Builder& b, int num_classes) {
  const int input = b.g.add_input("input");
  int x = b.cbr("stem_conv1", input, 3, 32, 3, 3, 2, Padding::Valid);
  x = b.cbr("stem_conv2", x, 32, 32, 3, 3, 1, Padding::Valid);
  x = b.cbr("stem_conv3", x, 32, 64, 3, 3, 1, Padding::Same);
  x = b.maxpool("stem_pool1", x, 3, 2, Padding::Valid);
  x = b.cbr("stem_conv4", x, 64, 80, 1, 1, 1, Padding::Valid);
  x = b.cbr("stem_conv5", x, 80, 192, 3, 3, 1, Padding::Valid);
  x = b.maxpool("stem_pool2", x, 3, 2, Padding::Valid);

  // mixed_5b
  {
    int b0 = b.cbr("mixed5b_b0", x, 192, 96, 1, 1, 1, Padding::Same);
    int b1 = b.cbr("mixed5b_b1_1", x, 192, 48, 1, 1, 1, Padding::Same);
    b1 = b.cbr("mixed5b_b1_2", b1, 48, 64, 5, 5, 1, Padding::Same);
    int b2 = b.cbr("mixed5b_b2_1", x, 192, 64, 1, 1, 1, Padding::Same);
    b2 = b.cbr("mixed5b_b2_2", b2, 64, 96, 3, 3, 1, Padding::Same);
    b2 = b.cbr("mixed5b_b2_3", b2, 96, 96, 3, 3, 1, Padding::Same);
    int bp = b.avgpool("mixed5b_pool", x, 3, 1, Padding::Same);
    bp = b.cbr("mixed5b_b3", bp, 192, 64, 1, 1, 1, Padding::Same);
    x = b.concat("mixed_5b", {b0, b1, b2, bp});  // 320
  }
  b.tap("mixed_5b", x);

  // 10 x block35, scale 0.17
  for (int i = 1; i <= 10; ++i) {
    const std::string p = "block35_" + std::to_string(i);
    int b0 = b.cbr(p + "_b0", x, 320, 32, 1, 1, 1, Padding::Same);
    int b1 = b.cbr(p + "_b1_1", x, 320, 32, 1, 1, 1, Padding::Same);
    b1 = b.cbr(p + "_b1_2", b1, 32, 32, 3, 3, 1, Padding::Same);
    int b2 = b.cbr(p + "_b2_1", x, 320, 32, 1, 1, 1, Padding::Same);
    b2 = b.cbr(p + "_b2_2", b2, 32, 48, 3, 3, 1, Padding::Same);
    b2 = b.cbr(p + "_b2_3", b2, 48, 64, 3, 3, 1, Padding::Same);
    int mixed = b.concat(p + "_mixed", {b0, b1, b2});  // 128
    int up = b.conv(p + "_up", mixed, 128, 320, 1, 1, 1, Padding::Same, true);
    x = b.add2(p + "_add", x, up, 0.17);
    x = b.relu(p + "_out", x);
  }

  // mixed_6a reduction
  {
    int b0 = b.cbr("mixed6a_b0", x, 320, 384, 3, 3, 2, Padding::Valid);
    int b1 = b.cbr("mixed6a_b1_1", x, 320, 256, 1, 1, 1, Padding::Same);
    b1 = b.cbr("mixed6a_b1_2", b1, 256, 256, 3, 3, 1, Padding::Same);
    b1 = b.cbr("mixed6a_b1_3", b1, 256, 384, 3, 3, 2, Padding::Valid);
    int b2 = b.maxpool("mixed6a_pool", x, 3, 2, Padding::Valid);
    x = b.concat("mixed_6a", {b0, b1, b2});  // 1088
  }
  b.tap("mixed_6a", x);

  // 20 x block17, scale 0.10
  for (int i = 1; i <= 20; ++i) {
    const std::string p = "block17_" + std::to_string(i);
    int b0 = b.cbr(p + "_b0", x, 1088, 192, 1, 1, 1, Padding::Same);
    int b1 = b.cbr(p + "_b1_1", x, 1088, 128, 1, 1, 1, Padding::Same);
    b1 = b.cbr(p + "_b1_2", b1, 128, 160, 1, 7, 1, Padding::Same);
    b1 = b.cbr(p + "_b1_3", b1, 160, 192, 7, 1, 1, Padding::Same);
    int mixed = b.concat(p + "_mixed", {b0, b1});  // 384
    int up = b.conv(p + "_up", mixed, 384, 1088, 1, 1, 1, Padding::Same, true);
    x = b.add2(p + "_add", x, up, 0.10);
    x = b.relu(p + "_out", x);
  }

  // mixed_7a reduction
  {
    int b0 = b.cbr("mixed7a_b0_1", x, 1088, 256, 1, 1, 1, Padding::Same);
    b0 = b.cbr("mixed7a_b0_2", b0, 256, 384, 3, 3, 2, Padding::Valid);
    int b1 = b.cbr("mixed7a_b1_1", x, 1088, 256, 1, 1, 1, Padding::Same);
    b1 = b.cbr("mixed7a_b1_2", b1, 256, 288, 3, 3, 2, Padding::Valid);
    int b2 = b.cbr("mixed7a_b2_1", x, 1088, 256, 1, 1, 1, Padding::Same);
    b2 = b.cbr("mixed7a_b2_2", b2, 256, 288, 3, 3, 1, Padding::Same);
    b2 = b.cbr("mixed7a_b2_3", b2, 288, 320, 3, 3, 2, Padding::Valid);
    int b3 = b.maxpool("mixed7a_pool", x, 3, 2, Padding::Valid);
    x = b.concat("mixed_7a", {b0, b1, b2, b3});  // 384+288+320+1088 = 2080
  }
  b.tap("mixed_7a", x);

  // 10 x block8, scale 0.20; the last block is unscaled with no relu.
  for (int i = 1; i <= 10; ++i) {
    const std::string p = "block8_" + std::to_string(i);
    int b0 = b.cbr(p + "_b0", x, 2080, 192, 1, 1, 1, Padding::Same);
    int b1 = b.cbr(p + "_b1_1", x, 2080, 192, 1, 1, 1, Padding::Same);
    b1 = b.cbr(p + "_b1_2", b1, 192, 224, 1, 3, 1, Padding::Same);
    b1 = b.cbr(p + "_b1_3", b1, 224, 256, 3, 1, 1, Padding::Same);
    int mixed = b.concat(p + "_mixed", {b0, b1});  // 448
    int up = b.conv(p + "_up", mixed, 448, 2080, 1, 1, 1, Padding::Same, true);
    const bool last = i == 10;
    x = b.add2(p + "_add", x, up, last ? 1.0 : 0.20);
    if (!last) x = b.relu(p + "_out", x);
  }

  x = b.cbr("conv_7b", x, 2080, 1536, 1, 1, 1, Padding::Same);
  b.tap("features", x);
  b.finish_head(x, 1536, num_classes);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

ModelHandle build_model(const BackboneSpec& spec, int num_classes,
                        std::uint64_t init_seed) {
  const auto canonical = canonical_backbone_name(spec.name);
  if (!canonical) {
    throw std::invalid_argument("build_model: unknown architecture \"" + spec.name +
                                "\"");
  }
  if (num_classes < 2) {
    throw std::invalid_argument("build_model: num_classes must be >= 2");
  }

  BackboneSpec resolved = spec;
  resolved.name = *canonical;
  if (resolved.input_side <= 0) resolved.input_side = default_input_side(*canonical);

  Builder b;
  if (*canonical == "ToyCNN") {
    build_toycnn(b, num_classes);
  } else if (*canonical == "ResNet50") {
    build_resnet(b, {3, 4, 6, 3}, num_classes);
  } else if (*canonical == "ResNet101") {
    build_resnet(b, {3, 4, 23, 3}, num_classes);
  } else if (*canonical == "DenseNet121") {
    build_densenet(b, {6, 12, 24, 16}, num_classes);
  } else if (*canonical == "DenseNet169") {
    build_densenet(b, {6, 12, 32, 32}, num_classes);
  } else if (*canonical == "DenseNet201") {
    build_densenet(b, {6, 12, 48, 32}, num_classes);
  } else if (*canonical == "Xception") {
    build_xception(b, num_classes);
  } else if (*canonical == "InceptionResNetV2") {
    build_inception_resnet_v2(b, num_classes);
  }

  if (resolved.default_cam_layer.empty()) resolved.default_cam_layer = "features";

  Rng rng = Rng::from_words({init_seed, fnv1a(*canonical)});
  b.g.init_params(rng);

  ModelHandle model(resolved, num_classes, std::move(b.g));
  model.register_tap_layers(b.taps);

  if (resolved.pretrained) {
    const char* dir = std::getenv("LEAFSCOPE_WEIGHTS_DIR");
    if (!dir || !*dir) {
      throw std::runtime_error(
          "build_model: pretrained weights requested but LEAFSCOPE_WEIGHTS_DIR is "
          "not set");
    }
    const std::filesystem::path file =
        std::filesystem::path(dir) / (*canonical + ".weights");
    if (!std::filesystem::exists(file)) {
      throw std::runtime_error("build_model: missing pretrained weights: " +
                               file.string());
    }
    load_params(model, file);
  }
  return model;
}

}  // namespace leafscope
