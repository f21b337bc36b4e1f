#include "leafscope/backbones.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace leafscope {

std::vector<std::string> backbone_names() {
  return {"DenseNet201", "DenseNet121", "DenseNet169",        "Xception",
          "ResNet50",    "ResNet101",   "InceptionResNetV2",  "ToyCNN"};
}

std::optional<std::string> canonical_backbone_name(const std::string& name) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  const std::string key = lower(name);
  for (const auto& canonical : backbone_names()) {
    if (key == lower(canonical)) return canonical;
  }
  return std::nullopt;
}

int default_input_side(const std::string& canonical_name) {
  return canonical_name == "ToyCNN" ? 64 : 299;
}

ModelHandle::ModelHandle(BackboneSpec spec, int num_classes, nn::Graph graph)
    : spec_(std::move(spec)), num_classes_(num_classes), graph_(std::move(graph)) {}

bool ModelHandle::is_tap_layer(const std::string& name) const {
  return std::find(tap_layers_.begin(), tap_layers_.end(), name) != tap_layers_.end();
}

nn::Tensor ModelHandle::forward(const nn::Tensor& batch, bool training,
                                bool keep_cache) {
  if (batch.c != 3) {
    throw std::invalid_argument("forward: expected 3-channel input, got " +
                                batch.shape_str());
  }
  if (spec_.input_side > 0 &&
      (batch.h != spec_.input_side || batch.w != spec_.input_side)) {
    throw std::invalid_argument("forward: batch side " + batch.shape_str() +
                                " does not match input_side " +
                                std::to_string(spec_.input_side));
  }
  ++forward_passes_;
  return graph_.forward(batch, training, keep_cache);
}

TapResult ModelHandle::forward_with_taps(const nn::Tensor& batch,
                                         const std::vector<std::string>& layers,
                                         int class_index) {
  if (class_index < 0 || class_index >= num_classes_) {
    throw std::invalid_argument("forward_with_taps: class index out of range");
  }
  std::vector<int> nodes;
  for (const auto& name : layers) {
    if (!is_tap_layer(name)) {
      throw std::invalid_argument("forward_with_taps: unknown tap layer \"" + name +
                                  "\"");
    }
    nodes.push_back(graph_.require_node(name));
  }

  TapResult result;
  result.logits = forward(batch, /*training=*/false, /*keep_cache=*/true);

  for (std::size_t k = 0; k < layers.size(); ++k) {
    const nn::Tensor& act = graph_.node_output(nodes[k]);
    if (act.h == 1 && act.w == 1) {
      throw std::invalid_argument("forward_with_taps: layer \"" + layers[k] +
                                  "\" has no spatial extent to explain");
    }
    result.activations[layers[k]] = act;
  }

  // d(sum_b logits[b][class]) / d(logits) is one-hot per row.
  nn::Tensor seed(result.logits.n, 1, 1, result.logits.c);
  for (int b = 0; b < seed.n; ++b) seed.at(b, 0, 0, class_index) = 1;
  graph_.zero_grads();
  graph_.backward(std::move(seed));
  ++backward_passes_;

  for (std::size_t k = 0; k < layers.size(); ++k) {
    result.gradients[layers[k]] = graph_.node_grad(nodes[k]);
  }
  return result;
}

std::vector<std::pair<std::string, nn::Tensor>> ModelHandle::snapshot_params() {
  std::vector<std::pair<std::string, nn::Tensor>> snap;
  for (auto& [name, p] : graph_.named_params()) snap.emplace_back(name, p->value);
  return snap;
}

void ModelHandle::restore_params(
    const std::vector<std::pair<std::string, nn::Tensor>>& snap) {
  auto params = graph_.named_params();
  if (params.size() != snap.size()) {
    throw std::invalid_argument("restore_params: parameter count mismatch");
  }
  for (std::size_t i = 0; i < snap.size(); ++i) {
    if (params[i].first != snap[i].first ||
        !params[i].second->value.same_shape(snap[i].second)) {
      throw std::invalid_argument("restore_params: mismatch at " + snap[i].first);
    }
    params[i].second->value = snap[i].second;
  }
}

// ---- parameter container I/O -------------------------------------------------

namespace {

constexpr char kMagic[8] = {'L', 'F', 'S', 'C', 'P', 'A', 'R', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i32(std::ostream& out, std::int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::int32_t read_i32(std::istream& in) {
  std::int32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::string read_string(std::istream& in) {
  const std::uint32_t len = read_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

void write_container(std::ostream& out, const std::string& architecture,
                     int num_classes, int input_side,
                     const std::vector<std::pair<std::string, nn::Param*>>& params,
                     bool backbone_only) {
  out.write(kMagic, sizeof(kMagic));
  write_string(out, architecture);
  write_i32(out, num_classes);
  write_i32(out, input_side);
  std::vector<const std::pair<std::string, nn::Param*>*> kept;
  for (const auto& entry : params) {
    if (backbone_only && entry.first.rfind("head/", 0) == 0) continue;
    kept.push_back(&entry);
  }
  write_u64(out, kept.size());
  for (const auto* entry : kept) {
    const auto& [name, p] = *entry;
    write_string(out, name);
    write_i32(out, p->value.n);
    write_i32(out, p->value.h);
    write_i32(out, p->value.w);
    write_i32(out, p->value.c);
    out.write(reinterpret_cast<const char*>(p->value.data.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(nn::Scalar)));
  }
}

struct ContainerHeader {
  std::string architecture;
  int num_classes = 0;
  int input_side = 0;
  std::uint64_t param_count = 0;
};

ContainerHeader read_container_header(std::istream& in, const std::string& path) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("params: not a leafscope parameter file: " + path);
  }
  ContainerHeader h;
  h.architecture = read_string(in);
  h.num_classes = read_i32(in);
  h.input_side = read_i32(in);
  h.param_count = read_u64(in);
  return h;
}

std::size_t load_container_params(std::istream& in, std::uint64_t count,
                                  ModelHandle& model, const std::string& path) {
  auto params = model.graph().named_params();
  std::map<std::string, nn::Param*> by_name;
  for (auto& [name, p] : params) by_name[name] = p;

  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = read_string(in);
    const int n = read_i32(in), h = read_i32(in), w = read_i32(in), c = read_i32(in);
    const auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw std::runtime_error("params: " + path + " names unknown parameter " + name);
    }
    nn::Tensor& value = it->second->value;
    if (value.n != n || value.h != h || value.w != w || value.c != c) {
      throw std::runtime_error("params: shape mismatch for " + name + " in " + path);
    }
    in.read(reinterpret_cast<char*>(value.data.data()),
            static_cast<std::streamsize>(value.size() * sizeof(nn::Scalar)));
    if (!in) throw std::runtime_error("params: truncated file: " + path);
  }
  return static_cast<std::size_t>(count);
}

}  // namespace

void save_params(ModelHandle& model, const std::filesystem::path& path,
                 bool backbone_only) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("params: cannot write " + path.string());
  const auto params = model.graph().named_params();
  write_container(out, model.spec().name, model.num_classes(),
                  model.spec().input_side, params, backbone_only);
  if (!out) throw std::runtime_error("params: write failed: " + path.string());
}

std::size_t load_params(ModelHandle& model, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("params: cannot open " + path.string());
  const auto header = read_container_header(in, path.string());
  return load_container_params(in, header.param_count, model, path.string());
}

void save_checkpoint(ModelHandle& model, const std::filesystem::path& path) {
  save_params(model, path, /*backbone_only=*/false);
}

ModelHandle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  const auto header = read_container_header(in, path.string());
  BackboneSpec spec;
  spec.name = header.architecture;
  spec.input_side = header.input_side;
  spec.pretrained = false;
  ModelHandle model = build_model(spec, header.num_classes);
  load_container_params(in, header.param_count, model, path.string());
  return model;
}

std::string checkpoint_meta_to_json(const CheckpointMeta& meta) {
  nlohmann::ordered_json j;
  j["architecture"] = meta.architecture;
  j["num_classes"] = meta.num_classes;
  j["input_side"] = meta.input_side;
  j["epoch"] = meta.epoch;
  j["val_accuracy"] = meta.val_accuracy;
  return j.dump(2) + "\n";
}

CheckpointMeta checkpoint_meta_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CheckpointMeta meta;
  meta.architecture = j.at("architecture").get<std::string>();
  meta.num_classes = j.at("num_classes").get<int>();
  meta.input_side = j.at("input_side").get<int>();
  meta.epoch = j.at("epoch").get<int>();
  meta.val_accuracy = j.at("val_accuracy").get<double>();
  return meta;
}

void write_checkpoint_meta(const CheckpointMeta& meta,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out << checkpoint_meta_to_json(meta);
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_meta_from_json(ss.str());
}

}  // namespace leafscope
