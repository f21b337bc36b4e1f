#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "leafscope/nn/graph.hpp"

namespace leafscope {

// The seven transfer-learning architectures plus the tiny trainable CNN used
// for smoke tests and CI-sized runs.
std::vector<std::string> backbone_names();
// Canonical name for a (case-insensitive) architecture string, if known.
std::optional<std::string> canonical_backbone_name(const std::string& name);
int default_input_side(const std::string& canonical_name);

struct BackboneSpec {
  std::string name;
  int input_side = 0;             // 0 = per-architecture default
  std::string default_cam_layer;  // filled in by build_model when empty
  bool pretrained = false;
};

struct TapResult {
  nn::Tensor logits;  // B x 1 x 1 x num_classes, identical to plain forward
  std::map<std::string, nn::Tensor> activations;
  std::map<std::string, nn::Tensor> gradients;  // d(sum_b logit[b][class])/d(act)
};

// A built backbone with its 5-way head, exposed layer registry, and
// forward/backward counters (Score-CAM's gradient-freedom is asserted
// against these). Move-only; exclusive to one caller during a pass.
class ModelHandle {
 public:
  ModelHandle(BackboneSpec spec, int num_classes, nn::Graph graph);
  ModelHandle(ModelHandle&&) = default;
  ModelHandle& operator=(ModelHandle&&) = default;

  const BackboneSpec& spec() const { return spec_; }
  int num_classes() const { return num_classes_; }
  nn::Graph& graph() { return graph_; }

  // Pre-softmax logits. Throws on a batch whose spatial side or channel
  // count does not match spec().input_side / 3 channels.
  nn::Tensor forward(const nn::Tensor& batch, bool training = false,
                     bool keep_cache = false);

  // Forward + one backward of the selected class logit (summed over the
  // batch) through the tapped layers. Eval mode.
  TapResult forward_with_taps(const nn::Tensor& batch,
                              const std::vector<std::string>& layers,
                              int class_index);

  std::vector<std::string> tap_layer_names() const { return tap_layers_; }
  bool is_tap_layer(const std::string& name) const;

  long forward_passes() const { return forward_passes_; }
  long backward_passes() const { return backward_passes_; }
  void reset_counters() { forward_passes_ = backward_passes_ = 0; }

  // Value snapshot/restore of every parameter (best-epoch checkpointing).
  std::vector<std::pair<std::string, nn::Tensor>> snapshot_params();
  void restore_params(const std::vector<std::pair<std::string, nn::Tensor>>& snap);

  void register_tap_layers(std::vector<std::string> names) {
    tap_layers_ = std::move(names);
  }

 private:
  BackboneSpec spec_;
  int num_classes_ = 0;
  nn::Graph graph_;
  std::vector<std::string> tap_layers_;
  long forward_passes_ = 0;
  long backward_passes_ = 0;
};

// Builds the named architecture with ImageNet-style topology and a freshly
// initialized num_classes-way linear head; all layers trainable.
// pretrained=true loads backbone weights from $LEAFSCOPE_WEIGHTS_DIR/<name>.weights
// and throws when the file (or the variable) is missing.
ModelHandle build_model(const BackboneSpec& spec, int num_classes,
                        std::uint64_t init_seed = 0);

// Parameter container I/O (shared by checkpoints and the weight cache).
// backbone_only skips "head/..." parameters.
void save_params(ModelHandle& model, const std::filesystem::path& path,
                 bool backbone_only = false);
// Strict: every stored parameter must exist with matching shape. Returns the
// number of parameters loaded.
std::size_t load_params(ModelHandle& model, const std::filesystem::path& path);

struct CheckpointMeta {
  std::string architecture;
  int num_classes = 0;
  int input_side = 0;
  int epoch = 0;
  double val_accuracy = 0.0;
};

// best.ckpt: self-describing binary (architecture + shapes + values).
void save_checkpoint(ModelHandle& model, const std::filesystem::path& path);
ModelHandle load_checkpoint(const std::filesystem::path& path);

std::string checkpoint_meta_to_json(const CheckpointMeta& meta);
CheckpointMeta checkpoint_meta_from_json(const std::string& text);
void write_checkpoint_meta(const CheckpointMeta& meta, const std::filesystem::path& path);
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

}  // namespace leafscope
