#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "leafscope/nn/layers.hpp"

namespace leafscope::nn {

// A DAG of layers in topological (insertion) order, node 0 being the input.
// Keeps every node output after forward so activations can be tapped and
// gradients propagated to any node.
class Graph {
 public:
  int add_input(const std::string& name);
  // `inputs` are node ids already in the graph.
  int add(std::unique_ptr<Layer> layer, std::vector<int> inputs);
  // Extra registry name for a node (tap points, "features", ...).
  void alias(const std::string& name, int node);

  const Tensor& forward(const Tensor& input, bool training, bool keep_cache);
  // Replace `node`'s output and recompute everything downstream (used by the
  // finite-difference oracle). Eval mode only.
  void forward_from(int node, Tensor replacement);
  // Backprop from the final node; seed is dL/d(final output). Accumulates
  // parameter grads and per-node output grads.
  void backward(Tensor seed);

  const Tensor& output() const;
  const Tensor& node_output(int node) const;
  const Tensor& node_grad(int node) const;

  int find(const std::string& name) const;  // -1 when absent
  int require_node(const std::string& name) const;
  std::vector<std::string> registry_names() const;
  int node_count() const { return static_cast<int>(nodes_.size()); }

  // "layer_name/param_name" -> param, in insertion order.
  std::vector<std::pair<std::string, Param*>> named_params();
  void init_params(Rng& rng);
  void zero_grads();

 private:
  struct Node {
    std::unique_ptr<Layer> layer;
    std::vector<int> inputs;
    Tensor out;
    Tensor grad;
    bool has_grad = false;
  };

  void run_node(std::size_t i, bool training, bool keep_cache);

  std::vector<Node> nodes_;
  std::map<std::string, int> registry_;
  bool forwarded_ = false;
};

}  // namespace leafscope::nn
