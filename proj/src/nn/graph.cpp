#include "leafscope/nn/graph.hpp"

#include <stdexcept>

namespace leafscope::nn {

int Graph::add_input(const std::string& name) {
  if (!nodes_.empty()) throw std::logic_error("graph: input must be node 0");
  nodes_.push_back(Node{std::make_unique<InputLayer>(name), {}, {}, {}, false});
  registry_[name] = 0;
  return 0;
}

int Graph::add(std::unique_ptr<Layer> layer, std::vector<int> inputs) {
  const int id = static_cast<int>(nodes_.size());
  if (inputs.size() != layer->num_inputs()) {
    throw std::logic_error("graph: arity mismatch for " + layer->name());
  }
  for (int in : inputs) {
    if (in < 0 || in >= id) throw std::logic_error("graph: bad input id for " + layer->name());
  }
  const std::string name = layer->name();
  if (registry_.count(name)) throw std::logic_error("graph: duplicate layer name " + name);
  registry_[name] = id;
  nodes_.push_back(Node{std::move(layer), std::move(inputs), {}, {}, false});
  return id;
}

void Graph::alias(const std::string& name, int node) {
  if (node < 0 || node >= static_cast<int>(nodes_.size())) {
    throw std::logic_error("graph: alias to unknown node");
  }
  registry_[name] = node;
}

void Graph::run_node(std::size_t i, bool training, bool keep_cache) {
  Node& node = nodes_[i];
  std::vector<const Tensor*> ins;
  ins.reserve(node.inputs.size());
  for (int in : node.inputs) ins.push_back(&nodes_[static_cast<std::size_t>(in)].out);
  node.out = node.layer->forward(ins, training, keep_cache);
}

const Tensor& Graph::forward(const Tensor& input, bool training, bool keep_cache) {
  if (nodes_.empty()) throw std::logic_error("graph: empty");
  nodes_[0].out = input;
  for (std::size_t i = 1; i < nodes_.size(); ++i) run_node(i, training, keep_cache);
  forwarded_ = true;
  return nodes_.back().out;
}

void Graph::forward_from(int node, Tensor replacement) {
  if (!forwarded_) throw std::logic_error("graph: forward_from before forward");
  nodes_[static_cast<std::size_t>(node)].out = std::move(replacement);
  for (std::size_t i = static_cast<std::size_t>(node) + 1; i < nodes_.size(); ++i) {
    run_node(i, /*training=*/false, /*keep_cache=*/false);
  }
}

void Graph::backward(Tensor seed) {
  if (!forwarded_) throw std::logic_error("graph: backward before forward");
  for (auto& node : nodes_) {
    node.grad = Tensor();
    node.has_grad = false;
  }
  Node& last = nodes_.back();
  if (!seed.same_shape(last.out)) {
    throw std::invalid_argument("graph: seed gradient shape mismatch");
  }
  last.grad = std::move(seed);
  last.has_grad = true;

  for (std::size_t i = nodes_.size(); i-- > 1;) {
    Node& node = nodes_[i];
    if (!node.has_grad) continue;
    std::vector<const Tensor*> ins;
    ins.reserve(node.inputs.size());
    for (int in : node.inputs) ins.push_back(&nodes_[static_cast<std::size_t>(in)].out);
    std::vector<Tensor> input_grads = node.layer->backward(ins, node.out, node.grad);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      Node& src = nodes_[static_cast<std::size_t>(node.inputs[k])];
      if (!src.has_grad) {
        src.grad = std::move(input_grads[k]);
        src.has_grad = true;
      } else {
        src.grad.add_scaled(input_grads[k], Scalar(1));
      }
    }
  }
}

const Tensor& Graph::output() const {
  if (!forwarded_) throw std::logic_error("graph: no forward yet");
  return nodes_.back().out;
}

const Tensor& Graph::node_output(int node) const {
  if (!forwarded_) throw std::logic_error("graph: no forward yet");
  return nodes_[static_cast<std::size_t>(node)].out;
}

const Tensor& Graph::node_grad(int node) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  if (!n.has_grad) throw std::logic_error("graph: node has no gradient");
  return n.grad;
}

int Graph::find(const std::string& name) const {
  const auto it = registry_.find(name);
  return it == registry_.end() ? -1 : it->second;
}

int Graph::require_node(const std::string& name) const {
  const int id = find(name);
  if (id < 0) throw std::invalid_argument("graph: unknown layer \"" + name + "\"");
  return id;
}

std::vector<std::string> Graph::registry_names() const {
  std::vector<std::string> names;
  names.reserve(registry_.size());
  for (const auto& [name, id] : registry_) names.push_back(name);
  return names;
}

std::vector<std::pair<std::string, Param*>> Graph::named_params() {
  std::vector<std::pair<std::string, Param*>> out;
  for (auto& node : nodes_) {
    for (Param* p : node.layer->params()) {
      out.emplace_back(node.layer->name() + "/" + p->name, p);
    }
  }
  return out;
}

void Graph::init_params(Rng& rng) {
  for (auto& node : nodes_) node.layer->init_params(rng);
}

void Graph::zero_grads() {
  for (auto& node : nodes_) {
    for (Param* p : node.layer->params()) p->grad.zero();
  }
}

}  // namespace leafscope::nn
