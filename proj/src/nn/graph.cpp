#include "finemotion/nn/graph.hpp"

namespace finemotion::nn {

Parameter& ParameterStore::add(const std::string& name, Matrix init, bool trainable) {
  if (params_.count(name)) throw NnError(NnErrc::DuplicateParameter, "duplicate parameter: " + name);
  auto p = std::make_unique<Parameter>();
  p->grad = Matrix::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  p->trainable = trainable;
  auto& ref = *p;
  params_.emplace(name, std::move(p));
  return ref;
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw NnError(NnErrc::UnknownParameter, "unknown parameter: " + name);
  return *it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw NnError(NnErrc::UnknownParameter, "unknown parameter: " + name);
  return *it->second;
}

void ParameterStore::zero_grad() {
  for (auto& [_, p] : params_) p->grad.setZero();
}

void ParameterStore::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& [name, p] : params_)
    if (name.rfind(prefix, 0) == 0) p->trainable = trainable;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

Segments Segments::from_sizes(const std::vector<int>& sizes) {
  Segments s;
  s.offsets.reserve(sizes.size() + 1);
  for (int n : sizes) s.offsets.push_back(s.offsets.back() + n);
  return s;
}

Segments Segments::uniform(int count, int size) {
  return from_sizes(std::vector<int>(static_cast<std::size_t>(count), size));
}

NodeId Graph::constant(Matrix value) { return push(std::move(value), false, nullptr); }

NodeId Graph::param(Parameter& p) {
  const bool needs = record_ && p.trainable;
  NodeId id = static_cast<NodeId>(nodes_.size());
  Parameter* pp = &p;
  return push(p.value, needs, [this, id, pp] { pp->grad += nodes_[id].grad; });
}

Matrix& Graph::grad(NodeId id) {
  Node& n = nodes_.at(id);
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

NodeId Graph::push(Matrix value, bool needs_grad, std::function<void()> backward_fn) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  if (n.needs_grad) n.backward = std::move(backward_fn);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

void Graph::backward(NodeId root) {
  if (!record_) throw NnError(NnErrc::BadGraph, "backward on a non-recording graph");
  Node& r = nodes_.at(root);
  if (r.value.rows() != 1 || r.value.cols() != 1)
    throw NnError(NnErrc::ShapeMismatch, "backward root must be a scalar");
  grad(root)(0, 0) += 1.0;
  for (NodeId i = root; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.grad.size() != 0 && n.backward) n.backward();
  }
}

}  // namespace finemotion::nn
