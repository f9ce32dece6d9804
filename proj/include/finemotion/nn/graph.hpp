#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "finemotion/common/error.hpp"

namespace finemotion::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

enum class NnErrc { ShapeMismatch, UnknownParameter, DuplicateParameter, BadGraph };
using NnError = Error<NnErrc>;

struct Parameter {
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

// Named parameters with stable addresses. Layers keep raw pointers into the
// store, so a store must outlive every layer built on it.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Matrix init, bool trainable = true);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grad();
  // Marks every parameter whose name starts with `prefix` as (non)trainable.
  void set_trainable(const std::string& prefix, bool trainable);
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  template <typename F>
  void for_each(F&& f) {
    for (auto& [name, p] : params_) f(name, *p);
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& [name, p] : params_) f(name, static_cast<const Parameter&>(*p));
  }

 private:
  std::map<std::string, std::unique_ptr<Parameter>> params_;
};

// Row ranges of a stacked matrix: segment i spans rows [offsets[i], offsets[i+1]).
struct Segments {
  std::vector<int> offsets{0};

  static Segments from_sizes(const std::vector<int>& sizes);
  static Segments uniform(int count, int size);

  int count() const { return static_cast<int>(offsets.size()) - 1; }
  int begin(int i) const { return offsets[i]; }
  int size(int i) const { return offsets[i + 1] - offsets[i]; }
  int total() const { return offsets.back(); }
};

using NodeId = int;

// Reverse-mode tape over dense row-major matrices. A graph built with
// record=false only computes values (inference).
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  NodeId constant(Matrix value);
  NodeId param(Parameter& p);

  const Matrix& value(NodeId id) const { return nodes_.at(id).value; }
  bool needs_grad(NodeId id) const { return nodes_.at(id).needs_grad; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient buffer of a node, allocated (zeroed) on first access.
  Matrix& grad(NodeId id);
  bool has_grad(NodeId id) const { return nodes_.at(id).grad.size() != 0; }

  // Seeds d(root)/d(root) = 1 for a 1x1 root and propagates to every node
  // and to the grad buffers of trainable parameters.
  void backward(NodeId root);

  // Appends an op result. `needs_grad` should be true when any input needs a
  // gradient; the closure is dropped when not recording.
  NodeId push(Matrix value, bool needs_grad, std::function<void()> backward_fn);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    std::function<void()> backward;
  };
  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace finemotion::nn
