#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "deco/tensor.hpp"

namespace deco {

// Handle to a node recorded in a Graph.
struct Var {
  std::size_t id = 0;
  friend bool operator==(Var, Var) = default;
};

enum class OpKind {
  Leaf,
  Conv1d,
  BatchNorm,
  Relu,
  GlobalAvgPool,
  Dense,
  SoftmaxCrossEntropy,
  CosineSimilarity,
  Abs,
  SumOffDiagonal,
  Sum,
  Scale,
  Add,
  Mul,
  ConcatChannels,
};

const char* op_name(OpKind op);

// Reverse-mode tape. Nodes are appended in execution order, so the node list
// is already topologically sorted. A graph belongs to one thread.
class Graph {
 public:
  // Propagates the output gradient of node `self` into its inputs' buffers.
  using BackwardFn = std::function<void(Graph&, Var self)>;

  // Constant leaf; never receives a gradient.
  Var input(Tensor value);
  // Trainable leaf; gradients accumulate across backward() calls.
  Var parameter(Tensor value);

  Var record(OpKind op, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).value.requires_grad(); }
  OpKind op(Var v) const { return nodes_.at(v.id).op; }
  const std::vector<Var>& inputs(Var v) const { return nodes_.at(v.id).inputs; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradient accumulated for `v`; empty when v does not require grad.
  std::span<const double> grad(Var v) const { return nodes_.at(v.id).value.grad(); }
  // Mutable gradient buffer, for use inside backward functions.
  std::span<double> grad_buffer(Var v) { return nodes_.at(v.id).value.grad(); }

  // Reverse sweep from a scalar root. Intermediate gradients are recomputed on
  // every call; leaf gradients accumulate until zero_grad().
  void backward(Var loss);
  void zero_grad();

 private:
  struct Node {
    Tensor value;
    OpKind op = OpKind::Leaf;
    std::vector<Var> inputs;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

}  // namespace deco
