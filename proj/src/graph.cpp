#include "deco/graph.hpp"

#include <algorithm>

#include "deco/errors.hpp"

namespace deco {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Conv1d: return "conv1d";
    case OpKind::BatchNorm: return "batch_norm_1d";
    case OpKind::Relu: return "relu";
    case OpKind::GlobalAvgPool: return "global_avg_pool";
    case OpKind::Dense: return "dense";
    case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::CosineSimilarity: return "cosine_similarity_matrix";
    case OpKind::Abs: return "abs";
    case OpKind::SumOffDiagonal: return "sum_offdiagonal";
    case OpKind::Sum: return "sum";
    case OpKind::Scale: return "scale";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::ConcatChannels: return "concat_channels";
  }
  return "?";
}

Var Graph::input(Tensor value) {
  require_finite(value, "graph input");
  value.set_requires_grad(false);
  nodes_.push_back(Node{std::move(value), OpKind::Leaf, {}, {}});
  return Var{nodes_.size() - 1};
}

Var Graph::parameter(Tensor value) {
  require_finite(value, "graph parameter");
  value.set_requires_grad(true);
  value.zero_grad();
  nodes_.push_back(Node{std::move(value), OpKind::Leaf, {}, {}});
  return Var{nodes_.size() - 1};
}

Var Graph::record(OpKind op, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  bool needs = std::any_of(inputs.begin(), inputs.end(),
                           [this](Var v) { return requires_grad(v); });
  value.set_requires_grad(needs);
  if (needs) {
    value.zero_grad();
  } else {
    backward = nullptr;
  }
  nodes_.push_back(Node{std::move(value), op, std::move(inputs), std::move(backward)});
  return Var{nodes_.size() - 1};
}

void Graph::backward(Var loss) {
  const Node& root = nodes_.at(loss.id);
  if (!root.value.is_scalar()) {
    throw UsageError("backward() needs a scalar root, got shape " +
                     shape_str(root.value.shape()));
  }
  if (!root.value.requires_grad()) return;

  for (auto& node : nodes_) {
    if (node.op != OpKind::Leaf && node.value.requires_grad()) node.value.zero_grad();
  }
  nodes_[loss.id].value.grad()[0] += 1.0;

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.backward) node.backward(*this, Var{i});
  }
}

void Graph::zero_grad() {
  for (auto& node : nodes_) {
    if (node.value.requires_grad()) node.value.zero_grad();
  }
}

}  // namespace deco
