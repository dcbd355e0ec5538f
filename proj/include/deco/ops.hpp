#pragma once

#include <optional>
#include <span>
#include <vector>

#include "deco/graph.hpp"
#include "deco/tensor.hpp"

namespace deco {

enum class BnMode { Train, Eval };

// Running statistics of one batch-norm layer.
struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;

  // mean 0, variance 1
  static BatchNormState fresh(std::size_t channels);
  bool initialized(std::size_t channels) const {
    return running_mean.size() == channels && running_var.size() == channels;
  }
};

// 1-D cross-correlation with "same" zero padding.
//   input  [B, Cin, T]
//   kernel [Cout, Cin / groups, K]
//   bias   [Cout] (optional)
// Left pad is floor((K-1)*dilation / 2), right pad the remainder, so the
// output keeps length T.
Var conv1d(Graph& g, Var input, Var kernel, std::optional<Var> bias, int dilation, int groups);

// Per-channel normalisation over batch and time jointly. In train mode the
// batch statistics (population variance) are used and `state` is updated as
// running = momentum * running + (1 - momentum) * batch, with the unbiased
// batch variance feeding running_var. Eval mode reads `state` only.
Var batch_norm_1d(Graph& g, Var input, Var gamma, Var beta, BatchNormState& state, BnMode mode,
                  double momentum, double epsilon);

Var relu(Graph& g, Var x);

// [B, C, T] -> [B, C], mean over time.
Var global_avg_pool(Graph& g, Var x);

// x [B, C], weight [Cls, C], bias [Cls] -> [B, Cls]
Var dense(Graph& g, Var x, Var weight, Var bias);

// Mean over the batch of -log softmax(logits)[true class]. `targets` must be
// one-hot rows.
Var softmax_cross_entropy(Graph& g, Var logits, const Tensor& targets);

// Cosine similarity between every row of a and every row of b.
//   [C, T] x [C, T]       -> [C, C]
//   [B, C, T] x [B, C, T] -> [B, C, C] (per sample)
// Entry (i, j) = <a_i, b_j> / (|a_i| |b_j| + epsilon).
Var cosine_similarity_matrix(Graph& g, Var a, Var b, double epsilon = 1e-8);

Var abs(Graph& g, Var x);

// Sum of the entries of a [C, C] or [B, C, C] tensor with i != j; the
// diagonal is included only when asked.
Var sum_offdiagonal(Graph& g, Var x, bool include_diagonal = false);

Var sum(Graph& g, Var x);
Var scale(Graph& g, Var x, double factor);
Var add(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);

// Concatenate rank-3 tensors along axis 1.
Var concat_channels(Graph& g, std::span<const Var> parts);

// Row-wise softmax of a [B, Cls] tensor (no graph).
Tensor softmax_rows(const Tensor& logits);

}  // namespace deco
