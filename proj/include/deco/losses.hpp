#pragma once

#include <span>

#include "deco/graph.hpp"

namespace deco {

enum class OrthNormalization {
  MeanOffdiag,  // batch mean of the off-diagonal sum divided by C(C-1)
  RawSum,       // batch mean of the off-diagonal sum
};

struct OrthOptions {
  OrthNormalization normalization = OrthNormalization::MeanOffdiag;
  bool include_diagonal = false;
  double epsilon = 1e-8;
};

// Feature orthogonality between two [B, C, T] feature maps: for each sample,
// the C x C matrix of |cos| between channel rows of `deco` and `base`, summed
// over i != j and averaged over the batch.
Var orthogonality_loss(Graph& g, Var deco, Var base, const OrthOptions& options = {});

// Mean of orthogonality_loss(current, prev_i) over the previous models.
// Throws UsageError for an empty list.
Var sequential_orth_loss(Graph& g, Var current, std::span<const Var> previous,
                         const OrthOptions& options = {});

// alpha * ce + (1 - alpha) * orth; ConfigError unless 0 <= alpha <= 1.
Var total_loss(Graph& g, Var ce, Var orth, double alpha);
double total_loss(double ce, double orth, double alpha);

}  // namespace deco
