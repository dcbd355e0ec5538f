#include "deco/losses.hpp"

#include "deco/errors.hpp"
#include "deco/ops.hpp"

namespace deco {

Var orthogonality_loss(Graph& g, Var deco, Var base, const OrthOptions& options) {
  const Tensor& f = g.value(deco);
  if (f.rank() != 3) throw DimensionError("orthogonality_loss: features must be [B, C, T]");
  if (f.shape() != g.value(base).shape()) {
    throw DimensionError("orthogonality_loss: feature shapes differ " + shape_str(f.shape()) +
                         " vs " + shape_str(g.value(base).shape()));
  }
  const double batch = static_cast<double>(f.dim(0));
  const double channels = static_cast<double>(f.dim(1));

  double divisor = batch;
  if (options.normalization == OrthNormalization::MeanOffdiag) {
    const double pairs = options.include_diagonal ? channels * channels : channels * (channels - 1);
    if (pairs == 0.0) return g.input(Tensor::scalar(0.0));
    divisor *= pairs;
  }
  Var sims = cosine_similarity_matrix(g, deco, base, options.epsilon);
  Var total = sum_offdiagonal(g, abs(g, sims), options.include_diagonal);
  return scale(g, total, 1.0 / divisor);
}

Var sequential_orth_loss(Graph& g, Var current, std::span<const Var> previous,
                         const OrthOptions& options) {
  if (previous.empty()) throw UsageError("sequential_orth_loss: no previous models");
  Var acc = orthogonality_loss(g, current, previous[0], options);
  if (previous.size() == 1) return acc;
  for (std::size_t i = 1; i < previous.size(); ++i) {
    acc = add(g, acc, orthogonality_loss(g, current, previous[i], options));
  }
  return scale(g, acc, 1.0 / static_cast<double>(previous.size()));
}

namespace {
void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
}
}  // namespace

Var total_loss(Graph& g, Var ce, Var orth, double alpha) {
  check_alpha(alpha);
  return add(g, scale(g, ce, alpha), scale(g, orth, 1.0 - alpha));
}

double total_loss(double ce, double orth, double alpha) {
  check_alpha(alpha);
  return alpha * ce + (1.0 - alpha) * orth;
}

}  // namespace deco
