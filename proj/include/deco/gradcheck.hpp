#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deco/graph.hpp"

namespace deco {

// Builds a scalar loss from the given leaf variables.
using LossBuilder = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckOptions {
  double step = 1e-4;
  // |analytic - numeric| / max(|analytic|, |numeric|, floor)
  double floor = 1e-4;
  // 0 checks every entry; otherwise a seeded sample of this many per input.
  std::size_t max_entries = 0;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "input[i] entry k: analytic a, numeric n"
};

// Compares reverse-mode gradients of every input against central differences.
GradCheckResult check_gradients(const LossBuilder& build, const std::vector<Tensor>& inputs,
                                const GradCheckOptions& options = {});

}  // namespace deco
