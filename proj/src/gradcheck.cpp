#include "deco/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "deco/errors.hpp"
#include "deco/random.hpp"

namespace deco {

namespace {

double evaluate(const LossBuilder& build, const std::vector<Tensor>& inputs) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.input(t));
  return g.value(build(g, vars)).item();
}

std::vector<std::size_t> pick_entries(std::size_t n, const GradCheckOptions& o, std::size_t salt) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (o.max_entries == 0 || o.max_entries >= n) return idx;
  Rng rng(mix_seed(o.seed + salt));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);
  idx.resize(o.max_entries);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckResult check_gradients(const LossBuilder& build, const std::vector<Tensor>& inputs,
                                const GradCheckOptions& options) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.parameter(t));
  const Var loss = build(g, vars);
  if (g.value(loss).numel() != 1) throw UsageError("check_gradients: loss must be a scalar");
  g.backward(loss);

  GradCheckResult result;
  std::vector<Tensor> probe = inputs;
  for (std::size_t in = 0; in < inputs.size(); ++in) {
    const auto analytic = g.grad(vars[in]);
    for (std::size_t k : pick_entries(inputs[in].numel(), options, in)) {
      const double original = inputs[in].data()[k];
      probe[in].data()[k] = original + options.step;
      const double up = evaluate(build, probe);
      probe[in].data()[k] = original - options.step;
      const double down = evaluate(build, probe);
      probe[in].data()[k] = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[k];
      const double rel =
          std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), options.floor});
      ++result.checked;
      if (rel >= result.max_rel_error) {
        result.max_rel_error = rel;
        std::ostringstream os;
        os << "input[" << in << "] entry " << k << ": analytic " << a << ", numeric " << numeric;
        result.worst = os.str();
      }
    }
  }
  return result;
}

}  // namespace deco
