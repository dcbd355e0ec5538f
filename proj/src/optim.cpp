#include "deco/optim.hpp"

#include <algorithm>
#include <cmath>

#include "deco/errors.hpp"

namespace deco {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamHyper& hyper) {
  if (!(lr > 0.0)) throw ConfigError("adam: learning rate must be > 0");
  if (params.size() != grads.size()) throw DimensionError("adam: params/grads size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw StateError("adam: state size mismatch");

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bias1 = 1.0 - std::pow(hyper.beta1, t);
  const double bias2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = state.m[i] / bias1;
    const double v_hat = state.v[i] / bias2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

ReduceLrOnPlateau::ReduceLrOnPlateau(double initial_lr, double factor, int patience,
                                     double min_lr, double threshold)
    : lr_(initial_lr), factor_(factor), patience_(patience), min_lr_(min_lr),
      threshold_(threshold) {
  if (!(initial_lr > 0.0)) throw ConfigError("plateau: learning rate must be > 0");
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("plateau: factor must be in (0,1)");
  if (patience < 1) throw ConfigError("plateau: patience must be >= 1");
}

double ReduceLrOnPlateau::step(double metric) {
  if (metric < best_ - threshold_) {
    best_ = metric;
    bad_epochs_ = 0;
    return lr_;
  }
  if (++bad_epochs_ >= patience_) {
    lr_ = std::max(lr_ * factor_, min_lr_);
    bad_epochs_ = 0;
  }
  return lr_;
}

}  // namespace deco
