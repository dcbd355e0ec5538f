#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace deco {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment estimates for one parameter tensor.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
};

// One bias-corrected Adam update in place:
//   p -= lr * m_hat / (sqrt(v_hat) + epsilon)
// Throws ConfigError when lr <= 0.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamHyper& hyper = {});

// Multiplies the learning rate by `factor` after `patience` consecutive epochs
// without an improvement of more than `threshold` (absolute) on a minimised
// metric. Never goes below `min_lr`.
class ReduceLrOnPlateau {
 public:
  ReduceLrOnPlateau(double initial_lr, double factor, int patience, double min_lr,
                    double threshold = 1e-6);

  // Feed one epoch's metric; returns the learning rate for the next epoch.
  double step(double metric);

  double lr() const noexcept { return lr_; }
  double best() const noexcept { return best_; }
  int bad_epochs() const noexcept { return bad_epochs_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double min_lr_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

}  // namespace deco
