#include "doctest.h"

#include <cmath>
#include <vector>

#include "deco/errors.hpp"
#include "deco/optim.hpp"

using namespace deco;

namespace {

// Scalar Adam recurrence written out step by step.
double adam_reference(double p, const std::vector<double>& grads, double lr) {
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0, v = 0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(b2, static_cast<double>(t)));
    p -= lr * mh / (std::sqrt(vh) + eps);
  }
  return p;
}

}  // namespace

TEST_CASE("zero gradient at t=1 leaves the parameter unchanged") {
  std::vector<double> p{0.7, -1.2};
  AdamState s;
  adam_step(p, std::vector<double>{0.0, 0.0}, s, 0.001);
  CHECK(p == std::vector<double>{0.7, -1.2});
  CHECK(s.t == 1);
}

TEST_CASE("first Adam step moves by lr against the gradient sign") {
  std::vector<double> p{1.0, 1.0};
  AdamState s;
  adam_step(p, std::vector<double>{0.3, -4.0}, s, 0.001);
  CHECK(p[0] == doctest::Approx(1.0 - 0.001).epsilon(1e-9));
  CHECK(p[1] == doctest::Approx(1.0 + 0.001).epsilon(1e-9));
}

TEST_CASE("two-step trace matches the scalar recurrence") {
  std::vector<double> p{0.5};
  AdamState s;
  adam_step(p, std::vector<double>{0.2}, s, 0.01);
  adam_step(p, std::vector<double>{-0.05}, s, 0.01);
  CHECK(p[0] == doctest::Approx(adam_reference(0.5, {0.2, -0.05}, 0.01)).epsilon(1e-14));
  CHECK(s.t == 2);
}

TEST_CASE("adam rejects a non-positive learning rate") {
  std::vector<double> p{1.0};
  AdamState s;
  CHECK_THROWS_AS(adam_step(p, std::vector<double>{1.0}, s, 0.0), ConfigError);
  CHECK_THROWS_AS(adam_step(p, std::vector<double>{1.0}, s, -1e-3), ConfigError);
}

TEST_CASE("plateau: decreasing loss keeps the learning rate") {
  ReduceLrOnPlateau sched(0.001, 0.5, 50, 1e-4);
  double loss = 10.0;
  for (int i = 0; i < 300; ++i) {
    loss -= 0.01;
    CHECK(sched.step(loss) == 0.001);
  }
}

TEST_CASE("plateau: 50 flat epochs halve the learning rate") {
  ReduceLrOnPlateau sched(0.001, 0.5, 50, 1e-4);
  sched.step(1.0);
  for (int i = 0; i < 49; ++i) CHECK(sched.step(1.0) == 0.001);
  CHECK(sched.step(1.0) == 0.0005);
  CHECK(sched.bad_epochs() == 0);
}

TEST_CASE("plateau: improvements below the threshold do not count") {
  ReduceLrOnPlateau sched(0.001, 0.5, 3, 1e-4);
  sched.step(1.0);
  sched.step(1.0 - 5e-7);
  sched.step(1.0 - 9e-7);
  CHECK(sched.step(1.0 - 9.5e-7) == 0.0005);
}

TEST_CASE("plateau: learning rate never drops below min_lr") {
  ReduceLrOnPlateau sched(0.001, 0.5, 2, 1e-4);
  for (int i = 0; i < 100; ++i) sched.step(1.0);
  CHECK(sched.lr() == 1e-4);
}
