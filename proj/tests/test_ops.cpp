#include "doctest.h"

#include <cmath>
#include <vector>

#include "deco/errors.hpp"
#include "deco/gradcheck.hpp"
#include "deco/ops.hpp"
#include "deco/random.hpp"

using namespace deco;

namespace {

// Direct summation with explicit zero padding: out[b][o][t] =
// bias[o] + sum_{c,k} w[o][c][k] * x[b][g*cpg + c][t + k*d - padL]
Tensor conv_oracle(const Tensor& x, const Tensor& w, const std::vector<double>& bias, int d,
                   int groups) {
  const std::size_t B = x.dim(0), Cin = x.dim(1), T = x.dim(2);
  const std::size_t Cout = w.dim(0), cpg = w.dim(1), K = w.dim(2);
  const long padL = (static_cast<long>(K) - 1) * d / 2;
  const std::size_t opg = Cout / static_cast<std::size_t>(groups);
  (void)Cin;
  Tensor out(Shape{B, Cout, T}, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < Cout; ++o)
      for (std::size_t t = 0; t < T; ++t) {
        double s = bias.empty() ? 0.0 : bias[o];
        for (std::size_t c = 0; c < cpg; ++c)
          for (std::size_t k = 0; k < K; ++k) {
            const long src = static_cast<long>(t) + static_cast<long>(k) * d - padL;
            if (src < 0 || src >= static_cast<long>(T)) continue;
            s += w.at(o, c, k) * x.at(b, (o / opg) * cpg + c, static_cast<std::size_t>(src));
          }
        out.at(b, o, t) = s;
      }
  return out;
}

Tensor random_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

Tensor one_hot(std::size_t rows, std::size_t classes, std::vector<std::size_t> idx) {
  Tensor t(Shape{rows, classes}, 0.0);
  for (std::size_t i = 0; i < rows; ++i) t.at(i, idx[i]) = 1.0;
  return t;
}

Tensor eval_conv(const Tensor& x, const Tensor& w, int d, int groups) {
  Graph g;
  return g.value(conv1d(g, g.input(x), g.input(w), std::nullopt, d, groups));
}

constexpr double kGradTol = 1e-3;

}  // namespace

TEST_CASE("conv1d identity kernel") {
  const Tensor x = Tensor::from({1, 1, 4}, {1, 2, 3, 4});
  CHECK(eval_conv(x, Tensor::from({1, 1, 1}, {1}), 1, 1) == x);
}

TEST_CASE("conv1d hand cross-correlation") {
  const Tensor x = Tensor::from({1, 1, 4}, {1, 2, 3, 4});
  const Tensor y = eval_conv(x, Tensor::from({1, 1, 3}, {1, 0, -1}), 1, 1);
  CHECK(y.values() == std::vector<double>{-2, -2, -2, 3});
}

TEST_CASE("conv1d dilated kernel matches direct summation") {
  const Tensor x = Tensor::from({1, 1, 4}, {1, 1, 1, 1});
  const Tensor w = Tensor::from({1, 1, 2}, {1, -1});
  const Tensor y = eval_conv(x, w, 2, 1);
  // pads 1 left, 1 right: [0 1 1 1 1 0]; out[t] = p[t] - p[t+2]
  CHECK(y.values() == std::vector<double>{-1, 0, 0, 1});
  CHECK(y == conv_oracle(x, w, {}, 2, 1));
}

TEST_CASE("conv1d agrees with the oracle on random shapes") {
  Rng rng(21);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t B = 1 + rng.below(3), Cin = 1 + rng.below(4), T = 1 + rng.below(12);
    const std::size_t K = 1 + rng.below(5);
    const int d = std::array<int, 3>{1, 2, 4}[rng.below(3)];
    const bool depthwise = rng.below(2) == 1;
    const int groups = depthwise ? static_cast<int>(Cin) : 1;
    const std::size_t Cout = depthwise ? Cin : 1 + rng.below(4);
    const Tensor x = random_tensor(rng, {B, Cin, T});
    const Tensor w = random_tensor(rng, {Cout, Cin / static_cast<std::size_t>(groups), K});
    const Tensor bias = random_tensor(rng, {Cout});
    Graph g;
    const Tensor y = g.value(conv1d(g, g.input(x), g.input(w), g.input(bias), d, groups));
    const Tensor want = conv_oracle(x, w, bias.values(), d, groups);
    for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("depthwise conv equals independent per-channel convolutions") {
  Rng rng(4);
  const Tensor x = random_tensor(rng, {2, 3, 9});
  const Tensor w = random_tensor(rng, {3, 1, 4});
  const Tensor y = eval_conv(x, w, 2, 3);
  for (std::size_t c = 0; c < 3; ++c) {
    Tensor xc(Shape{2, 1, 9}), wc(Shape{1, 1, 4});
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t t = 0; t < 9; ++t) xc.at(b, 0, t) = x.at(b, c, t);
    for (std::size_t k = 0; k < 4; ++k) wc.at(0, 0, k) = w.at(c, 0, k);
    const Tensor yc = eval_conv(xc, wc, 2, 1);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t t = 0; t < 9; ++t) CHECK(y.at(b, c, t) == doctest::Approx(yc.at(b, 0, t)).epsilon(1e-14));
  }
}

TEST_CASE("conv1d validates shapes and values") {
  Graph g;
  Var x = g.input(Tensor(Shape{1, 3, 5}, 1.0));
  CHECK_THROWS_AS(conv1d(g, x, g.input(Tensor(Shape{2, 2, 3}, 1.0)), std::nullopt, 1, 1), DimensionError);
  CHECK_THROWS_AS(conv1d(g, x, g.input(Tensor(Shape{2, 1, 3}, 1.0)), std::nullopt, 1, 2), DimensionError);
  CHECK_THROWS_AS(conv1d(g, x, g.input(Tensor(Shape{3, 1, 3}, 1.0)), std::nullopt, 0, 3), ConfigError);
}

TEST_CASE("conv1d gradients match finite differences") {
  Rng rng(8);
  for (int d : {1, 2, 4}) {
    for (bool depthwise : {false, true}) {
      CAPTURE(d);
      CAPTURE(depthwise);
      const std::size_t Cin = 3, T = 10, K = 3;
      const int groups = depthwise ? 3 : 1;
      const std::size_t Cout = depthwise ? 3 : 2;
      const Tensor target = random_tensor(rng, {2, Cout, T});
      const auto r = check_gradients(
          [&](Graph& g, std::span<const Var> v) {
            Var y = conv1d(g, v[0], v[1], v[2], d, groups);
            return sum(g, mul(g, y, g.input(target)));
          },
          {random_tensor(rng, {2, Cin, T}), random_tensor(rng, {Cout, Cin / static_cast<std::size_t>(groups), K}),
           random_tensor(rng, {Cout})});
      CHECK(r.max_rel_error < kGradTol);
    }
  }
}

TEST_CASE("batch norm examples") {
  BatchNormState st = BatchNormState::fresh(1);
  {
    Graph g;
    Var y = batch_norm_1d(g, g.input(Tensor(Shape{2, 1, 3}, 4.0)), g.input(Tensor(Shape{1}, 1.0)),
                          g.input(Tensor(Shape{1}, 0.0)), st, BnMode::Train, 0.9, 1e-5);
    for (double v : g.value(y).values()) CHECK(v == 0.0);
  }
  {
    BatchNormState s = BatchNormState::fresh(1);
    Graph g;
    const Tensor x = Tensor::from({1, 1, 3}, {0.5, -2.0, 7.0});
    Var y = batch_norm_1d(g, g.input(x), g.input(Tensor(Shape{1}, 1.0)),
                          g.input(Tensor(Shape{1}, 0.0)), s, BnMode::Eval, 0.9, 1e-5);
    for (std::size_t i = 0; i < 3; ++i) CHECK(g.value(y)[i] == doctest::Approx(x[i] / std::sqrt(1.0 + 1e-5)).epsilon(1e-15));
  }
  {
    BatchNormState s = BatchNormState::fresh(1);
    Graph g;
    Var y = batch_norm_1d(g, g.input(Tensor::from({1, 1, 2}, {1, 3})), g.input(Tensor(Shape{1}, 1.0)),
                          g.input(Tensor(Shape{1}, 0.0)), s, BnMode::Train, 0.9, 1e-5);
    // mean 2, population variance 1
    CHECK(g.value(y)[0] == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-12));
    CHECK(g.value(y)[1] == doctest::Approx(1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-12));
    // running stats: 0.9 * 0 + 0.1 * 2, 0.9 * 1 + 0.1 * 2 (unbiased batch variance)
    CHECK(s.running_mean[0] == doctest::Approx(0.2));
    CHECK(s.running_var[0] == doctest::Approx(1.1));
  }
}

TEST_CASE("batch norm in eval mode needs running statistics") {
  BatchNormState empty;
  Graph g;
  CHECK_THROWS_AS(batch_norm_1d(g, g.input(Tensor(Shape{1, 2, 3}, 1.0)), g.input(Tensor(Shape{2}, 1.0)),
                                g.input(Tensor(Shape{2}, 0.0)), empty, BnMode::Eval, 0.9, 1e-5),
                  StateError);
}

TEST_CASE("batch norm train output is standardised per channel") {
  Rng rng(2);
  const Tensor x = random_tensor(rng, {4, 2, 6});
  BatchNormState s = BatchNormState::fresh(2);
  Graph g;
  const Tensor y = g.value(batch_norm_1d(g, g.input(x), g.input(Tensor(Shape{2}, 1.0)),
                                         g.input(Tensor(Shape{2}, 0.0)), s, BnMode::Train, 0.9, 1e-5));
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t t = 0; t < 6; ++t) m += y.at(b, c, t);
    m /= 24;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t t = 0; t < 6; ++t) v += (y.at(b, c, t) - m) * (y.at(b, c, t) - m);
    v /= 24;
    CHECK(std::fabs(m) < 1e-12);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("batch norm gradients match finite differences") {
  Rng rng(13);
  const Tensor target = random_tensor(rng, {3, 2, 5});
  for (BnMode mode : {BnMode::Train, BnMode::Eval}) {
    const auto r = check_gradients(
        [&](Graph& g, std::span<const Var> v) {
          BatchNormState s{{0.1, -0.2}, {0.8, 1.3}};
          return sum(g, mul(g, batch_norm_1d(g, v[0], v[1], v[2], s, mode, 0.9, 1e-5), g.input(target)));
        },
        {random_tensor(rng, {3, 2, 5}), random_tensor(rng, {2}), random_tensor(rng, {2})});
    CHECK(r.max_rel_error < kGradTol);
  }
}

TEST_CASE("relu examples") {
  Graph g;
  Var x = g.parameter(Tensor::from({3}, {-1, 0, 2}));
  Var y = relu(g, x);
  CHECK(g.value(y).values() == std::vector<double>{0, 0, 2});
  g.backward(sum(g, y));
  CHECK(std::vector<double>(g.grad(x).begin(), g.grad(x).end()) == std::vector<double>{0, 0, 1});
  Graph h;
  const Tensor pos = Tensor::from({2}, {0.5, 3});
  CHECK(h.value(relu(h, h.input(pos))) == pos);
}

TEST_CASE("global average pool examples") {
  Graph g;
  Var x = g.parameter(Tensor::from({1, 2, 3}, {1, 2, 3, 5, 5, 5}));
  Var y = global_avg_pool(g, x);
  CHECK(g.value(y).at(0, 0) == 2.0);
  CHECK(g.value(y).at(0, 1) == 5.0);
  g.backward(sum(g, y));
  for (double v : g.grad(x)) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("dense examples") {
  Graph g;
  const Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4});
  Var id = dense(g, g.input(x), g.input(Tensor::from({2, 2}, {1, 0, 0, 1})), g.input(Tensor(Shape{2}, 0.0)));
  CHECK(g.value(id) == x);
  Var b = dense(g, g.input(x), g.input(Tensor(Shape{3, 2}, 0.0)), g.input(Tensor::from({3}, {1, -1, 2})));
  CHECK(g.value(b).values() == std::vector<double>{1, -1, 2, 1, -1, 2});
  // [[1,2],[3,4]] . W^T with W = [[5,6],[7,8]] + [1, 1]
  Var m = dense(g, g.input(x), g.input(Tensor::from({2, 2}, {5, 6, 7, 8})), g.input(Tensor(Shape{2}, 1.0)));
  CHECK(g.value(m).values() == std::vector<double>{18, 24, 40, 54});
  CHECK_THROWS_AS(dense(g, g.input(x), g.input(Tensor(Shape{2, 3}, 0.0)), g.input(Tensor(Shape{2}, 0.0))),
                  DimensionError);
}

TEST_CASE("softmax cross-entropy examples") {
  Graph g;
  Var u = softmax_cross_entropy(g, g.input(Tensor(Shape{1, 4}, 0.3)), one_hot(1, 4, {2}));
  CHECK(g.value(u).item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  Var s = softmax_cross_entropy(g, g.input(Tensor::from({1, 2}, {1000, 0})), one_hot(1, 2, {0}));
  CHECK(g.value(s).item() == doctest::Approx(0.0));
  Var h = softmax_cross_entropy(g, g.input(Tensor::from({1, 2}, {1, 2})), one_hot(1, 2, {1}));
  CHECK(g.value(h).item() == doctest::Approx(-std::log(std::exp(2.0) / (std::exp(1.0) + std::exp(2.0)))).epsilon(1e-12));
  CHECK(g.value(h).item() == doctest::Approx(0.3133).epsilon(1e-4));
}

TEST_CASE("softmax cross-entropy gradient is (softmax - target) / B") {
  Graph g;
  const Tensor logits = Tensor::from({2, 3}, {0.1, 0.5, -0.3, 1.0, 0.0, 2.0});
  const Tensor y = one_hot(2, 3, {1, 2});
  Var l = g.parameter(logits);
  g.backward(softmax_cross_entropy(g, l, y));
  const Tensor p = softmax_rows(logits);
  for (std::size_t i = 0; i < 6; ++i) CHECK(g.grad(l)[i] == doctest::Approx((p[i] - y[i]) / 2.0).epsilon(1e-12));
}

TEST_CASE("softmax cross-entropy needs one-hot targets") {
  Graph g;
  Var l = g.input(Tensor(Shape{1, 2}, 0.0));
  CHECK_THROWS_AS(softmax_cross_entropy(g, l, Tensor::from({1, 2}, {0.5, 0.5})), InputError);
  CHECK_THROWS_AS(softmax_cross_entropy(g, l, Tensor::from({1, 2}, {1, 1})), InputError);
  CHECK_THROWS_AS(softmax_cross_entropy(g, l, Tensor(Shape{1, 3}, 0.0)), DimensionError);
}

TEST_CASE("cosine similarity examples") {
  Graph g;
  const Tensor e = Tensor::from({2, 2}, {1, 0, 0, 1});
  const Tensor id = g.value(cosine_similarity_matrix(g, g.input(e), g.input(e)));
  for (std::size_t i = 0; i < 4; ++i) CHECK(id[i] == doctest::Approx(e[i]).epsilon(1e-7));

  const Tensor z = Tensor::from({2, 2}, {0, 0, 1, 1});
  const Tensor zr = g.value(cosine_similarity_matrix(g, g.input(z), g.input(e)));
  CHECK(zr.at(0, 0) == 0.0);
  CHECK(zr.at(0, 1) == 0.0);

  const double h = 1.0 / std::sqrt(2.0);
  const Tensor a = Tensor::from({2, 2}, {1, 0, h, h});
  const Tensor c = g.value(cosine_similarity_matrix(g, g.input(a), g.input(e)));
  const std::vector<double> want{1, 0, h, h};
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(c[i] - want[i]) < 1e-6);
  CHECK(c.at(1, 1) == doctest::Approx(0.7071).epsilon(1e-4));
  CHECK_THROWS_AS(cosine_similarity_matrix(g, g.input(a), g.input(Tensor(Shape{2, 3}, 1.0))), DimensionError);
}

TEST_CASE("cosine similarity stays within [-1, 1]") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    Tensor a = random_tensor(rng, {3, 4, 7});
    Tensor b = trial % 2 ? a : random_tensor(rng, {3, 4, 7});
    for (double v : g.value(cosine_similarity_matrix(g, g.input(a), g.input(b))).values()) {
      CHECK(v <= 1.0 + 1e-9);
      CHECK(v >= -1.0 - 1e-9);
    }
  }
}

TEST_CASE("elementwise and reduction ops have correct gradients") {
  Rng rng(31);
  const Tensor w = random_tensor(rng, {2, 3, 3});
  struct Case {
    const char* name;
    LossBuilder build;
    std::vector<Tensor> inputs;
  };
  const std::vector<Case> cases = {
      {"relu", [&](Graph& g, std::span<const Var> v) { return sum(g, mul(g, relu(g, v[0]), g.input(w))); },
       {random_tensor(rng, {2, 3, 3})}},
      {"abs", [&](Graph& g, std::span<const Var> v) { return sum(g, mul(g, abs(g, v[0]), g.input(w))); },
       {random_tensor(rng, {2, 3, 3})}},
      {"gap", [&](Graph& g, std::span<const Var> v) {
         return sum(g, mul(g, global_avg_pool(g, v[0]), g.input(Tensor::from({2, 3}, {1, -2, 3, 0.5, 2, -1}))));
       },
       {random_tensor(rng, {2, 3, 4})}},
      {"dense", [&](Graph& g, std::span<const Var> v) {
         return sum(g, mul(g, dense(g, v[0], v[1], v[2]), g.input(Tensor::from({2, 2}, {1, -1, 0.5, 2}))));
       },
       {random_tensor(rng, {2, 3}), random_tensor(rng, {2, 3}), random_tensor(rng, {2})}},
      {"cross-entropy", [&](Graph& g, std::span<const Var> v) {
         return softmax_cross_entropy(g, v[0], one_hot(3, 4, {0, 3, 1}));
       },
       {random_tensor(rng, {3, 4})}},
      {"cosine", [&](Graph& g, std::span<const Var> v) {
         return sum(g, mul(g, cosine_similarity_matrix(g, v[0], v[1]), g.input(w)));
       },
       {random_tensor(rng, {2, 3, 5}), random_tensor(rng, {2, 3, 5})}},
      {"offdiagonal", [&](Graph& g, std::span<const Var> v) {
         return add(g, sum_offdiagonal(g, mul(g, v[0], g.input(w)), false),
                    scale(g, sum_offdiagonal(g, v[0], true), 0.5));
       },
       {random_tensor(rng, {2, 3, 3})}},
      {"concat", [&](Graph& g, std::span<const Var> v) {
         const Var parts[] = {v[0], v[1]};
         Var c = concat_channels(g, parts);
         return sum(g, mul(g, c, c));
       },
       {random_tensor(rng, {2, 1, 3}), random_tensor(rng, {2, 2, 3})}},
      {"add-scale-mul", [&](Graph& g, std::span<const Var> v) {
         return sum(g, mul(g, add(g, v[0], scale(g, v[1], -1.5)), v[1]));
       },
       {random_tensor(rng, {4}), random_tensor(rng, {4})}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const auto r = check_gradients(c.build, c.inputs);
    CAPTURE(r.worst);
    CHECK(r.max_rel_error < kGradTol);
  }
}

TEST_CASE("concat validates shapes") {
  Graph g;
  const Var parts[] = {g.input(Tensor(Shape{2, 1, 3})), g.input(Tensor(Shape{2, 1, 4}))};
  CHECK_THROWS_AS(concat_channels(g, parts), DimensionError);
}

TEST_CASE("conv1d is deterministic") {
  Rng rng(5);
  const Tensor x = random_tensor(rng, {3, 4, 50});
  const Tensor w = random_tensor(rng, {6, 4, 7});
  CHECK(eval_conv(x, w, 2, 1) == eval_conv(x, w, 2, 1));
}
