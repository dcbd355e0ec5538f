#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>

#include "deco/errors.hpp"
#include "deco/gradcheck.hpp"
#include "deco/lite_model.hpp"
#include "deco/optim.hpp"
#include "deco/random.hpp"

using namespace deco;

namespace {

// Trainable parameters from the layer algebra.
std::int64_t expected_param_count(const LiteArchitectureConfig& c) {
  const std::int64_t f = c.n_filters;
  std::int64_t first = 0;
  for (int k : c.first_layer_kernel_sizes) first += f * k;
  const std::int64_t custom =
      2 * static_cast<std::int64_t>(c.trend_filter_lengths.size()) +
      static_cast<std::int64_t>(c.peak_filter_lengths.size());
  const std::int64_t c1 = f * static_cast<std::int64_t>(c.first_layer_kernel_sizes.size()) + custom;
  const std::int64_t bn1 = 2 * c1;
  const std::int64_t block2 = c1 * c.dwsc_kernel_sizes[0] + f * c1 + 2 * f;
  const std::int64_t block3 = f * c.dwsc_kernel_sizes[1] + f * f + 2 * f;
  const std::int64_t head = f * c.n_classes + c.n_classes;
  return first + bn1 + block2 + block3 + head;
}

Tensor random_input(std::uint64_t seed, std::size_t b, std::size_t t) {
  Rng rng(seed);
  Tensor x(Shape{b, 1, t});
  for (double& v : x.values()) v = rng.normal();
  return x;
}

const CustomFilter* find_filter(const CustomFilterBank& bank, FilterKind kind, std::size_t len) {
  for (const auto& f : bank.filters)
    if (f.kind == kind && f.taps.size() == len) return &f;
  return nullptr;
}

}  // namespace

TEST_CASE("custom filter shapes") {
  const CustomFilterBank bank = build_custom_filters(LiteArchitectureConfig{});
  CHECK(bank.size() == 17);
  REQUIRE(find_filter(bank, FilterKind::Increasing, 4));
  CHECK(find_filter(bank, FilterKind::Increasing, 4)->taps == std::vector<double>{-1, -1, 1, 1});
  CHECK(find_filter(bank, FilterKind::Decreasing, 4)->taps == std::vector<double>{1, 1, -1, -1});
  CHECK(find_filter(bank, FilterKind::Peak, 8)->taps == std::vector<double>{-1, -1, 1, 1, 1, 1, -1, -1});
  for (const auto& f : bank.filters) CHECK(std::accumulate(f.taps.begin(), f.taps.end(), 0.0) == 0.0);
  const auto grouped = bank.grouped_kernels();
  std::size_t total = 0;
  for (const auto& k : grouped) total += k.dim(0);
  CHECK(total == 17);
}

TEST_CASE("custom filter lengths are validated") {
  LiteArchitectureConfig c;
  c.trend_filter_lengths = {3};
  CHECK_THROWS_AS(build_custom_filters(c), ConfigError);
  c = {};
  c.peak_filter_lengths = {6};
  CHECK_THROWS_AS(init_model(c, 0), ConfigError);
}

TEST_CASE("initialisation is deterministic per seed") {
  const LiteArchitectureConfig c;
  CHECK(init_model(c, 7).parameter_checksum() == init_model(c, 7).parameter_checksum());
  CHECK(init_model(c, 7).parameter_checksum() != init_model(c, 8).parameter_checksum());
}

TEST_CASE("different seeds differ in every randomly initialised tensor") {
  const LiteModel a = init_model({}, 1), b = init_model({}, 2);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto& name = a.parameters()[i].name;
    CAPTURE(name);
    const bool random = name.find("gamma") == std::string::npos &&
                        name.find("beta") == std::string::npos && name != "head.bias";
    if (random) CHECK_FALSE(a.parameters()[i].tensor == b.parameters()[i].tensor);
  }
  CHECK(a.parameter("bn1.gamma").values() == std::vector<double>(113, 1.0));
  CHECK(a.parameter("head.bias").values() == std::vector<double>(2, 0.0));
}

TEST_CASE("parameter count follows the layer algebra") {
  const LiteModel m = init_model({}, 0);
  CHECK(param_count(m) == expected_param_count({}));
  CHECK(param_count(m) == 10200);
  const Tensor& w = m.parameter("head.weight");
  CHECK(static_cast<std::int64_t>(w.numel() + m.parameter("head.bias").numel()) == 66);
  const double ratio = ratio_vs_reference(param_count(m), kInceptionTimeReferenceParams);
  CHECK(std::fabs(ratio - 0.0234) <= 0.01);
}

TEST_CASE("frozen filter lengths only matter through the channel count") {
  LiteArchitectureConfig same;
  same.trend_filter_lengths = {2, 4, 6, 10, 12, 14};
  CHECK(param_count(init_model(same, 0)) == 10200);
  LiteArchitectureConfig fewer;
  fewer.peak_filter_lengths = {4, 8};
  const std::int64_t per_channel = 2 + 20 + 32;
  CHECK(param_count(init_model(fewer, 0)) == 10200 - 3 * per_channel);
  CHECK(param_count(init_model(fewer, 0)) == expected_param_count(fewer));
}

TEST_CASE("forward shapes") {
  const LiteModel m = init_model({}, 3);
  Graph g;
  LiteForward f = forward(g, m, random_input(1, 3, 100), BnMode::Train);
  CHECK(g.value(f.features).shape() == Shape{3, 32, 100});
  CHECK(g.value(f.logits).shape() == Shape{3, 2});
  for (Var k : f.custom_kernels) CHECK_FALSE(g.requires_grad(k));
}

TEST_CASE("short series are padded through every block") {
  const LiteModel m = init_model({}, 3);
  const LiteOutputs out = infer(m, random_input(2, 2, 5));
  CHECK(out.features.shape() == Shape{2, 32, 5});
}

TEST_CASE("zero input in eval mode yields the dense bias") {
  LiteModel m = init_model({}, 4);
  m.parameter("head.bias") = Tensor::from({2}, {0.25, -0.5});
  for (const char* bn : {"bn1.beta", "bn2.beta", "bn3.beta"}) CHECK(m.parameter(bn).values()[0] == 0.0);
  const LiteOutputs out = infer(m, Tensor(Shape{2, 1, 30}, 0.0));
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(out.logits.at(i, 0) == 0.25);
    CHECK(out.logits.at(i, 1) == -0.5);
  }
}

TEST_CASE("identical series give identical logits") {
  const LiteModel m = init_model({}, 5);
  Tensor x = random_input(9, 2, 40);
  for (std::size_t t = 0; t < 40; ++t) x.at(1, 0, t) = x.at(0, 0, t);
  for (BnMode mode : {BnMode::Train, BnMode::Eval}) {
    Graph g;
    const Tensor& l = g.value(forward(g, m, x, mode).logits);
    CHECK(l.at(0, 0) == l.at(1, 0));
    CHECK(l.at(0, 1) == l.at(1, 1));
  }
}

TEST_CASE("eval forward is a pure function of the sample") {
  const LiteModel m = init_model({}, 6);
  const Tensor x = random_input(3, 4, 33);
  const LiteOutputs all = infer(m, x);
  const LiteOutputs chunked = infer(m, x, 1);
  CHECK(all.logits == chunked.logits);
  CHECK(all.features == chunked.features);
  CHECK(infer(m, x).logits == all.logits);
}

TEST_CASE("train mode returns refreshed statistics without touching the model") {
  const LiteModel m = init_model({}, 6);
  const std::uint64_t before = m.state_checksum();
  Graph g;
  LiteForward f = forward(g, m, random_input(3, 4, 33), BnMode::Train);
  CHECK(m.state_checksum() == before);
  CHECK(f.bn_states[0].running_mean != m.bn_states()[0].running_mean);
}

TEST_CASE("non-finite activations name the block") {
  LiteModel m = init_model({}, 1);
  for (double& v : m.parameter("first.k40").values()) v = 1e308;
  Graph g;
  try {
    forward(g, m, random_input(1, 2, 50), BnMode::Train);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("block 1") != std::string::npos);
  }
}

TEST_CASE("final filter bank") {
  const LiteModel m = init_model({}, 2);
  const FinalFilterBank bank = extract_final_filters(m);
  CHECK(bank.filters.shape() == Shape{32, 20});
  CHECK(bank.default_shape);
  CHECK(extract_final_filters(init_model({}, 2)).filters == bank.filters);

  LiteArchitectureConfig other;
  other.dwsc_kernel_sizes = {20, 9};
  const FinalFilterBank odd = extract_final_filters(init_model(other, 2));
  CHECK(odd.kernel_length == 9);
  CHECK_FALSE(odd.default_shape);
}

TEST_CASE("one optimisation step changes the final filters") {
  LiteModel m = init_model({}, 2);
  const Tensor before = extract_final_filters(m).filters;
  Graph g;
  LiteForward f = forward(g, m, random_input(4, 4, 60), BnMode::Train);
  Tensor y(Shape{4, 2}, 0.0);
  y.at(0, 0) = y.at(1, 1) = y.at(2, 0) = y.at(3, 1) = 1.0;
  g.backward(softmax_cross_entropy(g, f.logits, y));
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    AdamState s;
    adam_step(m.parameters()[i].tensor.data(), g.grad(f.params[i]), s, 0.001);
  }
  CHECK_FALSE(extract_final_filters(m).filters == before);
}

TEST_CASE("checkpoint round trip is bit exact") {
  LiteModel m = init_model({}, 12);
  m.bn_states()[1].running_mean[3] = 0.123456789;
  const std::string bytes = checkpoint_bytes(m);
  const LiteModel back = model_from_checkpoint_bytes(bytes);
  CHECK(back.state_checksum() == m.state_checksum());
  CHECK(back.config() == m.config());
  CHECK(back.seed() == 12);
  CHECK(checkpoint_bytes(back) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "deco_test_ckpt" / "m.ckpt";
  save_checkpoint(m, path);
  CHECK(load_checkpoint(path).state_checksum() == m.state_checksum());
  std::filesystem::remove_all(path.parent_path());
}

TEST_CASE("corrupted checkpoints are rejected") {
  const std::string bytes = checkpoint_bytes(init_model({}, 1));
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 1;
  CHECK_THROWS_AS(model_from_checkpoint_bytes(flipped), FormatError);
  CHECK_THROWS_AS(model_from_checkpoint_bytes(bytes.substr(0, bytes.size() - 9)), FormatError);
  CHECK_THROWS_AS(model_from_checkpoint_bytes("garbage"), FormatError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/m.ckpt"), IoError);
}

TEST_CASE("full forward gradient matches finite differences") {
  LiteArchitectureConfig c;
  c.n_filters = 4;
  c.first_layer_kernel_sizes = {6, 3};
  c.dwsc_kernel_sizes = {5, 5};
  c.trend_filter_lengths = {2, 4};
  c.peak_filter_lengths = {4};
  const LiteModel m = init_model(c, 17);
  const Tensor x = random_input(23, 3, 16);
  Tensor y(Shape{3, 2}, 0.0);
  y.at(0, 0) = y.at(1, 1) = y.at(2, 1) = 1.0;
  std::vector<Tensor> inputs;
  for (const auto& p : m.parameters()) inputs.push_back(p.tensor);
  inputs.push_back(x);
  GradCheckOptions o;
  o.max_entries = 12;
  const auto r = check_gradients(
      [&](Graph& g, std::span<const Var> v) {
        LiteForward f = forward(g, m, v.first(v.size() - 1), v.back(), BnMode::Train);
        return softmax_cross_entropy(g, f.logits, y);
      },
      inputs, o);
  CAPTURE(r.worst);
  CHECK(r.max_rel_error < 1e-3);
}
