#include "deco/lite_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "deco/errors.hpp"
#include "deco/random.hpp"
#include "deco/serialize.hpp"

namespace deco {

void LiteArchitectureConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v < 1) throw ConfigError(std::string(what) + " must be >= 1");
  };
  positive(n_filters, "n_filters");
  positive(n_classes, "n_classes");
  if (first_layer_kernel_sizes.empty()) throw ConfigError("first_layer_kernel_sizes is empty");
  for (int k : first_layer_kernel_sizes) positive(k, "first layer kernel size");
  for (int k : dwsc_kernel_sizes) positive(k, "dwsc kernel size");
  for (int d : dwsc_dilations) positive(d, "dwsc dilation");
  for (int k : trend_filter_lengths) {
    if (k < 2 || k % 2 != 0) {
      throw ConfigError("trend filter length must be even, got " + std::to_string(k));
    }
  }
  for (int k : peak_filter_lengths) {
    if (k < 4 || k % 4 != 0) {
      throw ConfigError("peak filter length must be divisible by 4, got " + std::to_string(k));
    }
  }
  if (!(bn_epsilon > 0.0)) throw ConfigError("bn_epsilon must be > 0");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw ConfigError("bn_momentum must be in [0,1)");
}

CustomFilterBank build_custom_filters(const LiteArchitectureConfig& config) {
  config.validate();
  std::vector<int> lengths = config.trend_filter_lengths;
  lengths.insert(lengths.end(), config.peak_filter_lengths.begin(),
                 config.peak_filter_lengths.end());
  std::sort(lengths.begin(), lengths.end());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());

  auto has = [](const std::vector<int>& v, int k) {
    return std::find(v.begin(), v.end(), k) != v.end();
  };

  CustomFilterBank bank;
  for (int k : lengths) {
    const auto len = static_cast<std::size_t>(k);
    if (has(config.trend_filter_lengths, k)) {
      std::vector<double> inc(len, 1.0);
      std::fill_n(inc.begin(), len / 2, -1.0);
      std::vector<double> dec(len);
      std::transform(inc.begin(), inc.end(), dec.begin(), [](double v) { return -v; });
      bank.filters.push_back({FilterKind::Increasing, std::move(inc)});
      bank.filters.push_back({FilterKind::Decreasing, std::move(dec)});
    }
    if (has(config.peak_filter_lengths, k)) {
      const std::size_t m = len / 4;
      std::vector<double> peak(len, -1.0);
      std::fill(peak.begin() + static_cast<long>(m), peak.begin() + static_cast<long>(3 * m), 1.0);
      bank.filters.push_back({FilterKind::Peak, std::move(peak)});
    }
  }
  return bank;
}

std::vector<Tensor> CustomFilterBank::grouped_kernels() const {
  std::map<std::size_t, std::vector<const CustomFilter*>> by_length;
  for (const auto& f : filters) by_length[f.taps.size()].push_back(&f);
  std::vector<Tensor> out;
  for (const auto& [len, group] : by_length) {
    Tensor t(Shape{group.size(), 1, len}, 0.0);
    for (std::size_t i = 0; i < group.size(); ++i) {
      std::copy(group[i]->taps.begin(), group[i]->taps.end(), &t.at(i, 0, 0));
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------

LiteModel::LiteModel(LiteArchitectureConfig config, std::uint64_t seed,
                     std::vector<NamedTensor> parameters, std::array<BatchNormState, 3> bn_states)
    : config_(std::move(config)), seed_(seed), params_(std::move(parameters)),
      bn_(std::move(bn_states)), custom_(build_custom_filters(config_)) {}

const Tensor& LiteModel::parameter(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw UsageError("no parameter named " + std::string(name));
}

Tensor& LiteModel::parameter(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).parameter(name));
}

std::uint64_t LiteModel::parameter_checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) h = checksum_doubles(p.tensor.data(), h);
  return h;
}

std::uint64_t LiteModel::state_checksum() const {
  std::uint64_t h = parameter_checksum();
  for (const auto& s : bn_) {
    h = checksum_doubles(s.running_mean, h);
    h = checksum_doubles(s.running_var, h);
  }
  return h;
}

namespace {

std::size_t first_block_channels(const LiteArchitectureConfig& c, std::size_t custom) {
  return static_cast<std::size_t>(c.n_filters) * c.first_layer_kernel_sizes.size() + custom;
}

Tensor glorot(Rng& rng, Shape shape, double fan_in, double fan_out) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t(std::move(shape), 0.0);
  for (auto& v : t.data()) v = rng.uniform(-limit, limit);
  return t;
}

}  // namespace

LiteModel init_model(const LiteArchitectureConfig& config, std::uint64_t seed) {
  config.validate();
  const auto nf = static_cast<std::size_t>(config.n_filters);
  const auto ncls = static_cast<std::size_t>(config.n_classes);
  const std::size_t c1 = first_block_channels(config, build_custom_filters(config).size());
  Rng rng(seed);

  std::vector<NamedTensor> params;
  for (int k : config.first_layer_kernel_sizes) {
    const auto uk = static_cast<std::size_t>(k);
    params.push_back({"first.k" + std::to_string(k),
                      glorot(rng, Shape{nf, 1, uk}, double(uk), double(nf * uk))});
  }
  params.push_back({"bn1.gamma", Tensor(Shape{c1}, 1.0)});
  params.push_back({"bn1.beta", Tensor(Shape{c1}, 0.0)});
  std::size_t cin = c1;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto uk = static_cast<std::size_t>(config.dwsc_kernel_sizes[i]);
    const std::string p = "dwsc" + std::to_string(i + 1);
    params.push_back({p + ".depthwise", glorot(rng, Shape{cin, 1, uk}, double(uk), double(uk))});
    params.push_back({p + ".pointwise", glorot(rng, Shape{nf, cin, 1}, double(cin), double(nf))});
    params.push_back({"bn" + std::to_string(i + 2) + ".gamma", Tensor(Shape{nf}, 1.0)});
    params.push_back({"bn" + std::to_string(i + 2) + ".beta", Tensor(Shape{nf}, 0.0)});
    cin = nf;
  }
  params.push_back({"head.weight", glorot(rng, Shape{ncls, nf}, double(nf), double(ncls))});
  params.push_back({"head.bias", Tensor(Shape{ncls}, 0.0)});

  std::array<BatchNormState, 3> bn{BatchNormState::fresh(c1), BatchNormState::fresh(nf),
                                   BatchNormState::fresh(nf)};
  return LiteModel(config, seed, std::move(params), std::move(bn));
}

// ---------------------------------------------------------------------------

LiteForward forward(Graph& g, const LiteModel& model, const Tensor& x, BnMode mode,
                    bool trainable) {
  if (x.rank() != 3 || x.dim(1) != 1) {
    throw DimensionError("LITE input must be [B, 1, T], got " + shape_str(x.shape()));
  }
  std::vector<Var> params;
  for (const auto& p : model.parameters()) {
    params.push_back(trainable ? g.parameter(p.tensor) : g.input(p.tensor));
  }
  return forward(g, model, params, g.input(x), mode);
}

LiteForward forward(Graph& g, const LiteModel& model, std::span<const Var> params, Var input,
                    BnMode mode) {
  const auto& cfg = model.config();
  const Tensor& x = g.value(input);
  if (x.rank() != 3 || x.dim(1) != 1) {
    throw DimensionError("LITE input must be [B, 1, T], got " + shape_str(x.shape()));
  }
  if (params.size() != model.parameters().size()) {
    throw DimensionError("forward: expected " + std::to_string(model.parameters().size()) +
                         " parameter variables, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (g.value(params[i]).shape() != model.parameters()[i].tensor.shape()) {
      throw DimensionError("forward: parameter " + model.parameters()[i].name + " has shape " +
                           shape_str(g.value(params[i]).shape()));
    }
  }
  LiteForward out;
  out.bn_states = model.bn_states();
  out.params.assign(params.begin(), params.end());
  std::size_t cursor = 0;
  auto next = [&]() { return out.params.at(cursor++); };
  auto check = [&](Var v, const char* layer) {
    if (!g.value(v).all_finite()) throw NumericError(std::string("non-finite activations in ") + layer);
  };

  std::vector<Var> branches;
  for (std::size_t i = 0; i < cfg.first_layer_kernel_sizes.size(); ++i) {
    branches.push_back(conv1d(g, input, next(), std::nullopt, 1, 1));
  }
  for (auto& kernel : model.custom_filters().grouped_kernels()) {
    Var k = g.input(std::move(kernel));
    out.custom_kernels.push_back(k);
    branches.push_back(conv1d(g, input, k, std::nullopt, 1, 1));
  }
  Var h = concat_channels(g, branches);
  {
    Var gamma = next(), beta = next();
    h = batch_norm_1d(g, h, gamma, beta, out.bn_states[0], mode, cfg.bn_momentum, cfg.bn_epsilon);
    check(h, "block 1 (multiplexed + custom convolutions)");
    h = relu(g, h);
  }

  static constexpr const char* kBlockNames[] = {"block 2 (dwsc 1)", "block 3 (dwsc 2)"};
  for (std::size_t i = 0; i < 2; ++i) {
    const int channels = static_cast<int>(g.value(h).dim(1));
    Var dw = next(), pw = next();
    h = conv1d(g, h, dw, std::nullopt, cfg.dwsc_dilations[i], channels);
    h = conv1d(g, h, pw, std::nullopt, 1, 1);
    Var gamma = next(), beta = next();
    h = batch_norm_1d(g, h, gamma, beta, out.bn_states[i + 1], mode, cfg.bn_momentum,
                      cfg.bn_epsilon);
    check(h, kBlockNames[i]);
    h = relu(g, h);
  }
  out.features = h;

  Var pooled = global_avg_pool(g, h);
  Var w = next(), b = next();
  out.logits = dense(g, pooled, w, b);
  check(out.logits, "head");
  return out;
}

LiteOutputs infer(const LiteModel& model, const Tensor& x, std::size_t chunk) {
  if (x.rank() != 3) throw DimensionError("infer: input must be [N, 1, T]");
  const std::size_t n = x.dim(0), length = x.dim(2);
  const auto ncls = static_cast<std::size_t>(model.config().n_classes);
  const auto nf = static_cast<std::size_t>(model.config().n_filters);
  LiteOutputs out{Tensor(Shape{n, ncls}, 0.0), Tensor(Shape{n, nf, length}, 0.0)};
  chunk = std::max<std::size_t>(chunk, 1);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t count = std::min(chunk, n - start);
    Tensor part(Shape{count, 1, length},
                std::vector<double>(x.data().begin() + static_cast<long>(start * length),
                                    x.data().begin() + static_cast<long>((start + count) * length)));
    Graph g;
    LiteForward f = forward(g, model, part, BnMode::Eval, /*trainable=*/false);
    const Tensor& lg = g.value(f.logits);
    const Tensor& ft = g.value(f.features);
    std::copy(lg.data().begin(), lg.data().end(), out.logits.data().begin() + static_cast<long>(start * ncls));
    std::copy(ft.data().begin(), ft.data().end(),
              out.features.data().begin() + static_cast<long>(start * nf * length));
  }
  return out;
}

std::int64_t param_count(const LiteModel& model) {
  std::int64_t n = 0;
  for (const auto& p : model.parameters()) n += static_cast<std::int64_t>(p.tensor.numel());
  return n;
}

double ratio_vs_reference(std::int64_t count, std::int64_t reference_count) {
  if (reference_count <= 0) throw UsageError("reference parameter count must be positive");
  return static_cast<double>(count) / static_cast<double>(reference_count);
}

FinalFilterBank extract_final_filters(const LiteModel& model) {
  const Tensor& dw = model.parameter("dwsc2.depthwise");
  FinalFilterBank bank;
  bank.channels = dw.dim(0);
  bank.kernel_length = dw.dim(2);
  bank.filters = dw.reshaped(Shape{bank.channels, bank.kernel_length});
  bank.default_shape = bank.channels == 32 && bank.kernel_length == 20;
  return bank;
}

}  // namespace deco
