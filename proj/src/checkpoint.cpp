#include "deco/errors.hpp"
#include "deco/lite_model.hpp"
#include "deco/serialize.hpp"

namespace deco {

namespace {

constexpr std::string_view kMagic = "DECOLITE";
constexpr std::uint32_t kVersion = 1;

void write_ints(BinaryWriter& w, const std::vector<int>& v) {
  w.u64(v.size());
  for (int x : v) w.i64(x);
}

std::vector<int> read_ints(BinaryReader& r) {
  const auto n = r.u64();
  if (n > r.remaining() / 8) throw FormatError("truncated int list");
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(r.i64());
  return v;
}

}  // namespace

std::string checkpoint_bytes(const LiteModel& model) {
  const auto& c = model.config();
  BinaryWriter w;
  w.i64(c.n_filters);
  write_ints(w, c.first_layer_kernel_sizes);
  write_ints(w, {c.dwsc_kernel_sizes.begin(), c.dwsc_kernel_sizes.end()});
  write_ints(w, {c.dwsc_dilations.begin(), c.dwsc_dilations.end()});
  write_ints(w, c.trend_filter_lengths);
  write_ints(w, c.peak_filter_lengths);
  w.i64(c.n_classes);
  w.f64(c.bn_momentum);
  w.f64(c.bn_epsilon);
  w.u64(model.seed());

  w.u64(model.parameters().size());
  for (const auto& p : model.parameters()) {
    w.str(p.name);
    w.u64(p.tensor.rank());
    for (auto d : p.tensor.shape()) w.u64(d);
    w.f64s(p.tensor.data());
  }
  for (const auto& s : model.bn_states()) {
    w.f64s(s.running_mean);
    w.f64s(s.running_var);
  }
  return seal(kMagic, kVersion, w.bytes());
}

LiteModel model_from_checkpoint_bytes(std::string_view bytes) {
  const std::string payload = unseal(kMagic, kVersion, bytes);
  BinaryReader r(payload);
  LiteArchitectureConfig c;
  c.n_filters = static_cast<int>(r.i64());
  c.first_layer_kernel_sizes = read_ints(r);
  auto ks = read_ints(r);
  auto ds = read_ints(r);
  if (ks.size() != 2 || ds.size() != 2) throw FormatError("checkpoint: bad dwsc config");
  c.dwsc_kernel_sizes = {ks[0], ks[1]};
  c.dwsc_dilations = {ds[0], ds[1]};
  c.trend_filter_lengths = read_ints(r);
  c.peak_filter_lengths = read_ints(r);
  c.n_classes = static_cast<int>(r.i64());
  c.bn_momentum = r.f64();
  c.bn_epsilon = r.f64();
  const std::uint64_t seed = r.u64();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: invalid config: ") + e.what());
  }

  // The stored tensors must match what this config builds.
  LiteModel reference = init_model(c, seed);
  const auto count = r.u64();
  if (count != reference.parameters().size()) throw FormatError("checkpoint: parameter count");
  std::vector<NamedTensor> params;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto rank = r.u64();
    if (rank > 3) throw FormatError("checkpoint: rank > 3");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    std::vector<double> data = r.f64s();
    const auto& expect = reference.parameters()[i];
    if (name != expect.name || shape != expect.tensor.shape()) {
      throw FormatError("checkpoint: unexpected tensor " + name + " " + shape_str(shape));
    }
    params.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  std::array<BatchNormState, 3> bn;
  for (std::size_t i = 0; i < 3; ++i) {
    bn[i].running_mean = r.f64s();
    bn[i].running_var = r.f64s();
    if (bn[i].running_mean.size() != reference.bn_states()[i].running_mean.size() ||
        bn[i].running_var.size() != reference.bn_states()[i].running_var.size()) {
      throw FormatError("checkpoint: running statistics size");
    }
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  return LiteModel(c, seed, std::move(params), std::move(bn));
}

void save_checkpoint(const LiteModel& model, const std::filesystem::path& path) {
  write_file(path, checkpoint_bytes(model));
}

LiteModel load_checkpoint(const std::filesystem::path& path) {
  return model_from_checkpoint_bytes(read_file(path));
}

}  // namespace deco
