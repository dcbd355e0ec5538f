#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deco/graph.hpp"
#include "deco/ops.hpp"
#include "deco/tensor.hpp"

namespace deco {

// Architecture of one LITE classifier:
//   block 1: multiplexed convolutions (one per kernel size, n_filters each)
//            concatenated with the frozen custom filters, then BN + ReLU
//   block 2/3: depthwise separable convolutions (dilated depthwise kernel,
//            1x1 pointwise to n_filters), each followed by BN + ReLU
//   head: global average pooling and a dense layer to n_classes logits
struct LiteArchitectureConfig {
  int n_filters = 32;
  std::vector<int> first_layer_kernel_sizes{40, 20, 10};
  std::array<int, 2> dwsc_kernel_sizes{20, 20};
  std::array<int, 2> dwsc_dilations{2, 4};
  std::vector<int> trend_filter_lengths{2, 4, 8, 16, 32, 64};
  std::vector<int> peak_filter_lengths{4, 8, 16, 32, 64};
  int n_classes = 2;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  // Throws ConfigError on non-positive sizes or invalid custom filter lengths.
  void validate() const;
  friend bool operator==(const LiteArchitectureConfig&, const LiteArchitectureConfig&) = default;
};

// InceptionTime trainable parameter count used as the size reference.
inline constexpr std::int64_t kInceptionTimeReferenceParams = 420192;

enum class FilterKind { Increasing, Decreasing, Peak };

struct CustomFilter {
  FilterKind kind;
  std::vector<double> taps;
};

// Hand-crafted trend and peak detectors. Never trained. Filters are ordered by
// length, then increasing / decreasing / peak, which is also their channel
// order in the first block.
struct CustomFilterBank {
  std::vector<CustomFilter> filters;

  std::size_t size() const noexcept { return filters.size(); }
  // One [n, 1, L] kernel tensor per distinct length L, ascending.
  std::vector<Tensor> grouped_kernels() const;
};

// increasing (even k):  [-1]*(k/2) ++ [+1]*(k/2)
// decreasing:           negation of increasing
// peak (k = 4m):        [-1]*m ++ [+1]*(2m) ++ [-1]*m
CustomFilterBank build_custom_filters(const LiteArchitectureConfig& config);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

class LiteModel {
 public:
  LiteModel() = default;
  LiteModel(LiteArchitectureConfig config, std::uint64_t seed,
            std::vector<NamedTensor> parameters, std::array<BatchNormState, 3> bn_states);

  const LiteArchitectureConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }

  // Trainable tensors in canonical order.
  std::vector<NamedTensor>& parameters() noexcept { return params_; }
  const std::vector<NamedTensor>& parameters() const noexcept { return params_; }
  const Tensor& parameter(std::string_view name) const;
  Tensor& parameter(std::string_view name);

  std::array<BatchNormState, 3>& bn_states() noexcept { return bn_; }
  const std::array<BatchNormState, 3>& bn_states() const noexcept { return bn_; }

  const CustomFilterBank& custom_filters() const noexcept { return custom_; }

  // FNV-1a over the bits of every trainable tensor.
  std::uint64_t parameter_checksum() const;
  // Parameters plus running statistics.
  std::uint64_t state_checksum() const;

 private:
  LiteArchitectureConfig config_;
  std::uint64_t seed_ = 0;
  std::vector<NamedTensor> params_;
  std::array<BatchNormState, 3> bn_;
  CustomFilterBank custom_;
};

// Glorot-uniform kernels, zero biases, gamma = 1, beta = 0, fresh running
// statistics. Bit-identical for identical (config, seed).
LiteModel init_model(const LiteArchitectureConfig& config, std::uint64_t seed);

struct LiteForward {
  Var logits;    // [B, n_classes]
  Var features;  // [B, n_filters, T], post-activation output of block 3
  std::vector<Var> params;         // same order as LiteModel::parameters()
  std::vector<Var> custom_kernels;  // frozen bank, registered as constants
  std::array<BatchNormState, 3> bn_states;  // updated copies in train mode
};

// Records the forward pass on `g`. In train mode the batch statistics are
// used and the refreshed running statistics are returned in the result; the
// model itself is untouched. With `trainable` false the parameters enter the
// graph as constants. Throws NumericError naming the block on non-finite
// activations.
LiteForward forward(Graph& g, const LiteModel& model, const Tensor& x, BnMode mode,
                    bool trainable = true);

// Same network on caller-supplied variables: `params` in canonical order and
// an input of shape [B, 1, T]. The model supplies the configuration, the
// frozen filters and the running statistics.
LiteForward forward(Graph& g, const LiteModel& model, std::span<const Var> params, Var input,
                    BnMode mode);

struct LiteOutputs {
  Tensor logits;
  Tensor features;
};

// Eval-mode forward without gradients, processed in chunks of `chunk` samples.
LiteOutputs infer(const LiteModel& model, const Tensor& x, std::size_t chunk = 64);

// Exact trainable parameter count (frozen custom filters excluded).
std::int64_t param_count(const LiteModel& model);
double ratio_vs_reference(std::int64_t count, std::int64_t reference_count);

struct FinalFilterBank {
  Tensor filters;  // [channels, kernel_length]
  std::size_t channels = 0;
  std::size_t kernel_length = 0;
  bool default_shape = false;  // true when 32 x 20
};

// Depthwise kernels of the final block, one row per channel.
FinalFilterBank extract_final_filters(const LiteModel& model);

// Versioned binary checkpoint with checksum; round trip is bit-exact.
std::string checkpoint_bytes(const LiteModel& model);
LiteModel model_from_checkpoint_bytes(std::string_view bytes);
void save_checkpoint(const LiteModel& model, const std::filesystem::path& path);
LiteModel load_checkpoint(const std::filesystem::path& path);

}  // namespace deco
