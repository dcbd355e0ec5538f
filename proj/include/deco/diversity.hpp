#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deco/lite_model.hpp"
#include "deco/tensor.hpp"

namespace deco {

// Gaussian summary of per-sample feature vectors.
struct FeatureStats {
  std::string model_id;
  std::size_t dim = 0;
  std::vector<double> mu;     // [dim]
  std::vector<double> sigma;  // [dim * dim], row-major, unbiased covariance
  std::size_t count = 0;

  double cov(std::size_t i, std::size_t j) const { return sigma[i * dim + j]; }
  std::string to_json() const;
};

// Statistics of raw feature rows (all rows equally long). UsageError for
// fewer than two rows.
FeatureStats feature_statistics(const std::vector<std::vector<double>>& rows,
                                std::string model_id = {});

// Time-averaged final-block features of the model (eval mode) on x [N, 1, T].
FeatureStats feature_statistics(const LiteModel& model, const Tensor& x,
                                std::string model_id = {});

// Per-sample time-averaged final-block features, [N][n_filters].
std::vector<std::vector<double>> pooled_features(const LiteModel& model, const Tensor& x);

// Frechet distance between the two Gaussians. InputError when a covariance is
// asymmetric beyond 1e-9, DimensionError on mismatched sizes.
double fid(const FeatureStats& a, const FeatureStats& b);

// Accumulated squared-difference cost of the optimal monotone alignment
// (full table, no window). UsageError for empty input.
double dtw(std::span<const double> a, std::span<const double> b);

struct FilterDistanceMatrix {
  std::vector<std::pair<std::size_t, std::size_t>> labels;  // (model, filter)
  std::vector<double> d;                                    // [n * n]

  std::size_t size() const noexcept { return labels.size(); }
  double at(std::size_t i, std::size_t j) const { return d[i * labels.size() + j]; }
  // Header row "model:filter" labels, then one row per filter.
  std::string to_csv() const;
};

// DTW between every pair of final-block depthwise filters of all models.
// ConfigError when the models' filter banks differ in shape.
FilterDistanceMatrix filter_distance_matrix(std::span<const LiteModel> models);

struct Embedding2D {
  std::vector<std::array<double, 2>> coords;
  bool degenerate = false;  // all distances zero; every point at the origin

  std::string to_csv(const std::vector<std::pair<std::size_t, std::size_t>>& labels) const;
};

// Classical multidimensional scaling to two dimensions. Each axis is signed
// so that its first non-negligible coordinate is positive. UsageError for
// fewer than three points, InputError for a non-symmetric matrix.
Embedding2D embed_2d(const FilterDistanceMatrix& matrix);
Embedding2D embed_2d(std::size_t n, std::span<const double> distances);

}  // namespace deco
