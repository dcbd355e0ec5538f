#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deco/lite_model.hpp"
#include "deco/tensor.hpp"

namespace deco {

// Mean of the members' softmax probabilities, [N, n_classes].
// ConfigError when the members disagree on n_classes; UsageError when empty.
Tensor ensemble_predict(std::span<const LiteModel> models, const Tensor& x);

// Row argmax; ties go to the lowest class index.
std::vector<int> predicted_classes(const Tensor& probabilities);

// Fraction of equal entries. UsageError when empty, DimensionError on a
// length mismatch.
double accuracy(std::span<const int> predicted, std::span<const int> truth);

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double p_value = 1.0;    // two-sided
  std::size_t n_effective = 0;
  bool exact = false;
  bool degenerate = false;  // every difference was zero
};

// Signed-rank test on paired samples. Zero differences are dropped and tied
// magnitudes share their average rank. Exact null distribution for up to 25
// non-zero differences, otherwise the normal approximation with tie and
// continuity corrections.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

// Both paths over an explicit list of non-zero differences.
WilcoxonResult wilcoxon_exact(std::span<const double> differences);
WilcoxonResult wilcoxon_normal(std::span<const double> differences);

// "< 1e-12" for underflowing p-values, otherwise the value with 6 significant digits.
std::string format_p_value(double p);

// Accuracy per (classifier, dataset).
struct ResultsTable {
  std::vector<std::string> classifiers;
  std::vector<std::string> datasets;
  std::vector<std::vector<double>> acc;  // [classifier][dataset]

  // Throws InputError on shape mismatch or values outside [0, 1]. Missing
  // cells are stored as NaN and only accepted with allow_missing.
  void validate(bool allow_missing = false) const;
  // CSV with a header row of classifier names; one row per dataset. Missing
  // cells are written empty.
  std::string to_csv() const;
  static ResultsTable from_csv(std::string_view text, bool allow_missing = false);
  static ResultsTable load(const std::filesystem::path& path, bool allow_missing = false);

  // Sets one cell, adding the row or column when new (other new cells missing).
  void set(const std::string& classifier, const std::string& dataset, double value);
};

struct WinTieLoss {
  int wins = 0;
  int ties = 0;
  int losses = 0;
};

struct MCMReport {
  std::vector<std::string> classifiers;  // by descending mean accuracy
  std::vector<double> mean_accuracy;
  std::vector<std::vector<double>> mean_diff;  // row minus column
  std::vector<std::vector<WinTieLoss>> win_tie_loss;
  std::vector<std::vector<double>> p_value;
  std::vector<std::vector<bool>> significant;  // p < 0.05
  std::vector<std::vector<bool>> degenerate;

  std::string to_json() const;
  // One row per ordered pair (a, b), a != b.
  std::string pairwise_csv() const;
};

// UsageError for fewer than two classifiers.
MCMReport mcm(const ResultsTable& table);

}  // namespace deco
