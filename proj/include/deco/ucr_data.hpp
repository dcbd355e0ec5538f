#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deco/tensor.hpp"

namespace deco {

enum class Split { Train, Test };
std::string_view split_name(Split split);

// Rows of one UCR .tsv file in file order.
struct RawSplit {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> series;
};

// Parses "<label>\t<v1>\t<v2>..." lines. Missing values may be written as NaN.
// Rows of differing length are a FormatError unless allow_variable_length.
RawSplit parse_ucr_tsv(std::string_view text, bool allow_variable_length,
                       const std::string& source = "<memory>");

// Reads <root>/<name>/<name>_TRAIN.tsv or _TEST.tsv.
RawSplit load_ucr_split(const std::filesystem::path& root, const std::string& name, Split split,
                        bool allow_variable_length = false);

// Original label strings ordered by numeric value; position = class index.
class LabelMap {
 public:
  LabelMap() = default;
  // Throws DataError on unparseable or empty label sets.
  static LabelMap from_labels(std::span<const std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  // Throws DataError for a label outside the map.
  int index_of(const std::string& label) const;
  const std::string& label_of(std::size_t index) const { return labels_.at(index); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
};

// (x - mean) / std with the population std; constant series (std < 1e-8)
// map to zeros.
std::vector<double> z_normalize(std::span<const double> series);

// Linear interpolation over interior NaN runs, nearest value at the edges.
// Throws DataError for an all-NaN series.
std::vector<double> interpolate_missing(std::span<const double> series);

// Interpolates missing values and right-pads every series with zeros to
// `target_length` (default: the longest series in the set).
std::vector<std::vector<double>> handle_irregular(std::vector<std::vector<double>> series_set,
                                                  std::optional<std::size_t> target_length = {});

struct TimeSeriesDataset {
  std::string name;
  Split split = Split::Train;
  Tensor X;               // [N, 1, T], z-normalised
  std::vector<int> y;     // class indices in 0..C-1
  Tensor Y;               // [N, C] one-hot
  LabelMap label_map;

  std::size_t size() const { return y.size(); }
  std::size_t length() const { return X.dim(2); }
  std::size_t n_classes() const { return label_map.size(); }

  Tensor batch_x(std::span<const std::size_t> indices) const;
  Tensor batch_y(std::span<const std::size_t> indices) const;
};

// Interpolate, z-normalise, then pad to target_length.
TimeSeriesDataset make_dataset(std::string name, Split split, const RawSplit& raw,
                               const LabelMap& label_map, std::size_t target_length);

struct DatasetPair {
  TimeSeriesDataset train;
  TimeSeriesDataset test;
};

// Loads both splits with one shared label map (built from the train split).
// The train split is padded to its longest series; the test split to the
// larger of that and its own longest series.
DatasetPair load_ucr_dataset(const std::filesystem::path& root, const std::string& name,
                             bool allow_variable_length = false);

// Shuffled index batches for one epoch. The permutation depends only on
// (seed, epoch). A trailing batch of one sample is merged into the previous
// batch because batch norm needs at least two. Throws DataError when n < 2.
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t seed, std::uint64_t epoch);

// Normalised-dataset cache with checksum.
std::string dataset_cache_bytes(const TimeSeriesDataset& ds);
TimeSeriesDataset dataset_from_cache_bytes(std::string_view bytes);
void save_dataset_cache(const TimeSeriesDataset& ds, const std::filesystem::path& path);
TimeSeriesDataset load_dataset_cache(const std::filesystem::path& path);

// Bundled offline dataset: two classes separated by trend direction (the
// class is the sign of the raw series mean), z-normalised.
TimeSeriesDataset make_synthetic_dataset(std::size_t n = 32, std::size_t length = 16,
                                         std::uint64_t seed = 7, Split split = Split::Train);

}  // namespace deco
