#include "deco/ucr_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "deco/errors.hpp"
#include "deco/random.hpp"
#include "deco/serialize.hpp"

namespace deco {

std::string_view split_name(Split split) { return split == Split::Train ? "TRAIN" : "TEST"; }

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_value(std::string_view token, const std::string& where) {
  token = trim(token);
  if (token == "NaN" || token == "nan" || token == "?" || token.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  // strtod accepts forms from_chars rejects (e.g. leading '+').
  std::string copy(token);
  char* end = nullptr;
  const double v = std::strtod(copy.c_str(), &end);
  if (end != copy.c_str() + copy.size()) throw FormatError("bad number '" + copy + "' in " + where);
  return v;
}

}  // namespace

RawSplit parse_ucr_tsv(std::string_view text, bool allow_variable_length,
                       const std::string& source) {
  RawSplit out;
  std::size_t line_no = 0;
  std::optional<std::size_t> width;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2) throw FormatError("row without values at " + where);
    if (!width) width = fields.size();
    if (*width != fields.size() && !allow_variable_length) {
      throw FormatError("ragged row at " + where + " (" + std::to_string(fields.size() - 1) +
                        " values, expected " + std::to_string(*width - 1) + ")");
    }
    std::string label(trim(fields[0]));
    if (std::isnan(parse_value(label, where))) throw FormatError("missing label at " + where);
    std::vector<double> values;
    values.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) values.push_back(parse_value(fields[i], where));
    out.labels.push_back(std::move(label));
    out.series.push_back(std::move(values));
  }
  return out;
}

RawSplit load_ucr_split(const std::filesystem::path& root, const std::string& name, Split split,
                        bool allow_variable_length) {
  const auto path = root / name / (name + "_" + std::string(split_name(split)) + ".tsv");
  if (!std::filesystem::exists(path)) throw IoError("missing UCR file " + path.string());
  return parse_ucr_tsv(read_file(path), allow_variable_length, path.string());
}

// ---------------------------------------------------------------------------

LabelMap LabelMap::from_labels(std::span<const std::string> labels) {
  if (labels.empty()) throw DataError("empty label set");
  std::vector<std::pair<double, std::string>> uniq;
  for (const auto& l : labels) {
    char* end = nullptr;
    const double v = std::strtod(l.c_str(), &end);
    if (end == l.c_str() || *end != '\0') throw DataError("non-numeric label '" + l + "'");
    uniq.emplace_back(v, l);
  }
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end(),
                         [](const auto& a, const auto& b) { return a.first == b.first; }),
             uniq.end());
  LabelMap map;
  for (auto& [v, s] : uniq) {
    map.values_.push_back(v);
    map.labels_.push_back(s);
  }
  return map;
}

int LabelMap::index_of(const std::string& label) const {
  char* end = nullptr;
  const double v = std::strtod(label.c_str(), &end);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] == v && end != label.c_str()) return static_cast<int>(i);
  }
  throw DataError("label '" + label + "' not present in the training label set");
}

// ---------------------------------------------------------------------------

std::vector<double> z_normalize(std::span<const double> series) {
  if (series.empty()) throw UsageError("z_normalize: empty series");
  const double n = static_cast<double>(series.size());
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(series.size(), 0.0);
  if (sd < 1e-8) return out;
  for (std::size_t i = 0; i < series.size(); ++i) out[i] = (series[i] - mean) / sd;
  return out;
}

std::vector<double> interpolate_missing(std::span<const double> series) {
  std::vector<double> out(series.begin(), series.end());
  std::vector<std::size_t> known;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isnan(out[i])) known.push_back(i);
  }
  if (known.empty()) throw DataError("series contains only missing values");
  if (known.size() == out.size()) return out;
  for (std::size_t i = 0; i < known.front(); ++i) out[i] = out[known.front()];
  for (std::size_t i = known.back() + 1; i < out.size(); ++i) out[i] = out[known.back()];
  for (std::size_t k = 0; k + 1 < known.size(); ++k) {
    const std::size_t a = known[k], b = known[k + 1];
    for (std::size_t i = a + 1; i < b; ++i) {
      const double frac = static_cast<double>(i - a) / static_cast<double>(b - a);
      out[i] = out[a] + frac * (out[b] - out[a]);
    }
  }
  return out;
}

std::vector<std::vector<double>> handle_irregular(std::vector<std::vector<double>> series_set,
                                                  std::optional<std::size_t> target_length) {
  std::size_t longest = 0;
  for (auto& s : series_set) {
    s = interpolate_missing(s);
    longest = std::max(longest, s.size());
  }
  const std::size_t target = target_length.value_or(longest);
  for (auto& s : series_set) {
    if (s.size() > target) throw DataError("series longer than target length");
    s.resize(target, 0.0);
  }
  return series_set;
}

TimeSeriesDataset make_dataset(std::string name, Split split, const RawSplit& raw,
                               const LabelMap& label_map, std::size_t target_length) {
  const std::size_t n = raw.series.size();
  if (n == 0) throw DataError("dataset " + name + " has no rows");
  std::vector<std::vector<double>> normalised;
  normalised.reserve(n);
  for (const auto& s : raw.series) normalised.push_back(z_normalize(interpolate_missing(s)));
  normalised = handle_irregular(std::move(normalised), target_length);

  TimeSeriesDataset ds;
  ds.name = std::move(name);
  ds.split = split;
  ds.label_map = label_map;
  ds.X = Tensor(Shape{n, 1, target_length}, 0.0);
  ds.Y = Tensor(Shape{n, label_map.size()}, 0.0);
  ds.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(normalised[i].begin(), normalised[i].end(), &ds.X.at(i, 0, 0));
    ds.y[i] = label_map.index_of(raw.labels[i]);
    ds.Y.at(i, static_cast<std::size_t>(ds.y[i])) = 1.0;
  }
  require_finite(ds.X, "dataset " + ds.name);
  return ds;
}

DatasetPair load_ucr_dataset(const std::filesystem::path& root, const std::string& name,
                             bool allow_variable_length) {
  RawSplit train = load_ucr_split(root, name, Split::Train, allow_variable_length);
  RawSplit test = load_ucr_split(root, name, Split::Test, allow_variable_length);
  LabelMap map = LabelMap::from_labels(train.labels);
  std::size_t train_len = 0, test_len = 0;
  for (const auto& s : train.series) train_len = std::max(train_len, s.size());
  for (const auto& s : test.series) test_len = std::max(test_len, s.size());
  return DatasetPair{make_dataset(name, Split::Train, train, map, train_len),
                     make_dataset(name, Split::Test, test, map, std::max(train_len, test_len))};
}

Tensor TimeSeriesDataset::batch_x(std::span<const std::size_t> indices) const {
  const std::size_t t = length();
  Tensor out(Shape{indices.size(), 1, t}, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(&X.at(indices[i], 0, 0), t, &out.at(i, 0, 0));
  }
  return out;
}

Tensor TimeSeriesDataset::batch_y(std::span<const std::size_t> indices) const {
  const std::size_t c = n_classes();
  Tensor out(Shape{indices.size(), c}, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(&Y.at(indices[i], 0), c, &out.at(i, 0));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t seed, std::uint64_t epoch) {
  if (n < 2) throw DataError("need at least two samples to form batches, got " + std::to_string(n));
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(mix_seed(seed) ^ mix_seed(epoch + 0x632be59bd9b4e019ULL));
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(perm.begin() + static_cast<long>(start), perm.begin() + static_cast<long>(end));
  }
  if (out.size() >= 2 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back()[0]);
    out.pop_back();
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::string_view kCacheMagic = "DECODATA";
constexpr std::uint32_t kCacheVersion = 1;
}  // namespace

std::string dataset_cache_bytes(const TimeSeriesDataset& ds) {
  BinaryWriter w;
  w.str(ds.name);
  w.u8(ds.split == Split::Train ? 0 : 1);
  w.u64(ds.label_map.size());
  for (const auto& l : ds.label_map.labels()) w.str(l);
  w.u64(ds.size());
  w.u64(ds.length());
  for (int y : ds.y) w.i64(y);
  w.f64s(ds.X.data());
  return seal(kCacheMagic, kCacheVersion, w.bytes());
}

TimeSeriesDataset dataset_from_cache_bytes(std::string_view bytes) {
  const std::string payload = unseal(kCacheMagic, kCacheVersion, bytes);
  BinaryReader r(payload);
  TimeSeriesDataset ds;
  ds.name = r.str();
  ds.split = r.u8() == 0 ? Split::Train : Split::Test;
  std::vector<std::string> labels(r.u64());
  for (auto& l : labels) l = r.str();
  ds.label_map = LabelMap::from_labels(labels);
  if (ds.label_map.labels() != labels) throw FormatError("cache: label map not canonical");
  const auto n = r.u64();
  const auto t = r.u64();
  ds.y.resize(n);
  for (auto& y : ds.y) {
    y = static_cast<int>(r.i64());
    if (y < 0 || static_cast<std::size_t>(y) >= labels.size()) throw FormatError("cache: bad label");
  }
  ds.X = Tensor(Shape{n, 1, t}, r.f64s());
  ds.Y = Tensor(Shape{n, labels.size()}, 0.0);
  for (std::size_t i = 0; i < n; ++i) ds.Y.at(i, static_cast<std::size_t>(ds.y[i])) = 1.0;
  if (r.remaining() != 0) throw FormatError("cache: trailing bytes");
  return ds;
}

void save_dataset_cache(const TimeSeriesDataset& ds, const std::filesystem::path& path) {
  write_file(path, dataset_cache_bytes(ds));
}

TimeSeriesDataset load_dataset_cache(const std::filesystem::path& path) {
  return dataset_from_cache_bytes(read_file(path));
}

}  // namespace deco
