#include "deco/random.hpp"
#include "deco/ucr_data.hpp"

namespace deco {

TimeSeriesDataset make_synthetic_dataset(std::size_t n, std::size_t length, std::uint64_t seed,
                                         Split split) {
  Rng rng(seed);
  RawSplit raw;
  const double denom = length > 1 ? static_cast<double>(length - 1) : 1.0;
  while (raw.series.size() < n) {
    // Ramps through zero: the sign of the slope fixes the sign of the mean,
    // and the trend direction survives z-normalisation.
    const double direction = raw.series.size() % 2 == 0 ? 1.0 : -1.0;
    const double slope = direction * rng.uniform(0.5, 1.5);
    const double offset = direction * rng.uniform(0.2, 0.6);
    std::vector<double> s(length);
    double mean = 0.0;
    for (std::size_t t = 0; t < length; ++t) {
      s[t] = offset + slope * (static_cast<double>(t) / denom - 0.5) + 0.1 * rng.normal();
      mean += s[t];
    }
    raw.labels.push_back(mean >= 0.0 ? "1" : "-1");
    raw.series.push_back(std::move(s));
  }
  LabelMap map = LabelMap::from_labels(std::vector<std::string>{"-1", "1"});
  return make_dataset("Synthetic", split, raw, map, length);
}

}  // namespace deco
