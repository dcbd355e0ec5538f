#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "deco/ensemble_eval.hpp"
#include "deco/errors.hpp"

namespace deco {

namespace {

constexpr std::size_t kExactLimit = 25;

// Average ranks of |d|, doubled so that half ranks stay integral.
std::vector<long> doubled_ranks(std::span<const double> d, double* tie_term) {
  const std::size_t n = d.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return std::fabs(d[a]) < std::fabs(d[b]); });
  std::vector<long> ranks(n);
  double ties = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && std::fabs(d[idx[j + 1]]) == std::fabs(d[idx[i]])) ++j;
    // positions i..j hold ranks i+1..j+1; doubled average = i + j + 2
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = static_cast<long>(i + j + 2);
    const double t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  if (tie_term) *tie_term = ties;
  return ranks;
}

void check_nonzero(std::span<const double> d) {
  for (double v : d) {
    if (v == 0.0) throw UsageError("wilcoxon: zero differences must be dropped first");
    if (!std::isfinite(v)) throw InputError("wilcoxon: non-finite difference");
  }
}

}  // namespace

WilcoxonResult wilcoxon_exact(std::span<const double> differences) {
  check_nonzero(differences);
  WilcoxonResult r;
  r.exact = true;
  r.n_effective = differences.size();
  if (differences.empty()) {
    r.degenerate = true;
    return r;
  }
  const auto ranks = doubled_ranks(differences, nullptr);
  long total = 0, plus = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    total += ranks[i];
    if (differences[i] > 0) plus += ranks[i];
  }
  const long w = std::min(plus, total - plus);

  // counts[s]: number of sign assignments whose positive doubled-rank sum is s
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  long reach = 0;
  for (long rk : ranks) {
    for (long s = reach; s >= 0; --s) {
      if (counts[static_cast<std::size_t>(s)] != 0.0) counts[static_cast<std::size_t>(s + rk)] += counts[static_cast<std::size_t>(s)];
    }
    reach += rk;
  }
  double tail = 0.0;
  for (long s = 0; s <= w; ++s) tail += counts[static_cast<std::size_t>(s)];
  const double all = std::ldexp(1.0, static_cast<int>(ranks.size()));
  r.statistic = static_cast<double>(w) / 2.0;
  r.p_value = std::min(1.0, 2.0 * tail / all);
  return r;
}

WilcoxonResult wilcoxon_normal(std::span<const double> differences) {
  check_nonzero(differences);
  WilcoxonResult r;
  r.n_effective = differences.size();
  if (differences.empty()) {
    r.degenerate = true;
    return r;
  }
  double ties = 0.0;
  const auto ranks = doubled_ranks(differences, &ties);
  double plus = 0.0, total = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    total += static_cast<double>(ranks[i]) / 2.0;
    if (differences[i] > 0) plus += static_cast<double>(ranks[i]) / 2.0;
  }
  const double n = static_cast<double>(ranks.size());
  const double w = std::min(plus, total - plus);
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
  r.statistic = w;
  if (var <= 0.0) return r;
  const double z = std::max(0.0, mean - w - 0.5) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("wilcoxon: samples differ in length");
  if (a.empty()) throw UsageError("wilcoxon: empty samples");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = a[i] - b[i];
    if (!std::isfinite(v)) throw InputError("wilcoxon: non-finite sample");
    if (v != 0.0) d.push_back(v);
  }
  if (d.empty()) {
    WilcoxonResult r;
    r.degenerate = true;
    r.exact = true;
    return r;
  }
  return d.size() <= kExactLimit ? wilcoxon_exact(d) : wilcoxon_normal(d);
}

std::string format_p_value(double p) {
  if (p < 1e-12) return "< 1e-12";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", p);
  return buf;
}

}  // namespace deco
