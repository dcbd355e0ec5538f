#pragma once

// Data-parallel inner loops used by the tensor ops.
//
// Every kernel has a portable scalar reference in deco::simd::scalar and, on
// x86-64, an AVX2+FMA variant in deco::simd::avx2. The active table is picked
// once at startup from CPUID; DECO_ISA=scalar|avx2 overrides the choice.
// Within one ISA every kernel uses a fixed accumulation order, so results are
// bit-reproducible run to run. Across ISAs results agree to rounding only.

#include <cstddef>
#include <span>
#include <string_view>

namespace deco::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // sum_i x[i]
  double (*sum)(const double* x, std::size_t n);
  // y[i] = scale * x[i] + shift
  void (*affine)(const double* x, double scale, double shift, double* y, std::size_t n);
};

namespace scalar {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
void affine(const double* x, double scale, double shift, double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
void affine(const double* x, double scale, double shift, double* y, std::size_t n);
}  // namespace avx2

bool isa_supported(Isa isa);
const KernelTable& table_for(Isa isa);

// Kernels currently in use.
const KernelTable& active();
Isa active_isa();
// Switch the process-wide table. Throws ConfigError if the CPU lacks the ISA.
void set_active_isa(Isa isa);

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}
inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}
inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }

}  // namespace deco::simd
