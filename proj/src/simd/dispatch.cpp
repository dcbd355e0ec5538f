#include <atomic>
#include <cstdlib>
#include <string>

#include "deco/errors.hpp"
#include "deco/simd/kernels.hpp"

namespace deco::simd {

namespace {

constexpr KernelTable kScalarTable{Isa::Scalar, scalar::axpy, scalar::dot, scalar::sum,
                                   scalar::affine};
#ifdef DECO_HAVE_AVX2_TU
constexpr KernelTable kAvx2Table{Isa::Avx2, avx2::axpy, avx2::dot, avx2::sum, avx2::affine};
#endif

bool cpu_has_avx2() {
#if defined(DECO_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const char* env = std::getenv("DECO_ISA");
  if (env != nullptr) {
    std::string want(env);
    if (want == "scalar") return &kScalarTable;
    if (want == "avx2" && isa_supported(Isa::Avx2)) return &table_for(Isa::Avx2);
  }
  if (isa_supported(Isa::Avx2)) return &table_for(Isa::Avx2);
  return &kScalarTable;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  if (isa == Isa::Scalar) return true;
  static const bool avx2 = cpu_has_avx2();
  return avx2;
}

const KernelTable& table_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw ConfigError("ISA not supported on this CPU: " + std::string(isa_name(isa)));
  }
#ifdef DECO_HAVE_AVX2_TU
  if (isa == Isa::Avx2) return kAvx2Table;
#endif
  return kScalarTable;
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

Isa active_isa() { return active().isa; }

void set_active_isa(Isa isa) { current().store(&table_for(isa), std::memory_order_relaxed); }

}  // namespace deco::simd
