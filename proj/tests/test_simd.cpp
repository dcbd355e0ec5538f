#include "doctest.h"

#include <cmath>
#include <vector>

#include "deco/random.hpp"
#include "deco/simd/kernels.hpp"

using namespace deco;
namespace simd = deco::simd;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

}  // namespace

TEST_CASE("scalar kernels compute the textbook loops") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y{1, 1, 1, 1, 1};
  simd::scalar::axpy(2.0, x.data(), y.data(), x.size());
  CHECK(y == std::vector<double>{3, 5, 7, 9, 11});
  CHECK(simd::scalar::dot(x.data(), x.data(), 5) == 55.0);
  CHECK(simd::scalar::sum(x.data(), 5) == 15.0);
  std::vector<double> z(5);
  simd::scalar::affine(x.data(), 0.5, -1.0, z.data(), 5);
  CHECK(z == std::vector<double>{-0.5, 0.0, 0.5, 1.0, 1.5});
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!simd::isa_supported(simd::Isa::Avx2)) {
    MESSAGE("CPU lacks AVX2; equivalence not exercised");
    return;
  }
  Rng rng(11);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 15u, 16u, 17u, 31u, 64u, 333u, 1000u}) {
    CAPTURE(n);
    const auto x = random_vector(rng, n);
    const auto y0 = random_vector(rng, n);

    auto ys = y0, yv = y0;
    simd::scalar::axpy(0.37, x.data(), ys.data(), n);
    simd::avx2::axpy(0.37, x.data(), yv.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(yv[i] == doctest::Approx(ys[i]).epsilon(1e-15));

    const double ds = simd::scalar::dot(x.data(), y0.data(), n);
    const double dv = simd::avx2::dot(x.data(), y0.data(), n);
    CHECK(std::fabs(ds - dv) <= 1e-12 * (1.0 + static_cast<double>(n)));

    const double ss = simd::scalar::sum(x.data(), n);
    const double sv = simd::avx2::sum(x.data(), n);
    CHECK(std::fabs(ss - sv) <= 1e-12 * (1.0 + static_cast<double>(n)));

    std::vector<double> as(n), av(n);
    simd::scalar::affine(x.data(), -1.5, 0.25, as.data(), n);
    simd::avx2::affine(x.data(), -1.5, 0.25, av.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(av[i] == doctest::Approx(as[i]).epsilon(1e-15));
  }
}

TEST_CASE("avx2 reductions are reproducible") {
  if (!simd::isa_supported(simd::Isa::Avx2)) return;
  Rng rng(3);
  const auto x = random_vector(rng, 517);
  const auto y = random_vector(rng, 517);
  const double first = simd::avx2::dot(x.data(), y.data(), x.size());
  for (int i = 0; i < 5; ++i) CHECK(simd::avx2::dot(x.data(), y.data(), x.size()) == first);
}

TEST_CASE("active table can be switched") {
  const simd::Isa original = simd::active_isa();
  simd::set_active_isa(simd::Isa::Scalar);
  CHECK(simd::active_isa() == simd::Isa::Scalar);
  CHECK(simd::active().dot == &simd::scalar::dot);
  simd::set_active_isa(original);
  CHECK(simd::active_isa() == original);
  CHECK(simd::isa_name(simd::Isa::Scalar) == "scalar");
}
