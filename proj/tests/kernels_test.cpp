#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ariign/errors.hpp"
#include "ariign/kernels.hpp"
#include "ariign/matrix.hpp"
#include "ariign/rng.hpp"

using namespace ariign;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

double rel_err(double a, double b) {
  double denom = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) / denom;
}

struct BackendGuard {
  ~BackendGuard() {
    kernels::force_backend(kernels::avx2_ops() ? "avx2" : "scalar");
  }
};

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
  Rng rng(11);
  const auto& ops = kernels::scalar_ops();
  for (std::size_t n : {std::size_t{1}, std::size_t{3}, std::size_t{8},
                        std::size_t{17}, std::size_t{1000}}) {
    auto x = random_vec(rng, n), y = random_vec(rng, n);
    double dot = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dot += x[i] * y[i];
      sum += x[i];
    }
    CHECK(rel_err(ops.dot(x.data(), y.data(), n), dot) < 1e-13);
    CHECK(rel_err(ops.sum(x.data(), n), sum) < 1e-13);

    auto y2 = y;
    ops.axpy(0.37, x.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y2[i] == doctest::Approx(y[i] + 0.37 * x[i]).epsilon(1e-14));

    std::vector<double> out(n);
    ops.vclamp(x.data(), -0.5, 0.5, out.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(out[i] == std::min(0.5, std::max(-0.5, x[i])));
  }
}

TEST_CASE("avx2 kernels agree with scalar kernels") {
  const kernels::Ops* simd = kernels::avx2_ops();
  if (!simd) return;  // CPU without AVX2: dispatch already covered by scalar path
  const auto& ref = kernels::scalar_ops();
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 1 + static_cast<std::size_t>(rng.below(300));
    auto x = random_vec(rng, n, 2.0), y = random_vec(rng, n, 2.0);

    CHECK(rel_err(simd->dot(x.data(), y.data(), n), ref.dot(x.data(), y.data(), n)) < 1e-12);
    CHECK(rel_err(simd->sum(x.data(), n), ref.sum(x.data(), n)) < 1e-12);

    std::vector<double> a(n), b(n);
    simd->vadd(x.data(), y.data(), a.data(), n);
    ref.vadd(x.data(), y.data(), b.data(), n);
    CHECK(a == b);
    simd->vsub(x.data(), y.data(), a.data(), n);
    ref.vsub(x.data(), y.data(), b.data(), n);
    CHECK(a == b);
    simd->vmul(x.data(), y.data(), a.data(), n);
    ref.vmul(x.data(), y.data(), b.data(), n);
    CHECK(a == b);
    simd->vclamp(x.data(), -1.0, 1.0, a.data(), n);
    ref.vclamp(x.data(), -1.0, 1.0, b.data(), n);
    CHECK(a == b);

    a = y;
    b = y;
    simd->axpy(-1.25, x.data(), a.data(), n);
    ref.axpy(-1.25, x.data(), b.data(), n);
    // fused multiply-add differs from mul+add in the last ulp
    for (std::size_t i = 0; i < n; ++i) CHECK(rel_err(a[i], b[i]) < 1e-15);
    a = x;
    b = x;
    simd->scale(0.81, a.data(), n);
    ref.scale(0.81, b.data(), n);
    CHECK(a == b);
  }
}

TEST_CASE("gemm variants match a naive triple loop on both backends") {
  BackendGuard guard;
  Rng rng(33);
  std::vector<std::string> backends = {"scalar"};
  if (kernels::avx2_ops()) backends.push_back("avx2");
  for (const std::string& backend : backends) {
    kernels::force_backend(backend);
    for (int trial = 0; trial < 8; ++trial) {
      std::size_t m = 1 + rng.below(9), k = 1 + rng.below(9), n = 1 + rng.below(9);
      Matrix a(m, k, random_vec(rng, m * k));
      Matrix b(k, n, random_vec(rng, k * n));
      Matrix naive(m, n);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t p = 0; p < k; ++p) naive(i, j) += a(i, p) * b(p, j);

      CHECK(max_abs_diff(matmul(a, b), naive) < 1e-12);

      Matrix bt(n, k);
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < n; ++j) bt(j, i) = b(i, j);
      CHECK(max_abs_diff(matmul_nt(a, bt), naive) < 1e-12);

      Matrix at(k, m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) at(j, i) = a(i, j);
      CHECK(max_abs_diff(matmul_tn(at, b), naive) < 1e-12);
    }
  }
}

TEST_CASE("backend forcing") {
  BackendGuard guard;
  kernels::force_backend("scalar");
  CHECK(std::string(kernels::active().name) == "scalar");
  if (kernels::avx2_ops()) {
    kernels::force_backend("avx2");
    CHECK(std::string(kernels::active().name) == "avx2");
  }
  CHECK_THROWS_AS(kernels::force_backend("neon"), ConfigError);
}
