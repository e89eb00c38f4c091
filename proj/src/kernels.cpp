#include "ariign/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "ariign/errors.hpp"

namespace ariign::kernels {

namespace {

const Ops* select_initial() {
  if (const char* env = std::getenv("ARIIGN_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_ops();
    if (std::strcmp(env, "avx2") == 0 && avx2_ops()) return avx2_ops();
  }
  if (const Ops* simd = avx2_ops()) return simd;
  return &scalar_ops();
}

const Ops*& active_slot() {
  static const Ops* ops = select_initial();
  return ops;
}

}  // namespace

const Ops& active() { return *active_slot(); }

void force_backend(const std::string& name) {
  if (name == "scalar") {
    active_slot() = &scalar_ops();
    return;
  }
  if (name == "avx2") {
    if (const Ops* simd = avx2_ops()) {
      active_slot() = simd;
      return;
    }
    throw ConfigError("avx2 kernels not supported on this CPU");
  }
  throw ConfigError("unknown kernel backend: " + name);
}

void gemm(const double* a, const double* b, double* c,
          std::size_t m, std::size_t k, std::size_t n) {
  const Ops& ops = active();
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      if (arow[p] != 0.0) ops.axpy(arow[p], b + p * n, crow, n);
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
  const Ops& ops = active();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      crow[j] = ops.dot(arow, b + j * k, k);
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
  const Ops& ops = active();
  std::memset(c, 0, k * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      if (arow[p] != 0.0) ops.axpy(arow[p], brow, c + p * n, n);
    }
  }
}

}  // namespace ariign::kernels
