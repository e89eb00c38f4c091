#pragma once

// Vector kernels used by the matrix layer. A scalar reference implementation
// always exists; an AVX2/FMA variant is selected at process start when the
// CPU supports it. Override with ARIIGN_KERNELS=scalar|avx2.
//
// Reductions in the SIMD path use multiple accumulators, so results may
// differ from the scalar path in the last ulps. Within one process the
// selected path is fixed, which keeps runs deterministic.

#include <cstddef>
#include <string>

namespace ariign::kernels {

struct Ops {
  const char* name;
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  void (*scale)(double a, double* x, std::size_t n);
  void (*vadd)(const double* x, const double* y, double* out, std::size_t n);
  void (*vsub)(const double* x, const double* y, double* out, std::size_t n);
  void (*vmul)(const double* x, const double* y, double* out, std::size_t n);
  void (*vclamp)(const double* x, double lo, double hi, double* out, std::size_t n);
};

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when unsupported by the CPU

// Currently active dispatch table.
const Ops& active();
// Force a specific backend ("scalar" or "avx2"); throws on unknown or
// unsupported names. Intended for tests and the ARIIGN_KERNELS override.
void force_backend(const std::string& name);

// Row-major GEMM built on the active kernels.
// C(m x n) = A(m x k) * B(k x n); C is overwritten.
void gemm(const double* a, const double* b, double* c,
          std::size_t m, std::size_t k, std::size_t n);
// C(m x n) = A(m x k) * B(n x k)^T
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);
// C(k x n) = A(m x k)^T * B(m x n)
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);

}  // namespace ariign::kernels
