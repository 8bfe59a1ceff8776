#pragma once

#include <cstddef>
#include <cstdint>

namespace p3c::simd {

enum class Isa { scalar, avx2 };

/// Hot kernels. Every ISA variant must agree with the scalar reference:
/// axpy and mvn_argmax bit-for-bit (same fused operation order), dot to
/// rounding (lane-split summation).
struct KernelTable {
  Isa isa;

  /// Sum a[i] * b[i].
  double (*dot)(const double* a, const double* b, std::size_t n);

  /// y[i] += alpha * x[i], fused.
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  /// For each draw d, evaluates v_i = mu[i] + sum_k F[i*m+k] * z[k*draws+d]
  /// (k < i+1 when `lower`, else k < m) and writes the index of the strict
  /// maximum, or -1 when the maximum is tied.
  void (*mvn_argmax)(const double* factor, bool lower, const double* mu, std::size_t m,
                     const double* z, std::size_t draws, std::int32_t* winners);
};

const KernelTable& scalar_kernels();

/// Null when the CPU or compiler lacks AVX2+FMA.
const KernelTable* avx2_kernels();

/// Best table for the running CPU, chosen once.
const KernelTable& kernels();

const char* isa_name(Isa isa);

}  // namespace p3c::simd
