#include "p3c/simd.hpp"

#include <cmath>
#include <limits>

namespace p3c::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s = std::fma(a[i], b[i], s);
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void mvn_argmax_scalar(const double* factor, bool lower, const double* mu, std::size_t m,
                       const double* z, std::size_t draws, std::int32_t* winners) {
  for (std::size_t d = 0; d < draws; ++d) {
    double best = -std::numeric_limits<double>::infinity();
    std::int32_t idx = -1;
    bool tie = false;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t kend = lower ? i + 1 : m;
      const double* row = factor + i * m;
      double acc = mu[i];
      for (std::size_t k = 0; k < kend; ++k) acc = std::fma(row[k], z[k * draws + d], acc);
      if (acc > best) {
        best = acc;
        idx = static_cast<std::int32_t>(i);
        tie = false;
      } else if (acc == best) {
        tie = true;
      }
    }
    winners[d] = tie ? -1 : idx;
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::scalar, dot_scalar, axpy_scalar, mvn_argmax_scalar};
  return table;
}

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace p3c::simd
