#include "p3c/simd.hpp"

namespace p3c::simd {

const KernelTable& kernels() {
  static const KernelTable& chosen = []() -> const KernelTable& {
    if (const KernelTable* t = avx2_kernels()) return *t;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace p3c::simd
