#include "doctest.h"

#include "p3c/simd.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

using namespace p3c::simd;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z;
  std::vector<double> v(n);
  for (auto& x : v) x = z(eng);
  return v;
}

// Naive reference for mvn_argmax.
std::vector<std::int32_t> argmax_ref(const std::vector<double>& f, bool lower, const std::vector<double>& mu,
                                     std::size_t m, const std::vector<double>& z, std::size_t draws) {
  std::vector<std::int32_t> w(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    double best = -INFINITY;
    int arg = -1;
    bool tie = false;
    for (std::size_t i = 0; i < m; ++i) {
      double v = mu[i];
      const std::size_t kmax = lower ? i + 1 : m;
      for (std::size_t k = 0; k < kmax; ++k) v = std::fma(f[i * m + k], z[k * draws + d], v);
      if (v > best) {
        best = v;
        arg = static_cast<int>(i);
        tie = false;
      } else if (v == best) {
        tie = true;
      }
    }
    w[d] = tie ? -1 : arg;
  }
  return w;
}

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("dispatch picks the widest available table") {
    const auto& k = kernels();
    if (avx2_kernels()) {
      CHECK(k.isa == Isa::avx2);
    } else {
      CHECK(k.isa == Isa::scalar);
    }
    CHECK(std::string(isa_name(Isa::scalar)) == "scalar");
  }

  TEST_CASE("scalar dot and axpy match naive loops") {
    const auto& s = scalar_kernels();
    for (std::size_t n : {0u, 1u, 3u, 7u, 64u, 1001u}) {
      const auto a = randn(n, 1 + n), b = randn(n, 2 + n);
      double ref = 0.0;
      for (std::size_t i = 0; i < n; ++i) ref += a[i] * b[i];
      CHECK(s.dot(a.data(), b.data(), n) == doctest::Approx(ref).epsilon(1e-12));
      auto y = b;
      s.axpy(0.37, a.data(), y.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == std::fma(0.37, a[i], b[i]));
    }
  }

  TEST_CASE("avx2 kernels agree with the scalar reference") {
    const KernelTable* v = avx2_kernels();
    if (!v) return;
    const auto& s = scalar_kernels();
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 8u, 13u, 100u, 4099u}) {
      const auto a = randn(n, 10 + n), b = randn(n, 20 + n);
      const double ds = s.dot(a.data(), b.data(), n), dv = v->dot(a.data(), b.data(), n);
      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
      CHECK(std::abs(ds - dv) <= 1e-14 * (1.0 + mag));

      auto ys = b, yv = b;
      s.axpy(-1.25, a.data(), ys.data(), n);
      v->axpy(-1.25, a.data(), yv.data(), n);
      CHECK(std::memcmp(ys.data(), yv.data(), n * sizeof(double)) == 0);
    }
  }

  TEST_CASE("mvn_argmax: avx2, scalar and naive loops give identical winners") {
    const KernelTable* v = avx2_kernels();
    const auto& s = scalar_kernels();
    for (std::size_t m : {1u, 2u, 3u, 5u, 9u}) {
      for (std::size_t draws : {1u, 3u, 4u, 7u, 256u, 1027u}) {
        for (bool lower : {true, false}) {
          const auto f = randn(m * m, 100 + m);
          const auto mu = randn(m, 200 + m);
          const auto z = randn(m * draws, 300 + draws);
          const auto ref = argmax_ref(f, lower, mu, m, z, draws);
          std::vector<std::int32_t> ws(draws), wv(draws);
          s.mvn_argmax(f.data(), lower, mu.data(), m, z.data(), draws, ws.data());
          CHECK(ws == ref);
          if (v) {
            v->mvn_argmax(f.data(), lower, mu.data(), m, z.data(), draws, wv.data());
            CHECK(wv == ws);
          }
        }
      }
    }
  }

  TEST_CASE("mvn_argmax reports exact ties as -1") {
    const std::size_t m = 3, draws = 5;
    const std::vector<double> f(m * m, 0.0), mu{1.0, 1.0, 0.5}, z(m * draws, 0.3);
    for (const KernelTable* t : {&scalar_kernels(), avx2_kernels()}) {
      if (!t) continue;
      std::vector<std::int32_t> w(draws, 7);
      t->mvn_argmax(f.data(), true, mu.data(), m, z.data(), draws, w.data());
      for (auto x : w) CHECK(x == -1);
    }
  }
}
