// svlab - small shared utilities: cutoffs, rng streams, parallel loops
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <thread>
#include <vector>

#include "svlab/dual.hpp"

namespace svlab {

// C2 quintic smoothstep, 0 on x<=0 and 1 on x>=1. All cutoff functions of the
// library (chi_N, chi, chi_bar) come from this one family so their first two
// derivatives are available to the dual-number engine.
template <class T>
T smoothstep5(const T& x) {
  if (x <= T(0.0)) return T(0.0);
  if (x >= T(1.0)) return T(1.0);
  return x * x * x * (T(10.0) + x * (T(-15.0) + x * T(6.0)));
}

// chi of Definition "decreasing cutoff": 1 for s<=0, 0 for s>=1.
template <class T>
T cutoff_decreasing(const T& s) {
  return T(1.0) - smoothstep5(s);
}

// chi_bar: 0 for r<=4M, 1 for r>=7M.
template <class T>
T cutoff_chibar(const T& r, double M) {
  return smoothstep5((r - T(4.0 * M)) / T(3.0 * M));
}

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Deterministic per-index RNG stream: results do not depend on thread count
// or evaluation order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 rng_stream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(index + 1)));
}

// Index-ordered parallel map: body(i) fills slot i of a caller-owned buffer,
// reductions happen afterwards in index order.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                         unsigned threads = 0) {
  unsigned nt = threads ? threads : std::thread::hardware_concurrency();
  if (nt <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (unsigned t = 0; t < nt; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        body(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;  // rms residual of the fit
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LinearFit f;
  const double det = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ss += r * r;
  }
  f.residual_rms = std::sqrt(ss / n);
  return f;
}

}  // namespace svlab
