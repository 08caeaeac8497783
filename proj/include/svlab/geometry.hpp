// svlab - Schwarzschild exterior geometry
//
// Scalar metric functions, the four coordinate charts and their transforms,
// the hyperboloidal height function, and the spacelike-null foliation
// Sigma_tau. Everything is a pure function of the radius and the black hole
// mass M (geometric units, G = c = 1).
#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "svlab/dual.hpp"
#include "svlab/quadrature.hpp"

namespace svlab {

struct BlackHoleParams {
  double M = 1.0;
  explicit BlackHoleParams(double mass = 1.0) : M(mass) {
    if (!(M > 0.0)) throw std::invalid_argument("BlackHoleParams: M must be positive");
  }
};

// Omega^2(r) = 1 - 2M/r. Defined for all r > 0; callers on the exterior
// assert r >= 2M themselves.
template <class T>
T omega_sq(const T& r, double M) {
  return T(1.0) - T(2.0 * M) / r;
}

template <class T>
T omega(const T& r, double M) {
  using std::sqrt;
  return sqrt(omega_sq(r, M));
}

// Tortoise coordinate r*(r) = r - 3M + 2M log(r-2M) - 2M log(M), r*(3M) = 0.
template <class T>
T rstar_of_r(const T& r, double M) {
  using std::log;
  if (!(value(r) > 2.0 * M)) throw std::domain_error("rstar_of_r: requires r > 2M");
  return r - T(3.0 * M) + T(2.0 * M) * log(r - T(2.0 * M)) - T(2.0 * M * std::log(M));
}

// Inverse of rstar_of_r: safeguarded Newton on a bracket. Total function.
inline double r_of_rstar(double rs, double M) {
  double lo = 2.0 * M * (1.0 + 1e-15);
  double hi = std::max(3.0 * M, rs + 3.0 * M + 2.0 * M);
  // Initial guess from the two asymptotic regimes.
  double r = rs > 0.0 ? rs + 3.0 * M : 2.0 * M * (1.0 + std::exp((rs - M + 2.0 * M * std::log(M)) / (2.0 * M)));
  if (!(r > lo && r < hi)) r = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = rstar_of_r(r, M) - rs;
    if (f > 0.0) hi = std::min(hi, r);
    else lo = std::max(lo, r);
    const double dr = f * omega_sq(r, M);  // Newton step: d rstar/dr = 1/Omega^2
    double rn = r - dr;
    if (!(rn > lo && rn < hi)) rn = 0.5 * (lo + hi);
    if (std::abs(rn - r) <= 1e-16 * r) { r = rn; break; }
    r = rn;
  }
  return r;
}

inline Dual r_of_rstar(const Dual& rs, double M) {
  const double r = r_of_rstar(rs.v, M);
  return {r, omega_sq(r, M) * rs.d};  // dr/dr* = Omega^2
}

// xi(r) = (1 - 3M/r)(1 + 6M/r)^{1/2}, the integrand shape of H(r).
template <class T>
T hyperboloidal_slope(const T& r, double M) {
  using std::sqrt;
  return (T(1.0) - T(3.0 * M) / r) * sqrt(T(1.0) + T(6.0 * M) / r);
}

// H(r) = int_{3M}^r xi(s)/Omega^2(s) ds by adaptive Gauss-Kronrod. The
// integrand is g(s)/(s-2M) with g(s) = (s-3M) sqrt(1+6M/s); its horizon pole
// integrates to -2M log((r-2M)/M) exactly, and only the smooth remainder is
// sent to the quadrature. Anchors are built once at construction; evaluation
// is safe for concurrent readers.
class HyperboloidalHeight {
 public:
  explicit HyperboloidalHeight(double M = 1.0, double abs_tol = 1e-12)
      : M_(M), tol_(abs_tol) {
    const double lo = std::log(1e-9 * M_), hi = std::log(2e6 * M_);
    const int n = 64;
    anchors_r_.resize(n);
    anchors_H_.resize(n);
    for (int i = 0; i < n; ++i)
      anchors_r_[i] = 2.0 * M_ + std::exp(lo + (hi - lo) * i / (n - 1.0));
    for (int i = 0; i < n; ++i) anchors_H_[i] = smooth_part(3.0 * M_, anchors_r_[i]);
  }

  double operator()(double r) const {
    if (!(r > 2.0 * M_)) throw std::domain_error("H(r): requires r > 2M");
    auto it = std::lower_bound(anchors_r_.begin(), anchors_r_.end(), r);
    std::size_t i = it == anchors_r_.begin() ? 0 : (it - anchors_r_.begin() - 1);
    return anchors_H_[i] + smooth_part(anchors_r_[i], r) -
           2.0 * M_ * std::log((r - 2.0 * M_) / M_);
  }

  Dual operator()(const Dual& r) const {
    return {(*this)(r.v), hyperboloidal_slope(r.v, M_) / omega_sq(r.v, M_) * r.d};
  }

 private:
  // (g(s) - g(2M)) / (s - 2M) with the removable singularity at the horizon.
  // Near the horizon the difference is rationalized: with x = s - 2M,
  //   g + 2M = x (19M^2 - 6Mx - x^2) / (2M sqrt(2M+x) - (x-M) sqrt(8M+x))
  //            / sqrt(2M+x) * sqrt(2M+x) ... the x cancels the pole exactly.
  double smooth_integrand(double s) const {
    const double M = M_;
    if (s <= 2.5 * M) {
      const double x = s - 2.0 * M;
      const double den =
          2.0 * M * std::sqrt(2.0 * M + x) - (x - M) * std::sqrt(8.0 * M + x);
      return (19.0 * M * M - 6.0 * M * x - x * x) / (std::sqrt(2.0 * M + x) * den);
    }
    const double g = (s - 3.0 * M) * std::sqrt(1.0 + 6.0 * M / s);
    return (g + 2.0 * M) / (s - 2.0 * M);
  }
  double smooth_part(double a, double b) const {
    if (a == b) return 0.0;
    return integrate_adaptive([this](double s) { return smooth_integrand(s); }, a, b, tol_);
  }
  double M_, tol_;
  std::vector<double> anchors_r_, anchors_H_;
};

enum class Chart { TortoiseTR, StarTR, DoubleNull, Hyperboloidal };

inline const char* chart_name(Chart c) {
  switch (c) {
    case Chart::TortoiseTR: return "tortoise";
    case Chart::StarTR: return "star";
    case Chart::DoubleNull: return "double-null";
    case Chart::Hyperboloidal: return "hyperboloidal";
  }
  return "?";
}

struct ChartPoint {
  Chart chart = Chart::TortoiseTR;
  std::array<double, 4> x{};  // chart-ordered coordinates, angles last
};

// Chart transforms, routed through the canonical (t, r) pair.
class Geometry {
 public:
  explicit Geometry(BlackHoleParams bh = BlackHoleParams{})
      : bh_(bh), height_(bh.M) {}

  double M() const { return bh_.M; }
  const HyperboloidalHeight& height() const { return height_; }

  double tstar_of_tr(double t, double r) const { return t + 2.0 * bh_.M * std::log(r - 2.0 * bh_.M); }
  double t_of_tstar(double ts, double r) const { return ts - 2.0 * bh_.M * std::log(r - 2.0 * bh_.M); }

  // (t, r) of a chart point.
  std::pair<double, double> to_tr(const ChartPoint& p) const {
    switch (p.chart) {
      case Chart::TortoiseTR: return {p.x[0], r_of_rstar(p.x[1], bh_.M)};
      case Chart::StarTR: {
        const double r = p.x[1];
        require_exterior(r);
        return {t_of_tstar(p.x[0], r), r};
      }
      case Chart::DoubleNull: {
        const double t = 0.5 * (p.x[0] + p.x[1]);
        const double rs = 0.5 * (p.x[1] - p.x[0]);
        return {t, r_of_rstar(rs, bh_.M)};
      }
      case Chart::Hyperboloidal: {
        const double r = p.x[1];
        require_exterior(r);
        return {p.x[0] + height_(r), r};
      }
    }
    throw std::logic_error("unknown chart");
  }

  ChartPoint from_tr(double t, double r, double theta, double phi, Chart target) const {
    require_exterior(r);
    switch (target) {
      case Chart::TortoiseTR: return {target, {t, rstar_of_r(r, bh_.M), theta, phi}};
      case Chart::StarTR: return {target, {tstar_of_tr(t, r), r, theta, phi}};
      case Chart::DoubleNull: {
        const double rs = rstar_of_r(r, bh_.M);
        return {target, {t - rs, t + rs, theta, phi}};
      }
      case Chart::Hyperboloidal: return {target, {t - height_(r), r, theta, phi}};
    }
    throw std::logic_error("unknown chart");
  }

  ChartPoint chart_transform(const ChartPoint& p, Chart target) const {
    const auto [t, r] = to_tr(p);
    return from_tr(t, r, p.x[2], p.x[3], target);
  }

 private:
  void require_exterior(double r) const {
    if (!(r > 2.0 * bh_.M)) throw std::domain_error("chart coordinates require r > 2M");
  }
  BlackHoleParams bh_;
  HyperboloidalHeight height_;
};

// The spacelike-null foliation. Leaves are
//   Sigma_tau = { t* = tau, r <= R0 }  join  { u = tau + u0, r > R0 }.
// The junction constant makes the two pieces meet at r = R0.
struct Foliation {
  double M = 1.0;
  double R0 = 10.0;
  double t0 = 0.0;  // -2M log(R0 - 2M): cone label at the junction sphere
  double u0 = 0.0;  // t0 - r*(R0)

  Foliation(double mass, double r0) : M(mass), R0(r0) {
    if (!(R0 > 3.0 * M)) throw std::invalid_argument("Foliation: R0 must exceed 3M");
    t0 = -2.0 * M * std::log(R0 - 2.0 * M);
    u0 = t0 - rstar_of_r(R0, M);
  }

  // tau of the unique leaf through (t, r).
  double leaf_tau(double t, double r) const {
    if (r <= R0) return t + 2.0 * M * std::log(r - 2.0 * M);
    return t - rstar_of_r(r, M) - u0;
  }

  // t-coordinate of the leaf-tau point at radius r.
  double leaf_t(double tau, double r) const {
    if (r <= R0) return tau - 2.0 * M * std::log(r - 2.0 * M);
    return tau + u0 + rstar_of_r(r, M);
  }
};

// p(n_Sigma): the flux weight of the foliation.
//   r <  R0 : (1+2M/r)^{-1/2} p_v + (1+2M/r)^{1/2} p_u / Omega^2
//   r >= R0 : p_v   (outgoing cone, normal d_v, measure r^2 dv)
// The caller passes p_u/Omega^2 explicitly; near the horizon that ratio has a
// cancellation-free closed form while p_u itself does not.
inline double leaf_normal_weight(double r, double pv, double pu_over_om2, const Foliation& fol) {
  if (r >= fol.R0) return pv;
  const double k = 1.0 + 2.0 * fol.M / r;
  return pv / std::sqrt(k) + std::sqrt(k) * pu_over_om2;
}

}  // namespace svlab
