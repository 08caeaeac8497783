// svlab - the null-shell: phase points, mass-shell closure, momentum scalars
//
// Canonical phase coordinates are the tortoise-induced ones
// (t, r*, theta, phi, p_r*, p_theta, p_phi), with p_t closed by the
// null-shell relation. Points are stored with r (not r*) so that every
// metric coefficient is an explicit smooth function of the state; r* is
// derived on demand.
#pragma once

#include <cmath>
#include <stdexcept>

#include "svlab/geometry.hpp"
#include "svlab/util.hpp"

namespace svlab {

// Templated coordinate bundle for dual-number evaluation. Angles and angular
// momenta participate so that rotational fields differentiate correctly.
template <class T>
struct Shell {
  T t{}, r{}, theta{}, phi{};
  T p_rstar{}, p_theta{}, p_phi{};
};

template <class T>
T ang_mom_sq(const Shell<T>& s) {
  using std::sin;
  const T st = sin(s.theta);
  return s.p_theta * s.p_theta + s.p_phi * s.p_phi / (st * st);
}

template <class T>
T ang_mom(const Shell<T>& s) {
  using std::sqrt;
  return sqrt(ang_mom_sq(s));
}

// Null-shell closure: p_t = -| p_r*^2 + Omega^2 |p|^2 / r^2 |^{1/2}.
template <class T>
T pt_closure(const Shell<T>& s, double M) {
  using std::sqrt;
  const T om2 = omega_sq(s.r, M);
  return -sqrt(s.p_rstar * s.p_rstar + om2 * ang_mom_sq(s) / (s.r * s.r));
}

// p_u = (p_t - p_r*)/2 and p_v = (p_t + p_r*)/2, both <= 0 on the shell.
// Whichever of the two is a cancellation (ingoing for p_u, outgoing for p_v)
// is rewritten through the shell relation 4 p_u p_v = Omega^2 |p|^2 / r^2.
template <class T>
T pu_over_omega_sq(const Shell<T>& s, const T& pt, double M) {
  if (value(s.p_rstar) <= 0.0) {
    const T q = ang_mom_sq(s) / (s.r * s.r);  // |p|^2/r^2; p_u = -Omega^2 q / (2(|p_t|+|p_r*|))
    return -q / (T(2.0) * (-pt - s.p_rstar));
  }
  return (pt - s.p_rstar) / (T(2.0) * omega_sq(s.r, M));
}

template <class T>
T pv_value(const Shell<T>& s, const T& pt, double M) {
  if (value(s.p_rstar) >= 0.0) {
    const T q = omega_sq(s.r, M) * ang_mom_sq(s) / (s.r * s.r);
    return -q / (T(2.0) * (-pt + s.p_rstar));
  }
  return (pt + s.p_rstar) / T(2.0);
}

template <class T>
T pu_value(const Shell<T>& s, const T& pt, double M) {
  return pu_over_omega_sq(s, pt, M) * omega_sq(s.r, M);
}

// chi_N: smooth cutoff, 1 on r <= 2.5M, 0 on r >= 2.7M.
template <class T>
T chi_N(const T& r, double M) {
  return cutoff_decreasing((r - T(2.5 * M)) / T(0.2 * M));
}

// p_N = p_t + chi_N(r) (2 r^2 / (M^2 Omega^2)) p_u.
template <class T>
T pN_value(const Shell<T>& s, const T& pt, double M) {
  const T c = chi_N(s.r, M);
  if (value(c) == 0.0) return pt;
  return pt + c * T(2.0 / (M * M)) * s.r * s.r * pu_over_omega_sq(s, pt, M);
}

// p_{t*} = p(n_{t*=const}) = (1+2M/r)^{-1/2} p_v + (1+2M/r)^{1/2} p_u/Omega^2.
template <class T>
T pTstar_value(const Shell<T>& s, const T& pt, double M) {
  using std::sqrt;
  const T k = T(1.0) + T(2.0 * M) / s.r;
  return pv_value(s, pt, M) / sqrt(k) + sqrt(k) * pu_over_omega_sq(s, pt, M);
}

// d t*/ds along the affine spray is lambda = (-p_t + (2M/r) p_r*)/Omega^2.
// Every t*-parametrized component is an affine component times Omega^2/
// (Omega^2 lambda); this returns that common factor in a cancellation-free
// form (the ingoing numerator -p_t + (2M/r)p_r* = Omega^2(-p_t) - (4M/r)p_u
// degenerates like Omega^2 at the horizon).
template <class T>
T om2_over_lapse(const Shell<T>& s, const T& pt, double M) {
  if (value(s.p_rstar) <= 0.0)
    return T(1.0) / (-pt - T(4.0 * M) / s.r * pu_over_omega_sq(s, pt, M));
  return omega_sq(s.r, M) / (-pt + T(2.0 * M) / s.r * s.p_rstar);
}

struct ConservedSet {
  double E = 0.0;   // particle energy -p_t
  double lz = 0.0;  // azimuthal angular momentum p_phi
  double l = 0.0;   // total angular momentum |p|
};

// A point of the null-shell with the closure cached.
struct PhasePoint {
  double t = 0.0, r = 0.0, theta = 0.0, phi = 0.0;
  double p_rstar = 0.0, p_theta = 0.0, p_phi = 0.0;
  double p_t = 0.0;  // cached closure, < 0
  double M = 1.0;

  Shell<double> shell() const { return {t, r, theta, phi, p_rstar, p_theta, p_phi}; }
  double rstar() const { return rstar_of_r(r, M); }
  double ell() const { return ang_mom(shell()); }
  double pu() const { return pu_value(shell(), p_t, M); }
  double pv() const { return pv_value(shell(), p_t, M); }
  double pu_over_om2() const { return pu_over_omega_sq(shell(), p_t, M); }
  double pN() const { return pN_value(shell(), p_t, M); }
  double pTstar() const { return pTstar_value(shell(), p_t, M); }
  double tstar() const { return t + 2.0 * M * std::log(r - 2.0 * M); }
};

// close_shell: builds a PhasePoint from base+fiber coordinates, computing
// p_t from the null-shell relation.
inline PhasePoint close_shell(double t, double r, double theta, double phi, double p_rstar,
                              double p_theta, double p_phi, double M = 1.0) {
  if (!(r > 2.0 * M)) throw std::domain_error("close_shell: requires r > 2M");
  PhasePoint p{t, r, theta, phi, p_rstar, p_theta, p_phi, 0.0, M};
  if (p_rstar == 0.0 && p_theta == 0.0 && p_phi == 0.0)
    throw std::invalid_argument("close_shell: zero momentum is degenerate");
  p.p_t = pt_closure(p.shell(), M);
  return p;
}

// Equatorial representative of reduced coordinates (r, p_r*, ell): theta=pi/2
// and all angular momentum in p_phi, so the orbit stays equatorial.
inline PhasePoint equatorial_point(double r, double p_rstar, double ell, double M = 1.0,
                                   double t = 0.0) {
  return close_shell(t, r, M_PI / 2.0, 0.0, p_rstar, 0.0, ell, M);
}

inline ConservedSet conserved(const PhasePoint& p) {
  return {-p.p_t, p.p_phi, p.ell()};
}

// |p|^2 via the Carter contraction sum_i p(Omega_i)^2; used as the
// independent route against the closed form.
inline double carter_ell_sq(const PhasePoint& p) {
  const double ct = std::cos(p.theta) / std::sin(p.theta);
  const double c1 = -std::sin(p.phi) * p.p_theta - std::cos(p.phi) * ct * p.p_phi;
  const double c2 = std::cos(p.phi) * p.p_theta - std::sin(p.phi) * ct * p.p_phi;
  return c1 * c1 + c2 * c2 + p.p_phi * p.p_phi;
}

// Fiber volume density of d mu_{P_x} against dp_r* dp_theta dp_phi.
inline double momentum_measure_weight(const PhasePoint& p) {
  const double st = std::sin(p.theta);
  if (st == 0.0) throw std::domain_error("momentum measure: coordinate pole");
  return 1.0 / (p.r * p.r * st * std::abs(p.p_t));
}

// Residual of the null-shell relation; ~1e-16 for a closed point.
inline double shell_residual(const PhasePoint& p) {
  const double om2 = omega_sq(p.r, p.M);
  const double rhs = std::sqrt(p.p_rstar * p.p_rstar + om2 * ang_mom_sq(p.shell()) / (p.r * p.r));
  return std::abs(p.p_t + rhs) / rhs;
}

// Sampling parametrization (r, E, mu, psi): p_r* = mu E and
// ell = (r/Omega) E sqrt(1-mu^2) lands exactly on the shell with |p_t| = E.
inline PhasePoint sample_point(double r, double E, double mu, double psi, double theta,
                               double phi, double M = 1.0, double t = 0.0) {
  const double ell = r / omega(r, M) * E * std::sqrt(std::max(0.0, 1.0 - mu * mu));
  const double p_theta = ell * std::cos(psi);
  const double p_phi = ell * std::sin(theta) * std::sin(psi);
  return close_shell(t, r, theta, phi, mu * E, p_theta, p_phi, M);
}

inline double leaf_normal_weight(const PhasePoint& p, const Foliation& fol) {
  return leaf_normal_weight(p.r, p.pv(), p.pu_over_om2(), fol);
}

}  // namespace svlab
