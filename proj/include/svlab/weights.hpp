// svlab - scalar weight functions on the null-shell
//
// Catalog of the named weights (trapping, redshift, r^p, multiplier and
// region weights), their closed-form derivatives along the spray where such
// a form exists, a dual-number Lie-derivative engine to check them, and the
// massive-shell extension of the trapping weights.
#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "svlab/flow.hpp"

namespace svlab {

struct WeightParams {
  double M = 1.0;
  double eps_xi = 1e-4;     // the "sufficiently small" multiplier constant
  double rp_power = 2.0;    // p of r^p |p_v| / Omega^2
  double obar_a = 0.25;     // a of the region weight
  double obar_R = 832.0;    // R of the region weight
  double exp_b = 0.05;      // b of the exponential r-weight
  double eta() const { return 0.5 * std::log(2.0 + 2.0 * M); }
};

enum class WeightId {
  Pt, Pphi, Ell, Pu, Pv, PN, PTstar,
  Xi, RedshiftPu, RpPv,
  PhiMinus, BoldPhiMinus, PhiPlus, OmegaPhiPlus, LogPhiPlus,
  Zeta, OmegaFaraway, OmegaBar, ExpWeight,
  Alpha, AlphaBar, SInvariant, SBarInvariant, Psi, PhiCorrection
};

inline const char* weight_name(WeightId id) {
  switch (id) {
    case WeightId::Pt: return "pt";
    case WeightId::Pphi: return "pphi";
    case WeightId::Ell: return "ell";
    case WeightId::Pu: return "pu";
    case WeightId::Pv: return "pv";
    case WeightId::PN: return "pN";
    case WeightId::PTstar: return "pTstar";
    case WeightId::Xi: return "xi";
    case WeightId::RedshiftPu: return "redshift_pu";
    case WeightId::RpPv: return "rp_pv";
    case WeightId::PhiMinus: return "phi_minus";
    case WeightId::BoldPhiMinus: return "bold_phi_minus";
    case WeightId::PhiPlus: return "phi_plus";
    case WeightId::OmegaPhiPlus: return "omega_phi_plus";
    case WeightId::LogPhiPlus: return "log_phi_plus";
    case WeightId::Zeta: return "zeta";
    case WeightId::OmegaFaraway: return "omega_faraway";
    case WeightId::OmegaBar: return "omega_bar";
    case WeightId::ExpWeight: return "exp_weight";
    case WeightId::Alpha: return "alpha";
    case WeightId::AlphaBar: return "alpha_bar";
    case WeightId::SInvariant: return "s_invariant";
    case WeightId::SBarInvariant: return "s_bar_invariant";
    case WeightId::Psi: return "psi";
    case WeightId::PhiCorrection: return "phi_correction";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Trapping weights. bold_phi_minus is evaluated through the two conjugate
// forms, which are exact identities; the r <= 3M branch avoids the
// Omega^{-1} x (vanishing bracket) cancellation at the horizon.
template <class T>
T bold_phi_minus(const Shell<T>& s, const T& pt, double M) {
  using std::sqrt;
  const T r = s.r;
  const T bracket = r * sqrt(r) - sqrt(r + T(6.0 * M)) * (r - T(3.0 * M));   // > 0
  const T bracket_p = r * sqrt(r) + sqrt(r + T(6.0 * M)) * (r - T(3.0 * M)); // > 0
  if (value(r) <= 3.0 * M)
    return T(-2.0) * r * pu_over_omega_sq(s, pt, M) + T(27.0 * M * M) * sqrt(r) * pt / bracket;
  return T(2.0) * r * pv_value(s, pt, M) / omega_sq(s.r, M) -
         T(27.0 * M * M) * sqrt(r) * pt / bracket_p;
}

template <class T>
T phi_minus(const Shell<T>& s, const T& pt, double M) {
  return omega(s.r, M) * bold_phi_minus(s, pt, M);
}

// Omega phi_plus = r p_r* - r^{-1/2}(r+6M)^{1/2}(r-3M) p_t, regular up to H+.
template <class T>
T omega_phi_plus(const Shell<T>& s, const T& pt, double M) {
  using std::sqrt;
  return s.r * s.p_rstar - sqrt(s.r + T(6.0 * M)) * (s.r - T(3.0 * M)) / sqrt(s.r) * pt;
}

template <class T>
T phi_plus(const Shell<T>& s, const T& pt, double M) {
  return omega_phi_plus(s, pt, M) / omega(s.r, M);
}

// kappa(r, p_t) = |p_t| / (r^{1/2} (r+6M)^{1/2} Omega^2): the trapping
// damping rate of Lemma-phi-minus.
template <class T>
T kappa_rate(const Shell<T>& s, const T& pt, double M) {
  using std::sqrt;
  return -pt / (sqrt(s.r) * sqrt(s.r + T(6.0 * M)) * omega_sq(s.r, M));
}

// ---------------------------------------------------------------------------
// Redshift / r^p weights.
template <class T>
T redshift_pu(const Shell<T>& s, const T& pt, double M) {
  return -s.r * s.r * pu_over_omega_sq(s, pt, M);  // r^2 |p_u| / Omega^2
}

template <class T>
T rp_pv(const Shell<T>& s, const T& pt, double M, double p) {
  using std::pow;
  using std::abs;
  return pow(s.r, p) * abs(pv_value(s, pt, M)) / omega_sq(s.r, M);
}

// ---------------------------------------------------------------------------
// Multiplier and region weights.
// Multiplier weight: |xi| = |p_t| + eps chi_N (2r^2/Omega^2)|p_u|
//                          + eta p_r* [log^{-1}(2+r) - log^{-1}(2+3M)],
// the combination whose monotonicity the energy estimates use. (In the
// printed definition the eta-term enters xi with the opposite sign, which
// makes X_g|xi| <= 0 fail for every eps; the proof differentiates this one.)
template <class T>
T xi_weight(const Shell<T>& s, const T& pt, double M, double eps, double eta) {
  using std::log;
  const T rs_term = T(eps) * chi_N(s.r, M) * T(2.0) * s.r * s.r * pu_over_omega_sq(s, pt, M);
  const T log_term =
      T(eta) * s.p_rstar * (T(1.0) / log(T(2.0) + s.r) - T(1.0 / std::log(2.0 + 3.0 * M)));
  return pt + rs_term - log_term;
}

template <class T>
T zeta_weight(const Shell<T>& s, const T& pt, double M) {
  using std::pow;
  using std::abs;
  const double sg = sgn(value(s.p_rstar)) * sgn(value(s.r) - 3.0 * M);
  if (sg == 0.0) return T(2.0);
  const T mag = pow(abs(s.p_rstar / pt), 0.25) *
                pow(abs(T(1.0) / s.r - T(1.0 / (3.0 * M))), 0.25) * T(std::pow(M, 0.25));
  return T(2.0) - T(sg) * mag;
}

template <class T>
T omega_faraway(const Shell<T>& s, const T& pt, double) {
  using std::log;
  return T(1.0) - s.p_rstar / (-pt) * (T(3.0) - T(1.0) / log(T(2.0) + s.r));
}

template <class T>
T omega_bar(const Shell<T>& s, const T& pt, double M, double a, double R) {
  using std::pow;
  const T c1 = cutoff_decreasing(s.r - T(R));
  const T c2 = cutoff_decreasing(T(2.0) * s.p_rstar / pt);
  return c1 / T(std::pow(M, a)) + (T(1.0) - c1) * c2 / pow(s.r, a);
}

template <class T>
T exp_weight(const Shell<T>& s, const T& pt, double M, double b) {
  using std::exp;
  const T ratio = pv_value(s, pt, M) / pt;  // in [0,1]
  if (!(value(ratio) >= -1e-12 && value(ratio) <= 1.0 + 1e-12))
    throw std::domain_error("exp_weight: p_v/p_t outside [0,1]");
  return exp(T(b) * s.r * ratio);
}

// ---------------------------------------------------------------------------
// Flow-attached quantities (alpha, alpha-bar, Psi) travel with a trajectory.
struct FlowAttach {
  double alpha = 0.0, alphabar = 0.0, psi = 0.0;
};

// Generic evaluator. Flow-attached ids require `at`.
inline double eval_weight(WeightId id, const PhasePoint& p, const WeightParams& par,
                          const FlowAttach* at = nullptr) {
  const Shell<double> s = p.shell();
  const double pt = p.p_t;
  const double M = par.M;
  switch (id) {
    case WeightId::Pt: return pt;
    case WeightId::Pphi: return p.p_phi;
    case WeightId::Ell: return ang_mom(s);
    case WeightId::Pu: return pu_value(s, pt, M);
    case WeightId::Pv: return pv_value(s, pt, M);
    case WeightId::PN: return pN_value(s, pt, M);
    case WeightId::PTstar: return pTstar_value(s, pt, M);
    case WeightId::Xi: return xi_weight(s, pt, M, par.eps_xi, par.eta());
    case WeightId::RedshiftPu: return redshift_pu(s, pt, M);
    case WeightId::RpPv: return rp_pv(s, pt, M, par.rp_power);
    case WeightId::PhiMinus: return phi_minus(s, pt, M);
    case WeightId::BoldPhiMinus: return bold_phi_minus(s, pt, M);
    case WeightId::PhiPlus: return phi_plus(s, pt, M);
    case WeightId::OmegaPhiPlus: return omega_phi_plus(s, pt, M);
    case WeightId::LogPhiPlus: {
      const double w = std::abs(omega_phi_plus(s, pt, M)) / (2.0 * (p.r + 6.0 * M) * (-pt));
      return std::log(w);
    }
    case WeightId::Zeta: return zeta_weight(s, pt, M);
    case WeightId::OmegaFaraway: return omega_faraway(s, pt, M);
    case WeightId::OmegaBar: return omega_bar(s, pt, M, par.obar_a, par.obar_R);
    case WeightId::ExpWeight: return exp_weight(s, pt, M, par.exp_b);
    case WeightId::Alpha:
    case WeightId::AlphaBar:
    case WeightId::SInvariant:
    case WeightId::SBarInvariant:
    case WeightId::Psi:
    case WeightId::PhiCorrection: {
      if (!at) throw std::invalid_argument("eval_weight: flow-attached id needs FlowAttach");
      switch (id) {
        case WeightId::Alpha: return at->alpha;
        case WeightId::AlphaBar: return at->alphabar;
        case WeightId::SInvariant: return phi_minus(s, pt, M) * std::exp(at->alpha);
        case WeightId::SBarInvariant: return bold_phi_minus(s, pt, M) * std::exp(at->alphabar);
        case WeightId::Psi: return at->psi;
        case WeightId::PhiCorrection: return at->psi / (p.r + 6.0 * M);
        default: break;
      }
    }
  }
  throw std::logic_error("eval_weight: unhandled id");
}

// log |s| = log|phi_-| + alpha: the conserved quantity in overflow-safe form.
inline double log_abs_s_invariant(const PhasePoint& p, double alpha) {
  return std::log(std::abs(phi_minus(p.shell(), p.p_t, p.M))) + alpha;
}
inline double log_abs_sbar_invariant(const PhasePoint& p, double alphabar) {
  return std::log(std::abs(bold_phi_minus(p.shell(), p.p_t, p.M))) + alphabar;
}

// ---------------------------------------------------------------------------
// Dual-number Lie derivative X_g(w) of any templated weight evaluator.
template <class F>
double lie_derivative_dual(const F& w_of_shell, const PhasePoint& p) {
  double seed[7];
  Shell<double> sv = p.shell();
  spray_affine_seed(sv, p.p_t, p.M, seed);
  Shell<Dual> sd{{sv.t, seed[0]},      {sv.r, seed[1]},       {sv.theta, seed[2]},
                 {sv.phi, seed[3]},    {sv.p_rstar, seed[4]}, {sv.p_theta, seed[5]},
                 {sv.p_phi, seed[6]}};
  const Dual pt = pt_closure(sd, p.M);
  return w_of_shell(sd, pt).d;
}

inline double lie_derivative_dual(WeightId id, const PhasePoint& p, const WeightParams& par) {
  const double M = par.M;
  auto call = [&](auto&& f) { return lie_derivative_dual(f, p); };
  switch (id) {
    case WeightId::Pt:
      return call([&](const Shell<Dual>&, const Dual& pt) { return pt; });
    case WeightId::Pphi:
      return call([&](const Shell<Dual>& s, const Dual&) { return s.p_phi; });
    case WeightId::Ell:
      return call([&](const Shell<Dual>& s, const Dual&) { return ang_mom(s); });
    case WeightId::PN:
      return call([&](const Shell<Dual>& s, const Dual& pt) { return pN_value(s, pt, M); });
    case WeightId::Xi:
      return call([&](const Shell<Dual>& s, const Dual& pt) {
        return xi_weight(s, pt, M, par.eps_xi, par.eta());
      });
    case WeightId::RedshiftPu:
      return call([&](const Shell<Dual>& s, const Dual& pt) { return redshift_pu(s, pt, M); });
    case WeightId::RpPv:
      return call(
          [&](const Shell<Dual>& s, const Dual& pt) { return rp_pv(s, pt, M, par.rp_power); });
    case WeightId::PhiMinus:
      return call([&](const Shell<Dual>& s, const Dual& pt) { return phi_minus(s, pt, M); });
    case WeightId::BoldPhiMinus:
      return call([&](const Shell<Dual>& s, const Dual& pt) { return bold_phi_minus(s, pt, M); });
    case WeightId::PhiPlus:
      return call([&](const Shell<Dual>& s, const Dual& pt) { return phi_plus(s, pt, M); });
    case WeightId::OmegaPhiPlus:
      return call(
          [&](const Shell<Dual>& s, const Dual& pt) { return omega_phi_plus(s, pt, M); });
    case WeightId::LogPhiPlus:
      return call([&](const Shell<Dual>& s, const Dual& pt) {
        using std::abs;
        using std::log;
        return abs(log(abs(omega_phi_plus(s, pt, M)) /
                       (Dual(2.0) * (s.r + Dual(6.0 * M)) * (-pt))));
      });
    case WeightId::Zeta:
      return call([&](const Shell<Dual>& s, const Dual& pt) { return zeta_weight(s, pt, M); });
    case WeightId::OmegaFaraway:
      return call(
          [&](const Shell<Dual>& s, const Dual& pt) { return omega_faraway(s, pt, M); });
    default:
      throw std::invalid_argument("lie_derivative_dual: no pointwise evaluator for this id");
  }
}

// Closed-form X_g(w) where the catalog states one.
inline std::optional<double> lie_derivative_closed_form(WeightId id, const PhasePoint& p,
                                                        const WeightParams& par) {
  const Shell<double> s = p.shell();
  const double pt = p.p_t;
  const double M = par.M;
  switch (id) {
    case WeightId::Pt:
    case WeightId::Pphi:
    case WeightId::Ell: return 0.0;
    case WeightId::PhiMinus:
      return -kappa_rate(s, pt, M) * phi_minus(s, pt, M);
    case WeightId::PhiPlus:
      return kappa_rate(s, pt, M) * phi_plus(s, pt, M);
    case WeightId::BoldPhiMinus:
      return -damping_a(s, pt, M) * bold_phi_minus(s, pt, M);
    case WeightId::OmegaPhiPlus:
      return damping_a(s, pt, M) * omega_phi_plus(s, pt, M);
    case WeightId::RedshiftPu: {
      const double pu = pu_value(s, pt, M);
      const double om2 = omega_sq(p.r, M);
      return 2.0 * (p.r - 3.0 * M) / (om2 * om2) * pu * pu;
    }
    case WeightId::RpPv: {
      // X_g(r^p |p_v|/Omega^2) = (2M(1+p) - p r) r^{p-2} |p_v|^2 / Omega^4
      //                          + (p-2) r^{p-1} |p_u||p_v| / Omega^2,
      // obtained from the exact p=2 identity and X_g(r^{p-2}) = (p-2)p_r* r^{p-3}.
      const double pv = pv_value(s, pt, M);
      const double pu = pu_value(s, pt, M);
      const double om2 = omega_sq(p.r, M);
      const double q = par.rp_power;
      return (2.0 * M * (1.0 + q) - q * p.r) * std::pow(p.r, q - 2.0) / (om2 * om2) * pv * pv +
             (q - 2.0) * std::pow(p.r, q - 1.0) / om2 * std::abs(pu) * std::abs(pv);
    }
    default: return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Appendix-style bounds for the damped transport of Psi = (r+6M) Phi.
inline double psi_source_bound(const PhasePoint& p) {  // |b| <= 2|p_t|/r^2
  return 2.0 * (-p.p_t) / (p.r * p.r);
}
inline double psi_damping_lower_bound(const PhasePoint& p) {
  const double M = p.M, r = p.r;
  const double rp6 = r + 6.0 * M;
  return 6.0 * M * (-p.p_t) / (r * rp6 + std::sqrt(r) * rp6 * std::sqrt(rp6)) -
         2.0 * M / (r * r) * p.pu_over_om2();
}
// Boundedness monitor of the Psi estimate: (|p_N| + r^2 |p_v|)/|p_t| |Psi|.
inline double psi_monitor(const PhasePoint& p, double psi) {
  const double w = std::abs(p.pN()) + p.r * p.r * std::abs(p.pv());
  return w / std::abs(p.p_t) * std::abs(psi);
}

// ---------------------------------------------------------------------------
// Massive shells (Appendix B). All quantities live on P_m with the
// mass-shell closure |p_t|^2 = |p_r*|^2 + Omega^2 (m^2 + |p|^2/r^2).
struct MassiveRadii {
  double r_minus, r_plus;      // circular radii, need ell >= 2 sqrt(3) m M
  double rho_minus, rho_plus;  // window roots, need ell > 4 m M
  double a_m;                  // the massive analogue of 6M
};

inline MassiveRadii massive_radii(double m, double ell, double M) {
  MassiveRadii out{};
  if (!(ell >= 2.0 * std::sqrt(3.0) * m * M))
    throw std::domain_error("massive_radii: circular radii need ell >= 2 sqrt(3) m M");
  const double l2 = ell * ell;
  // 1 - sqrt(1-x) rationalized: r_- = 6M/(1+sqrt(1-x)), exact as m -> 0
  const double disc_r = std::sqrt(std::max(0.0, 1.0 - 12.0 * M * M * m * m / l2));
  out.r_minus = 6.0 * M / (1.0 + disc_r);
  out.r_plus = l2 / (2.0 * M * m * m) * (1.0 + disc_r);
  // r_- - 3M = 36 M^3 m^2 / (l^2 (1+disc)^2) exactly; substituted into a_m
  // it removes both the cancellation and the m^2 factor.
  out.a_m = std::pow(out.r_minus, 3) * (1.0 + disc_r) * (1.0 + disc_r) /
            (18.0 * M * (4.0 * M - out.r_minus));
  if (ell > 4.0 * m * M) {
    const double disc_rho = std::sqrt(1.0 - 16.0 * M * M * m * m / l2);
    out.rho_minus = 4.0 * M / (1.0 + disc_rho);
    out.rho_plus = l2 / (4.0 * M * m * m) * (1.0 + disc_rho);
  } else {
    out.rho_minus = out.rho_plus = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

template <class T>
T massive_pt_closure(const Shell<T>& s, double m, double M) {
  using std::sqrt;
  const T om2 = omega_sq(s.r, M);
  return -sqrt(s.p_rstar * s.p_rstar + om2 * (T(m * m) + ang_mom_sq(s) / (s.r * s.r)));
}

// phi_pm^m of the massive extension (verbatim prefactor; it approaches
// 2M phi_pm as m -> 0).
template <class T>
T massive_phi(const Shell<T>& s, const T& pt, double m, double M, int sign) {
  using std::sqrt;
  const T l2 = ang_mom_sq(s);
  const T ell = sqrt(l2);
  const MassiveRadii rad = massive_radii(m, value(ell), M);
  const T window = -T(m * m) * s.r * s.r + l2 / T(2.0 * M) * s.r - l2;
  if (!(value(window) > 0.0))
    throw std::domain_error("massive_phi: r outside (rho_-, rho_+)");
  const T pref = T(std::sqrt(2.0 * M)) * ell * s.r * sqrt(s.r) / sqrt(window);
  const T root = sqrt((T(1.0) + T(rad.a_m) / s.r)) * (T(1.0) - T(rad.r_minus) / s.r) *
                 sqrt(pt * pt - T(m * m));
  return pref * (s.p_rstar + T(double(sign)) * root);
}

// The flow-identity rate of the massive trapping weights:
// X_g(phi_pm^m) = (+/-) rate * phi_pm^m.
inline double massive_phi_rate(const Shell<double>& s, double pt, double m, double M) {
  const double ell = ang_mom(s);
  const MassiveRadii rad = massive_radii(m, ell, M);
  const double l2 = ell * ell;
  const double poly = m * m * s.r * s.r - l2 / (2.0 * M) * s.r + l2;  // < 0 in the window
  return m * m * std::sqrt(pt * pt - m * m) * std::sqrt(s.r) * (s.r - rad.r_plus) /
         (2.0 * std::sqrt(s.r + rad.a_m) * poly);
}

// Massive affine spray seed in the coordinate basis (r as radial state).
inline void massive_spray_seed(const Shell<double>& s, double pt, double m, double M,
                               double seed[7]) {
  const double r = s.r, th = s.theta;
  const double om2 = omega_sq(r, M);
  const double st = std::sin(th), ct = std::cos(th);
  const double l2 = ang_mom_sq(s);
  seed[0] = -pt / om2;
  seed[1] = s.p_rstar;
  seed[2] = s.p_theta / (r * r);
  seed[3] = s.p_phi / (r * r * st * st);
  seed[4] = -(m * m * M * r * r - (r - 3.0 * M) * l2) / (r * r * r * r);
  seed[5] = ct / st * s.p_phi * s.p_phi / (r * r * st * st);
  seed[6] = 0.0;
}

// Dual-number X_g(phi_pm^m) on the massive shell.
inline double massive_phi_lie_dual(const Shell<double>& sv, double m, double M, int sign) {
  const double pt = value(massive_pt_closure(sv, m, M));
  double seed[7];
  massive_spray_seed(sv, pt, m, M, seed);
  Shell<Dual> sd{{sv.t, seed[0]},      {sv.r, seed[1]},       {sv.theta, seed[2]},
                 {sv.phi, seed[3]},    {sv.p_rstar, seed[4]}, {sv.p_theta, seed[5]},
                 {sv.p_phi, seed[6]}};
  const Dual ptd = massive_pt_closure(sd, m, M);
  return massive_phi(sd, ptd, m, M, sign).d;
}

}  // namespace svlab
