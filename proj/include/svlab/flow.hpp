// svlab - null geodesic flow parametrized by t*
//
// Dormand-Prince RK5(4)7M with dense output drives everything that moves
// along orbits: the 7D flow itself, variational (Jacobian) transport, the
// line-integral accumulators alpha / alpha-bar, and the damped correction
// Psi of the modified commutator field. t* parametrization reaches the
// horizon at finite parameter and keeps every right-hand side smooth there.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "svlab/nullshell.hpp"

namespace svlab {

// ---------------------------------------------------------------------------
// t*-parametrized spray. State layout: y = (t, r, theta, phi, p_r*, p_theta,
// p_phi). The r-component is the coordinate-basis velocity dr/dt* (the
// tortoise-basis component times Omega^2).
template <class T>
void spray_tstar(const T* y, T* dy, double M) {
  using std::sin;
  using std::cos;
  Shell<T> s{y[0], y[1], y[2], y[3], y[4], y[5], y[6]};
  const T pt = pt_closure(s, M);
  const T fac = om2_over_lapse(s, pt, M);  // Omega^2 / (Omega^2 lambda)
  const T r2 = s.r * s.r;
  const T st = sin(s.theta);
  const T ct = cos(s.theta);
  const T l2 = ang_mom_sq(s);
  dy[0] = -pt / omega_sq(s.r, M) * fac;
  dy[1] = s.p_rstar * fac;  // Omega^2 * (p_r*/Omega^2)
  dy[2] = s.p_theta / r2 * fac;
  dy[3] = s.p_phi / (r2 * st * st) * fac;
  dy[4] = (s.r - T(3.0 * M)) / (r2 * r2) * l2 * fac;
  dy[5] = ct / st * s.p_phi * s.p_phi / (r2 * st * st) * fac;
  dy[6] = T(0.0);
}

// dt/dt* has an Omega^-2 which is genuine (t diverges at the horizon);
// rewrite it without cancellation: -p_t/Omega^2 * fac with
// fac = Omega^2/(Omega^2 lambda) gives -p_t/(Omega^2 lambda), fine as long
// as the ingoing branch of om2_over_lapse carried the Omega^2 explicitly.
// The division above keeps full accuracy because omega_sq(r) is exact in r.

// Affine spray components in the coordinate basis (t, r, ...), used for
// dual-number Lie derivatives X_g(w): seed the shell coordinates with these.
template <class T>
void spray_affine_seed(const Shell<T>& s, const T& pt, double M, double seed[7]) {
  const double r = value(s.r), th = value(s.theta);
  const double om2 = value(omega_sq(s.r, M));
  const double st = std::sin(th), ct = std::cos(th);
  const double l2 = value(ang_mom_sq(s));
  const double pphi = value(s.p_phi), ptheta = value(s.p_theta);
  seed[0] = -value(pt) / om2;
  seed[1] = value(s.p_rstar);  // Omega^2 * (p_r*/Omega^2)
  seed[2] = ptheta / (r * r);
  seed[3] = pphi / (r * r * st * st);
  seed[4] = (r - 3.0 * M) / (r * r * r * r) * l2;
  seed[5] = ct / st * pphi * pphi / (r * r * st * st);
  seed[6] = 0.0;
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) with the standard quartic dense output.
struct OdeStep {
  double s0 = 0.0, h = 0.0;
  std::vector<double> rcont;  // 5 * dim interpolation coefficients
};

struct OdeOptions {
  double rtol = 1e-12;
  double atol = 1e-14;
  double h_init = 1e-3;
  double h_max = 5.0;
  std::size_t max_steps = 2'000'000;
  // component excluded from step control (the slaved t-coordinate of the
  // geodesic systems; keeps time translation bitwise)
  int ignore_err_index = -1;
};

enum class OdeStatus { Reached, EventStop, StepUnderflow, MaxSteps, NotFinite };

struct OdeEvent {
  std::function<double(double, const double*)> g;  // root of g marks the event
  bool stop = true;
  int hits = 0;
  double s_hit = std::numeric_limits<double>::quiet_NaN();
};

class Dopri5 {
 public:
  using Rhs = std::function<void(double, const double*, double*)>;

  explicit Dopri5(int dim, OdeOptions opt = {}) : n_(dim), opt_(opt) { alloc(); }

  using Observer = std::function<void(double, const double*)>;

  // Integrates y from s0 to s1 (either direction). Returns on the first
  // stopping event, with y at the event point. The observer sees every
  // accepted step (and the initial state).
  OdeStatus integrate(const Rhs& f, double s0, double s1, std::vector<double>& y,
                      std::vector<OdeEvent>* events = nullptr, bool keep_dense = false,
                      const Observer& observe = nullptr) {
    steps_.clear();
    s_end_ = s0;
    if (s1 == s0) return OdeStatus::Reached;
    const double dir = s1 > s0 ? 1.0 : -1.0;
    double s = s0;
    double h = dir * std::min(opt_.h_init, std::abs(s1 - s0));
    f(s, y.data(), k_[0].data());
    if (observe) observe(s, y.data());
    std::vector<double> gprev;
    if (events) {
      for (auto& e : *events) gprev.push_back(e.g(s, y.data()));
      // a stopping condition that already holds at the start stops there
      for (std::size_t ie = 0; ie < events->size(); ++ie) {
        auto& ev = (*events)[ie];
        if (ev.stop && gprev[ie] <= 0.0) {
          ev.hits = 1;
          ev.s_hit = s;
          s_end_ = s;
          return OdeStatus::EventStop;
        }
      }
    }
    for (std::size_t step = 0; step < opt_.max_steps; ++step) {
      if (dir * (s + h - s1) > 0.0) h = s1 - s;
      bool last = std::abs(h) >= std::abs(s1 - s) * (1.0 - 1e-14);
      // stages
      for (int i = 1; i < 7; ++i) {
        for (int j = 0; j < n_; ++j) {
          double acc = 0.0;
          for (int l = 0; l < i; ++l) acc += A[i][l] * k_[l][j];
          yw_[j] = y[j] + h * acc;
        }
        f(s + C[i] * h, yw_.data(), k_[i].data());
      }
      // 5th order solution is stage 7's argument (FSAL): yw_ currently holds it
      double err = 0.0;
      for (int j = 0; j < n_; ++j) {
        if (j == opt_.ignore_err_index) continue;
        double e = 0.0;
        for (int l = 0; l < 7; ++l) e += E[l] * k_[l][j];
        e *= h;
        const double sc = opt_.atol + opt_.rtol * std::max(std::abs(y[j]), std::abs(yw_[j]));
        err += (e / sc) * (e / sc);
      }
      err = std::sqrt(err / n_);
      if (!std::isfinite(err)) return OdeStatus::NotFinite;
      if (err <= 1.0) {
        // accept: dense coefficients then advance
        OdeStep rec;
        rec.s0 = s;
        rec.h = h;
        rec.rcont.resize(5 * n_);
        for (int j = 0; j < n_; ++j) {
          const double ydiff = yw_[j] - y[j];
          const double bspl = h * k_[0][j] - ydiff;
          rec.rcont[j] = y[j];
          rec.rcont[n_ + j] = ydiff;
          rec.rcont[2 * n_ + j] = bspl;
          rec.rcont[3 * n_ + j] = ydiff - h * k_[6][j] - bspl;
          double d = 0.0;
          for (int l = 0; l < 7; ++l) d += D[l] * k_[l][j];
          rec.rcont[4 * n_ + j] = h * d;
        }
        const double s_new = s + h;
        // events on [s, s_new]
        if (events) {
          for (std::size_t ie = 0; ie < events->size(); ++ie) {
            auto& ev = (*events)[ie];
            const double g1 = ev.g(s_new, yw_.data());
            if (gprev[ie] > 0.0 && g1 <= 0.0) {
              double lo = 0.0, hi = 1.0;  // theta within the step
              for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                dense_eval(rec, s + mid * h, ytmp_.data());
                (ev.g(s + mid * h, ytmp_.data()) > 0.0 ? lo : hi) = mid;
              }
              if (ev.hits++ == 0) ev.s_hit = s + hi * h;  // first hit only
              if (ev.stop) {
                dense_eval(rec, ev.s_hit, y.data());
                s_end_ = ev.s_hit;
                if (keep_dense) steps_.push_back(std::move(rec));
                if (observe) observe(s_end_, y.data());
                return OdeStatus::EventStop;
              }
            }
            gprev[ie] = g1;
          }
        }
        if (keep_dense) steps_.push_back(std::move(rec));
        y.swap(yw_);
        k_[0].swap(k_[6]);  // FSAL
        s = s_new;
        s_end_ = s;
        if (observe) observe(s, y.data());
        if (last) return OdeStatus::Reached;
        h *= std::clamp(0.9 * std::pow(err + 1e-300, -0.2), 0.2, 5.0);
        if (std::abs(h) > opt_.h_max) h = dir * opt_.h_max;
      } else {
        h *= std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
        if (std::abs(h) < 1e-14 * (std::abs(s) + 1.0)) return OdeStatus::StepUnderflow;
      }
    }
    return OdeStatus::MaxSteps;
  }

  void dense_eval(const OdeStep& rec, double s, double* out) const {
    const double th = (s - rec.s0) / rec.h, th1 = 1.0 - th;
    for (int j = 0; j < n_; ++j) {
      out[j] = rec.rcont[j] +
               th * (rec.rcont[n_ + j] +
                     th1 * (rec.rcont[2 * n_ + j] +
                            th * (rec.rcont[3 * n_ + j] + th1 * rec.rcont[4 * n_ + j])));
    }
  }

  // Derivative of the dense interpolant, for d/ds checks along orbits.
  void dense_deriv(const OdeStep& rec, double s, double* out) const {
    const double th = (s - rec.s0) / rec.h, th1 = 1.0 - th;
    for (int j = 0; j < n_; ++j) {
      const double c2 = rec.rcont[n_ + j], c3 = rec.rcont[2 * n_ + j],
                   c4 = rec.rcont[3 * n_ + j], c5 = rec.rcont[4 * n_ + j];
      out[j] = (c2 + th1 * (c3 + th * (c4 + th1 * c5)) +
                th * (-c3 + (1.0 - 2.0 * th) * (c4 + th1 * c5) + th * th1 * (-c5))) /
               rec.h;
    }
  }

  const std::vector<OdeStep>& dense_steps() const { return steps_; }
  double s_end() const { return s_end_; }

 private:
  void alloc() {
    for (auto& k : k_) k.assign(n_, 0.0);
    yw_.assign(n_, 0.0);
    ytmp_.assign(n_, 0.0);
  }
  int n_;
  OdeOptions opt_;
  std::vector<double> k_[7], yw_, ytmp_;
  std::vector<OdeStep> steps_;
  double s_end_ = 0.0;

  static constexpr double C[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double A[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static constexpr double E[7] = {71.0 / 57600,  0.0,           -71.0 / 16695, 71.0 / 1920,
                                  -17253.0 / 339200, 22.0 / 525, -1.0 / 40};
  static constexpr double D[7] = {-12715105075.0 / 11282082432.0,
                                  0.0,
                                  87487479700.0 / 32700410799.0,
                                  -10690763975.0 / 1880347072.0,
                                  701980252875.0 / 199316789632.0,
                                  -1453857185.0 / 822651844.0,
                                  69997945.0 / 29380423.0};
};

// ---------------------------------------------------------------------------
// Accumulator rates (per unit t*).
//   alpha:     |p_t| / (r^{1/2}(r+6M)^{1/2} Omega^2 lambda)
//   alpha-bar: a(r, p_r*, p_t) / lambda
//   Psi:       (b - abar Psi) / lambda
template <class T>
T damping_a(const Shell<T>& s, const T& pt, double M) {
  using std::sqrt;
  const T rp6 = sqrt(s.r + T(6.0 * M));
  const T r32 = s.r * sqrt(s.r);
  const T first = (s.r * s.r + T(2.0 * M) * s.r + T(3.0 * M * M)) * (-pt) /
                  (s.r * rp6 * (r32 + T(M) * rp6));
  return first - T(2.0 * M) / (s.r * s.r) * pu_over_omega_sq(s, pt, M);
}

template <class T>
T damping_abar(const Shell<T>& s, const T& pt, double M) {
  return damping_a(s, pt, M) - s.p_rstar / (s.r + T(6.0 * M));
}

template <class T>
T source_b(const Shell<T>& s, const T& pt, double M) {
  using std::sqrt;
  return (s.r + T(3.0 * M)) * (-pt) / (s.r * s.r * sqrt(s.r) * sqrt(s.r + T(6.0 * M)));
}

struct AccumRates {
  double alpha, alphabar, psi;  // d/dt* given current psi
};

inline AccumRates accumulator_rates(const Shell<double>& s, double pt, double M, double psi) {
  const double fac = om2_over_lapse(s, pt, M);           // Omega^2/(Omega^2 lambda)
  const double om2 = omega_sq(s.r, M);
  const double inv_lambda = fac;                          // == Omega^2/(...) ; 1/lambda = fac
  const double kappa = -pt / (std::sqrt(s.r) * std::sqrt(s.r + 6.0 * M) * om2);
  AccumRates a;
  a.alpha = kappa * inv_lambda;
  a.alphabar = damping_a(s, pt, M) * inv_lambda;
  a.psi = (source_b(s, pt, M) - damping_abar(s, pt, M) * psi) * inv_lambda;
  return a;
}

// ---------------------------------------------------------------------------
// Orbit integration.
struct FlowOptions {
  OdeOptions ode{};
  double eps_horizon = 1e-8;   // stop at r <= 2M(1+eps)
  double r_escape = 2000.0;    // classified escaped beyond this with p_r* > 0
  double tstar_max = 500.0;
  double R_split = 832.0;      // far-region split of the commuted estimates
  bool accumulators = false;   // carry (alpha, alphabar, Psi)
  bool jacobian = false;       // carry the 7x7 variational matrix
};

struct FlowSample {
  double s = 0.0;                       // t*
  PhasePoint pp{};
  double alpha = 0.0, alphabar = 0.0, psi = 0.0;
  std::vector<double> jac;              // row-major 7x7 if enabled
};

enum class OrbitTag { CrossesHorizon, Escapes, TrappedNumerical };

struct OrbitClass {
  OrbitTag tag = OrbitTag::TrappedNumerical;
  double tstar_exit = std::numeric_limits<double>::quiet_NaN();
  double t1 = 0.0, t2 = 0.0;  // region first-exit times of Lemma-style bookkeeping
};

class Trajectory {
 public:
  std::vector<FlowSample> samples;
  OdeStatus status = OdeStatus::Reached;
  OrbitClass orbit{};
  int dim = 7;

  const FlowSample& back() const { return samples.back(); }
};

namespace detail {
inline PhasePoint state_to_point(const double* y, double M) {
  PhasePoint p{y[0], y[1], y[2], y[3], y[4], y[5], y[6], 0.0, M};
  p.p_t = pt_closure(p.shell(), M);
  return p;
}

// RHS of the full system: 7 base + optional 49 Jacobian + optional 3 accum.
struct FullSystem {
  double M;
  bool jac, acc;
  int dim() const { return 7 + (jac ? 49 : 0) + (acc ? 3 : 0); }
  void operator()(double, const double* y, double* dy) const {
    spray_tstar(y, dy, M);
    int off = 7;
    if (jac) {
      // A = d(spray)/dy via 7 dual sweeps, then dJ/ds = A J.
      double Amat[7][7];
      for (int c = 0; c < 7; ++c) {
        Dual yd[7], dyd[7];
        for (int j = 0; j < 7; ++j) yd[j] = {y[j], j == c ? 1.0 : 0.0};
        spray_tstar(yd, dyd, M);
        for (int rix = 0; rix < 7; ++rix) Amat[rix][c] = dyd[rix].d;
      }
      for (int rix = 0; rix < 7; ++rix)
        for (int c = 0; c < 7; ++c) {
          double s = 0.0;
          for (int l = 0; l < 7; ++l) s += Amat[rix][l] * y[off + 7 * l + c];
          dy[off + 7 * rix + c] = s;
        }
      off += 49;
    }
    if (acc) {
      Shell<double> s{y[0], y[1], y[2], y[3], y[4], y[5], y[6]};
      const double pt = pt_closure(s, M);
      const AccumRates r = accumulator_rates(s, pt, M, y[off + 2]);
      dy[off] = r.alpha;
      dy[off + 1] = r.alphabar;
      dy[off + 2] = r.psi;
    }
  }
};
}  // namespace detail

// Integrates the orbit through pp over t* in [pp.tstar(), pp.tstar()+span]
// (span may be negative), sampling at accepted steps. Shell closure is exact
// by construction: p_t is never integrated.
inline Trajectory integrate_orbit(const PhasePoint& pp, double span, const FlowOptions& opt = {},
                                  std::vector<double> psi0 = {}) {
  detail::FullSystem sys{pp.M, opt.jacobian, opt.accumulators};
  const int dim = sys.dim();
  std::vector<double> y(dim, 0.0);
  y[0] = pp.t;
  y[1] = pp.r;
  y[2] = pp.theta;
  y[3] = pp.phi;
  y[4] = pp.p_rstar;
  y[5] = pp.p_theta;
  y[6] = pp.p_phi;
  if (opt.jacobian)
    for (int i = 0; i < 7; ++i) y[7 + 8 * i] = 1.0;
  if (opt.accumulators && !psi0.empty()) {
    y[dim - 3] = psi0.size() > 0 ? psi0[0] : 0.0;
    y[dim - 2] = psi0.size() > 1 ? psi0[1] : 0.0;
    y[dim - 1] = psi0.size() > 2 ? psi0[2] : 0.0;
  }

  const double M = pp.M;
  const double s0 = pp.tstar();
  OdeOptions oo = opt.ode;
  oo.ignore_err_index = 0;  // t is slaved; keeps time translation exact
  Dopri5 ode(dim, oo);
  std::vector<OdeEvent> events;
  events.push_back({[M, &opt](double, const double* yy) {
                      return yy[1] - 2.0 * M * (1.0 + opt.eps_horizon);
                    },
                    true});
  events.push_back({[&opt](double, const double* yy) {
                      return (yy[4] > 0.0) ? (opt.r_escape - yy[1])
                                           : std::numeric_limits<double>::max();
                    },
                    true});

  Trajectory out;
  out.dim = dim;
  auto record = [&](double s, const std::vector<double>& yy) {
    FlowSample smp;
    smp.s = s;
    smp.pp = detail::state_to_point(yy.data(), M);
    int off = 7;
    if (opt.jacobian) {
      smp.jac.assign(yy.begin() + off, yy.begin() + off + 49);
      off += 49;
    }
    if (opt.accumulators) {
      smp.alpha = yy[off];
      smp.alphabar = yy[off + 1];
      smp.psi = yy[off + 2];
    }
    out.samples.push_back(std::move(smp));
  };

  record(s0, y);
  Dopri5::Rhs rhs = [&sys](double s, const double* yy, double* dyy) { sys(s, yy, dyy); };
  out.status = ode.integrate(rhs, s0, s0 + span, y, &events, true);
  // re-sample accepted steps from the dense record
  std::vector<double> ytmp(dim);
  for (const auto& st : ode.dense_steps()) {
    const double s1 = st.s0 + st.h;
    if ((span > 0 && s1 > ode.s_end() + 1e-14) || (span < 0 && s1 < ode.s_end() - 1e-14)) break;
    ode.dense_eval(st, s1, ytmp.data());
    record(s1, ytmp);
  }
  if (out.samples.size() >= 2 && std::abs(out.samples.back().s - ode.s_end()) > 1e-12)
    record(ode.s_end(), y);
  return out;
}

// Analytic pre-classification plus numerical confirmation with region-entry
// bookkeeping. The potential comparison is 27 M^2 p_t^2 vs |p|^2 together
// with the side of the potential barrier.
inline OrbitClass classify_orbit(const PhasePoint& pp, const FlowOptions& opt = {}) {
  OrbitClass oc;
  const double M = pp.M;
  const double ell2 = ang_mom_sq(pp.shell());
  const double disc = 27.0 * M * M * pp.p_t * pp.p_t - ell2;

  detail::FullSystem sys{M, false, false};
  std::vector<double> y = {pp.t, pp.r, pp.theta, pp.phi, pp.p_rstar, pp.p_theta, pp.p_phi};
  OdeOptions oo = opt.ode;
  oo.ignore_err_index = 0;
  Dopri5 ode(7, oo);
  const double R = opt.R_split;
  bool in_far_in = (pp.p_rstar <= 0.0 && pp.r >= R);
  bool in_bounded = (pp.r <= R);
  std::vector<OdeEvent> events;
  events.push_back({[M, &opt](double, const double* yy) {
                      return yy[1] - 2.0 * M * (1.0 + opt.eps_horizon);
                    },
                    true});
  // escape is certain once the orbit is outgoing at or beyond the potential
  // peak: {p_r* > 0, r >= 3M} is forward-invariant and unbounded
  events.push_back({[M, &opt](double, const double* yy) {
                      if (yy[4] <= 0.0) return 1.0;
                      if (yy[1] >= opt.r_escape) return -1.0;
                      return 3.0 * M * (1.0 + 1e-9) - yy[1];
                    },
                    true});
  // region bookkeeping events (non-stopping): leave {p_r*<=0, r>=R}, leave {r<=R}
  events.push_back({[R](double, const double* yy) { return std::min(-yy[4], yy[1] - R); }, false});
  events.push_back({[R](double, const double* yy) { return R - yy[1]; }, false});

  const double s0 = pp.tstar();
  Dopri5::Rhs rhs = [&sys](double s, const double* yy, double* dyy) { sys(s, yy, dyy); };
  OdeStatus st = ode.integrate(rhs, s0, s0 + opt.tstar_max, y, &events);

  if (st == OdeStatus::EventStop && events[0].hits > 0) {
    oc.tag = OrbitTag::CrossesHorizon;
    oc.tstar_exit = events[0].s_hit;
  } else if (st == OdeStatus::EventStop && events[1].hits > 0) {
    oc.tag = OrbitTag::Escapes;
    oc.tstar_exit = events[1].s_hit;
  } else {
    oc.tag = OrbitTag::TrappedNumerical;
    oc.tstar_exit = ode.s_end();
  }
  // Exactly-trapped analytic case keeps the numerical tag.
  if (disc == 0.0 && pp.p_rstar == 0.0) oc.tag = OrbitTag::TrappedNumerical;

  const double censored = ode.s_end() - s0;
  oc.t1 = in_far_in ? (events[2].hits ? events[2].s_hit - s0 : censored) : 0.0;
  const bool enters_bounded = in_bounded || events[2].hits || oc.tag == OrbitTag::CrossesHorizon;
  if (events[3].hits)
    oc.t2 = events[3].s_hit - s0;  // left {r <= R} outward
  else if (oc.tag == OrbitTag::CrossesHorizon)
    oc.t2 = oc.tstar_exit - s0;  // left through the horizon
  else if (enters_bounded)
    oc.t2 = censored;  // numerically trapped within the run
  else
    oc.t2 = oc.t1;  // never visits the bounded region
  if (oc.t2 < oc.t1) oc.t2 = oc.t1;
  return oc;
}

// Max relative drift of (E, l_z, l) over a trajectory.
inline ConservedSet conserved_drift(const Trajectory& tr) {
  const ConservedSet c0 = conserved(tr.samples.front().pp);
  ConservedSet d{0.0, 0.0, 0.0};
  for (const auto& s : tr.samples) {
    const ConservedSet c = conserved(s.pp);
    d.E = std::max(d.E, std::abs(c.E - c0.E) / c0.E);
    d.lz = std::max(d.lz, std::abs(c.lz - c0.lz) / (std::abs(c0.lz) + 1e-300));
    d.l = std::max(d.l, std::abs(c.l - c0.l) / (c0.l + 1e-300));
  }
  return d;
}

}  // namespace svlab
