// svlab - massless Vlasov fields by backward characteristics
//
// Fields are reconstructed by tracing quadrature nodes on the target leaf
// back to the data surface {t* = 0}; derivative fluxes transport leaf-tangent
// vectors along the same trace, and the correction Psi accumulates its
// Duhamel integral on the way. Spherically symmetric runs use the reduced
// (r, p_r*, ell) parametrization throughout.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "svlab/expr.hpp"
#include "svlab/fields.hpp"
#include "svlab/quadrature.hpp"

namespace svlab {

// ---------------------------------------------------------------------------
// Initial data: smooth nonnegative density over (r, p_r*, ell) on {t*=0},
// with compact support and a dual-number gradient oracle.
enum class Symmetry { SphericallySymmetric, Axisymmetric, Full };

struct SupportBox {
  double r_lo = 4.0, r_hi = 9.0;
  double pr_lo = -1.0, pr_hi = 1.0;
  double ell_lo = 0.0, ell_hi = 4.0;
};

class InitialData {
 public:
  Symmetry symmetry = Symmetry::SphericallySymmetric;
  SupportBox box{};
  std::string label = "custom";

  static InitialData gaussian_shell(double M, double r0 = 7.0, double wr = 1.5,
                                    double pr0 = 0.0, double wpr = 0.8, double wl = 3.5,
                                    double amp = 1.0);
  static InitialData trapped_bump(double M, double width_r = 0.6, double wpr = 0.35,
                                  double ell0 = 5.196, double wl = 1.2, double amp = 1.0);
  static InitialData exponential_tail(double M, double r0 = 6.0, double L = 12.0,
                                      double wpr = 0.8, double wl = 3.0, double amp = 1.0);
  static InitialData from_expression(const std::string& expr, const SupportBox& support);

  double operator()(double r, double pr, double ell) const { return fd_(r, pr, ell); }
  Dual eval_dual(const Dual& r, const Dual& pr, const Dual& ell) const {
    return fdual_(r, pr, ell);
  }
  // gradient oracle: (d/dr, d/dpr, d/dell) via dual numbers
  std::array<double, 3> gradient(double r, double pr, double ell) const {
    return {fdual_({r, 1.0}, {pr, 0.0}, {ell, 0.0}).d,
            fdual_({r, 0.0}, {pr, 1.0}, {ell, 0.0}).d,
            fdual_({r, 0.0}, {pr, 0.0}, {ell, 1.0}).d};
  }

  // conserved-quantity window of the support (used for fiber pruning)
  double E_min = 0.0, E_max = 0.0;
  void finalize(double M) {
    auto vfun = [&](double r) { return omega_sq(r, M) / (r * r); };
    double vmax = std::max(vfun(box.r_lo), vfun(box.r_hi));
    if (box.r_lo < 3.0 * M && 3.0 * M < box.r_hi) vmax = std::max(vmax, vfun(3.0 * M));
    const double vmin = std::min(vfun(box.r_lo), vfun(box.r_hi));
    const double pr2max = std::max(box.pr_lo * box.pr_lo, box.pr_hi * box.pr_hi);
    const double pr2min =
        (box.pr_lo <= 0.0 && box.pr_hi >= 0.0) ? 0.0 : std::min(box.pr_lo * box.pr_lo,
                                                                box.pr_hi * box.pr_hi);
    E_max = std::sqrt(pr2max + box.ell_hi * box.ell_hi * vmax);
    E_min = std::sqrt(pr2min + box.ell_lo * box.ell_lo * vmin);
  }

  template <class F>
  void set_density(F f) {
    fd_ = [f](double r, double pr, double l) { return f(r, pr, l); };
    fdual_ = [f](const Dual& r, const Dual& pr, const Dual& l) { return f(r, pr, l); };
  }

 private:
  std::function<double(double, double, double)> fd_;
  std::function<Dual(const Dual&, const Dual&, const Dual&)> fdual_;
};

inline InitialData InitialData::gaussian_shell(double M, double r0, double wr, double pr0,
                                               double wpr, double wl, double amp) {
  InitialData d;
  d.label = "gaussian-shell";
  d.set_density([=](const auto& r, const auto& pr, const auto& l) {
    return decltype(r)(amp) * bump_fn((r - decltype(r)(r0)) / decltype(r)(wr)) *
           bump_fn((pr - decltype(r)(pr0)) / decltype(r)(wpr)) * bump_fn(l / decltype(r)(wl));
  });
  d.box = {r0 - wr, r0 + wr, pr0 - wpr, pr0 + wpr, 0.0, wl};
  d.finalize(M);
  return d;
}

inline InitialData InitialData::trapped_bump(double M, double width_r, double wpr, double ell0,
                                             double wl, double amp) {
  InitialData d;
  d.label = "trapped-neighborhood-bump";
  const double r0 = 3.0 * M;
  d.set_density([=](const auto& r, const auto& pr, const auto& l) {
    return decltype(r)(amp) * bump_fn((r - decltype(r)(r0)) / decltype(r)(width_r)) *
           bump_fn(pr / decltype(r)(wpr)) * bump_fn((l - decltype(r)(ell0)) / decltype(r)(wl));
  });
  d.box = {r0 - width_r, r0 + width_r, -wpr, wpr, std::max(0.0, ell0 - wl), ell0 + wl};
  d.finalize(M);
  return d;
}

inline InitialData InitialData::exponential_tail(double M, double r0, double L, double wpr,
                                                 double wl, double amp) {
  InitialData d;
  d.label = "exponential-tail";
  // e^{-(r-r0)/L} with a smooth switch-on at r0 and a smooth far cutoff once
  // the amplitude is below 1e-20: the support stays genuinely compact.
  const double r_cut = r0 + 46.0 * L;
  d.set_density([=](const auto& r, const auto& pr, const auto& l) {
    using T = std::remove_cvref_t<decltype(r)>;
    const T ramp = smoothstep5((r - T(r0 - 1.5)) / T(1.5));
    const T cut = T(1.0) - smoothstep5((r - T(r_cut - 6.0 * L)) / T(6.0 * L));
    using std::exp;
    return T(amp) * ramp * cut * exp(-(r - T(r0)) / T(L)) * bump_fn(pr / T(wpr)) *
           bump_fn(l / T(wl));
  });
  d.box = {r0 - 1.5, r_cut, -wpr, wpr, 0.0, wl};
  d.finalize(M);
  return d;
}

inline InitialData InitialData::from_expression(const std::string& expr,
                                                const SupportBox& support) {
  InitialData d;
  d.label = "expression";
  auto e = std::make_shared<Expression>(expr);
  d.fd_ = [e](double r, double pr, double l) { return e->eval<double>(r, pr, l); };
  d.fdual_ = [e](const Dual& r, const Dual& pr, const Dual& l) { return e->eval<Dual>(r, pr, l); };
  d.box = support;
  d.finalize(1.0);
  return d;
}

// ---------------------------------------------------------------------------
// Reduced backward tracer. State: (r, p_r*) [+ three 2D leaf-tangent vectors]
// [+ (D, S) for the Duhamel integral of Psi]. All traces run t* backwards to
// the data surface; analytic barrier arguments prune traces that provably end
// outside the support.
struct TraceOptions {
  OdeOptions ode{1e-11, 1e-13, 1e-3, 40.0, 400000};
  double eps_horizon = 1e-9;
};

struct NodeEval {
  bool outside = false;  // provably outside the support (f = 0)
  double f = 0.0;
  double dtf = 0.0;    // d_t f
  double vpf = 0.0;    // bold_V_plus f
  double vmodf = 0.0;  // bold_V_plus_mod f
  double dprf = 0.0;   // D_p_r* f
  double psi = 0.0;    // Psi at the node
};

namespace detail_vlasov {

template <class T>
void reduced_rhs(const T* y, T* dy, double ell, double M) {
  Shell<T> s{T(0.0), y[0], T(M_PI / 2.0), T(0.0), y[1], T(ell), T(0.0)};
  const T pt = pt_closure(s, M);
  const T fac = om2_over_lapse(s, pt, M);
  dy[0] = y[1] * fac;
  dy[1] = (y[0] - T(3.0 * M)) / (y[0] * y[0] * y[0] * y[0]) * T(ell * ell) * fac;
}

struct BackwardSystem {
  double ell, M;
  bool tangents, psi;
  int dim() const { return 2 + (tangents ? 6 : 0) + (psi ? 2 : 0); }
  void operator()(double, const double* y, double* dy) const {
    double fy[2];
    reduced_rhs(y, fy, ell, M);
    dy[0] = -fy[0];
    dy[1] = -fy[1];
    int off = 2;
    if (tangents) {
      double A[2][2];
      for (int c = 0; c < 2; ++c) {
        Dual yd[2] = {{y[0], c == 0 ? 1.0 : 0.0}, {y[1], c == 1 ? 1.0 : 0.0}};
        Dual dyd[2];
        reduced_rhs(yd, dyd, ell, M);
        A[0][c] = dyd[0].d;
        A[1][c] = dyd[1].d;
      }
      for (int k = 0; k < 3; ++k) {
        const double d0 = y[off + 2 * k], d1 = y[off + 2 * k + 1];
        dy[off + 2 * k] = -(A[0][0] * d0 + A[0][1] * d1);
        dy[off + 2 * k + 1] = -(A[1][0] * d0 + A[1][1] * d1);
      }
      off += 6;
    }
    if (psi) {
      Shell<double> s{0.0, y[0], M_PI / 2.0, 0.0, y[1], ell, 0.0};
      const double pt = pt_closure(s, M);
      const double inv_lambda = om2_over_lapse(s, pt, M);
      const double abar = damping_abar(s, pt, M) * inv_lambda;
      const double b = source_b(s, pt, M) * inv_lambda;
      dy[off] = abar;                          // D(sigma)
      dy[off + 1] = std::exp(-y[off]) * b;     // S -> Psi at the node
    }
  }
};

}  // namespace detail_vlasov

class ReducedTracer {
 public:
  ReducedTracer(const InitialData& data, double M, TraceOptions opt, bool derivatives)
      : data_(&data), M_(M), opt_(opt), derivatives_(derivatives) {
    r_in_cut_ = std::min(data.box.r_lo, 3.0 * M) * (1.0 - 1e-12);
    r_out_cut_ = std::max(data.box.r_hi, 3.0 * M) * (1.0 + 1e-12);
  }

  // Evaluates f (and, if enabled, the derivative fluxes and Psi) at the shell
  // point (r, p_r*, ell) sitting at EF time t* = ts >= 0.
  NodeEval evaluate(double r, double pr, double ell, double ts) const {
    NodeEval out;
    Shell<double> s{0.0, r, M_PI / 2.0, 0.0, pr, ell, 0.0};
    const double pt = pt_closure(s, M_);
    const double E = -pt;
    // conserved-window and causal pruning
    if (E < data_->E_min - 1e-14 || E > data_->E_max + 1e-14 ||
        ell > data_->box.ell_hi + 1e-14 || ell < data_->box.ell_lo - 1e-14) {
      out.outside = true;
      return out;
    }
    const double dist = r < data_->box.r_lo ? data_->box.r_lo - r
                        : (r > data_->box.r_hi ? r - data_->box.r_hi : 0.0);
    if (dist > ts) {  // |dr/dt*| <= 1
      out.outside = true;
      return out;
    }
    // Barrier monotonicity: ingoing beyond the support goes out backwards
    // forever; outgoing below min(r_lo, 3M) came from below it.
    if ((pr < 0.0 && r >= r_out_cut_) || (pr > 0.0 && r <= r_in_cut_)) {
      out.outside = true;
      return out;
    }

    detail_vlasov::BackwardSystem sys{ell, M_, derivatives_, derivatives_};
    const int dim = sys.dim();
    std::vector<double> y(dim, 0.0);
    y[0] = r;
    y[1] = pr;
    double W[3][2];  // leaf-tangent vectors at the node (coordinate basis)
    if (derivatives_) {
      fill_tangents(s, pt, W);
      for (int k = 0; k < 3; ++k) {
        y[2 + 2 * k] = W[k][0];
        y[2 + 2 * k + 1] = W[k][1];
      }
    }

    std::vector<OdeEvent> events;
    const double M = M_;
    const double ri = r_in_cut_, ro = r_out_cut_, eh = opt_.eps_horizon;
    // provably-outside exits: see the barrier argument in the docs
    events.push_back({[ro](double, const double* yy) {
                        return yy[1] < 0.0 ? (ro - yy[0]) : 1.0;
                      },
                      true});
    events.push_back({[ri](double, const double* yy) {
                        return yy[1] > 0.0 ? (yy[0] - ri) : 1.0;
                      },
                      true});
    events.push_back({[M, eh](double, const double* yy) {
                        return yy[0] - 2.0 * M * (1.0 + eh);
                      },
                      true});

    if (ts > 0.0) {
      Dopri5 ode(dim, opt_.ode);
      Dopri5::Rhs rhs = [&sys](double sg, const double* yy, double* dyy) { sys(sg, yy, dyy); };
      const OdeStatus st = ode.integrate(rhs, 0.0, ts, y, &events);
      if (st == OdeStatus::EventStop) {
        out.outside = true;
        return out;
      }
      if (st != OdeStatus::Reached)
        throw std::runtime_error("backward trace failed before reaching the data surface");
    }

    const double r0 = y[0], pr0 = y[1];
    if (r0 < data_->box.r_lo || r0 > data_->box.r_hi || std::abs(pr0) >
        std::max(std::abs(data_->box.pr_lo), std::abs(data_->box.pr_hi)) + 1.0) {
      out.outside = true;
      return out;
    }
    out.f = (*data_)(r0, pr0, ell);
    if (derivatives_) {
      const auto g = data_->gradient(r0, pr0, ell);
      auto contract = [&](int k) {
        return g[0] * y[2 + 2 * k] + g[1] * y[2 + 2 * k + 1];
      };
      const double dt_f = contract(0);
      const double vp_f = contract(1);
      const double dpr_f = contract(2);
      out.dtf = dt_f;
      const int off = 2 + 6;
      out.psi = y[off + 1];
      out.vpf = vp_f;
      const double phi = out.psi / (r + 6.0 * M);
      const double rbphi = r * bold_phi_minus(s, pt, M_);
      out.vmodf = vp_f + phi * rbphi * dpr_f;
      const double om = omega(r, M_);
      out.dprf = std::sqrt(om) * std::pow(E, 0.75) *
                 std::pow(std::abs(bold_phi_minus(s, pt, M_)) / r, 1.25) * dpr_f;
    }
    return out;
  }

 private:
  // Leaf-tangent representatives W = Z - Z(t*) Xhat for Z in {d_t,
  // bold_V_plus, d_p_r*}, reduced to (r, p_r*) components in the coordinate
  // basis. X_|p| drops out for spherically symmetric data.
  void fill_tangents(const Shell<double>& s, double pt, double W[3][2]) const {
    const double M = M_;
    const double r = s.r;
    const double om2 = omega_sq(r, M);
    double xhat[2];
    {
      double y[2] = {r, s.p_rstar}, dy[2];
      detail_vlasov::reduced_rhs(y, dy, s.p_theta, M);
      xhat[0] = dy[0];
      xhat[1] = dy[1];
    }
    // Z = d_t: Z(t*) = 1, no (r, pr) components.
    W[0][0] = -xhat[0];
    W[0][1] = -xhat[1];
    // Z = bold_V_plus: coordinate r-component = r, t* slope from the display.
    const double sq6 = std::sqrt(r + 6.0 * M), sqr = std::sqrt(r);
    const double zt = (sq6 * (r - 3.0 * M) + 2.0 * M * sqr) / (sqr * om2);
    const double zpr = vplus_pr_coeff(s, pt, M) / std::sqrt(om2);
    W[1][0] = r - zt * xhat[0];
    W[1][1] = zpr - zt * xhat[1];
    // Z = d_p_r*: already leaf-tangent.
    W[2][0] = 0.0;
    W[2][1] = 1.0;
  }

  const InitialData* data_;
  double M_;
  TraceOptions opt_;
  bool derivatives_;
  double r_in_cut_, r_out_cut_;
};

// ---------------------------------------------------------------------------
// Flux norms over a leaf.
inline constexpr int kNumNorms = 15;
inline const std::array<const char*, kNumNorms>& norm_names() {
  static const std::array<const char*, kNumNorms> names = {
      "E_pN",    "E_phi_dt", "E_phi_Xsl", "E_pN_Vmod", "E_34_V",
      "E_Dpr",   "calE",     "calE_p1",   "calE_p2",   "calE_exp",
      "calE_iled", "E_num",  "E_energy",  "E_absLz",   "E_deg_iled"};
  return names;
}
inline int norm_index(const std::string& name) {
  const auto& nn = norm_names();
  for (int i = 0; i < kNumNorms; ++i)
    if (name == nn[i]) return i;
  throw std::invalid_argument("unknown norm tag: " + name);
}

using NormVec = std::array<double, kNumNorms>;

inline NormVec operator+(NormVec a, const NormVec& b) {
  for (int i = 0; i < kNumNorms; ++i) a[i] += b[i];
  return a;
}

struct GridSpec {
  int gl_pts = 8;
  int panels_r_space = 8;    // spacelike piece of the leaf
  int panels_r_cone = 5;     // cone piece, per geometric batch
  double cone_growth = 2.2;  // batch radial growth factor
  int max_cone_batches = 7;  // caps the cone at ~600 M by default
  double cone_tail_rel = 1e-7;
  int panels_pr = 2;
  int panels_ell = 3;
  int panels_tstar = 10;  // cylinder tallies
  double r_floor = 0.0;   // inner truncation (0: 2M(1+1e-6))
};

struct LeafJob {
  double r, w_r;     // radial node and its full radial weight (with measure)
  double ts;         // t* of the node
  bool cone;         // which piece of the leaf
};

// ILED radial weight of the main theorem, 1/(r log^2(2+r)), and its slope.
inline double iled_weight(double r) {
  const double lg = std::log(2.0 + r);
  return 1.0 / (r * lg * lg);
}
inline double iled_weight_slope(double r) {
  const double lg = std::log(2.0 + r);
  return -1.0 / (r * r * lg * lg) - 2.0 / (r * (2.0 + r) * lg * lg * lg);
}

class FluxLab {
 public:
  FluxLab(double M, double R0, InitialData data, GridSpec grid = {}, TraceOptions topt = {},
          bool derivatives = true, unsigned threads = 0, double exp_b = 0.05)
      : M_(M),
        fol_(M, R0),
        data_(std::move(data)),
        grid_(grid),
        topt_(topt),
        derivatives_(derivatives),
        threads_(threads),
        exp_b_(exp_b),
        rule_(grid.gl_pts),
        tracer_(data_, M, topt, derivatives) {
    r_floor_ = grid_.r_floor > 0.0 ? grid_.r_floor : 2.0 * M * (1.0 + 1e-6);
  }

  const Foliation& foliation() const { return fol_; }
  const InitialData& data() const { return data_; }

  // Flux of every norm through Sigma_tau, optionally truncated radially.
  NormVec leaf_flux(double tau, double r_min = 0.0, double r_max = 0.0) const {
    NormVec total{};
    // spacelike piece, clipped to the reachable radial window
    {
      const double lo = std::max({r_floor_, r_min > 0.0 ? r_min : 0.0,
                                  data_.box.r_lo - tau});
      const double hi = std::min({fol_.R0, r_max > 0.0 ? r_max : fol_.R0,
                                  data_.box.r_hi + tau});
      if (hi > lo) {
        auto jobs = radial_jobs(lo, hi, grid_.panels_r_space, false, tau);
        total = total + run_jobs(jobs);
      }
    }
    // cone piece, geometric batches with tail cutoff
    if (r_max <= 0.0 || r_max > fol_.R0) {
      double lo = fol_.R0;
      double width = std::max(2.0 * M_, fol_.R0);
      double norm_scale = 0.0;
      for (int batch = 0; batch < grid_.max_cone_batches; ++batch) {
        double hi = lo + width;
        if (r_max > 0.0) hi = std::min(hi, r_max);
        if (hi <= lo) break;
        auto jobs = radial_jobs(lo, hi, grid_.panels_r_cone, true, tau);
        const NormVec part = run_jobs(jobs);
        total = total + part;
        norm_scale = std::max(norm_scale, total[11]);
        if (r_max > 0.0 && hi >= r_max) break;
        if (batch > 0 && std::abs(part[11]) + std::abs(part[0]) <
                             grid_.cone_tail_rel * (norm_scale + total[0] + 1e-300))
          break;
        lo = hi;
        width *= grid_.cone_growth;
      }
    }
    return total;
  }

  // Net outward particle-current flux of weight w through {r = rc} between
  // the leaves tau1 < tau2; w_kind: 0 -> 1, 1 -> E, 2 -> |p_phi|.
  double cylinder_flux(double rc, double tau1, double tau2, int w_kind) const {
    const double ts1 = leaf_tstar(tau1, rc), ts2 = leaf_tstar(tau2, rc);
    std::vector<double> contrib;
    std::vector<std::array<double, 4>> nodes;  // ts, pr, ell, quadw
    for (int pt_ = 0; pt_ < grid_.panels_tstar; ++pt_) {
      const double h = (ts2 - ts1) / grid_.panels_tstar;
      const double c = ts1 + (pt_ + 0.5) * h;
      for (std::size_t it = 0; it < rule_.x.size(); ++it) {
        const double ts = c + 0.5 * h * rule_.x[it];
        const double wt = 0.5 * h * rule_.w[it];
        fiber_nodes(rc, [&](double pr, double ell, double wf) {
          nodes.push_back({ts, pr, ell, wt * wf});
        });
      }
    }
    contrib.assign(nodes.size(), 0.0);
    parallel_for(nodes.size(), [&](std::size_t i) {
      const auto [ts, pr, ell, qw] = nodes[i];
      const NodeEval ev = tracer_.evaluate(rc, pr, ell, ts);
      if (ev.outside || ev.f == 0.0) return;
      Shell<double> s{0.0, rc, M_PI / 2.0, 0.0, pr, ell, 0.0};
      const double pt = pt_closure(s, M_);
      double w = 1.0;
      if (w_kind == 1) w = -pt;
      if (w_kind == 2) w = 0.5 * ell;
      contrib[i] = 8.0 * M_PI * M_PI * qw * ell * (pr / (-pt)) * w * ev.f;
    }, threads_);
    return std::accumulate(contrib.begin(), contrib.end(), 0.0);
  }

  struct BalanceReport {
    double initial = 0.0, final_ = 0.0, out_outer = 0.0, out_inner = 0.0;
    double defect_abs = 0.0, defect_rel = 0.0;
  };

  // Divergence-theorem balance of N[w f] on the truncated slab between
  // Sigma_0 and Sigma_tau.
  BalanceReport balance(double tau, double r_in, double r_out, int w_kind) const {
    BalanceReport rep;
    const int widx = w_kind == 0 ? 11 : (w_kind == 1 ? 12 : 13);
    rep.initial = leaf_flux(0.0, r_in, r_out)[widx];
    rep.final_ = leaf_flux(tau, r_in, r_out)[widx];
    rep.out_outer = cylinder_flux(r_out, 0.0, tau, w_kind);
    rep.out_inner = -cylinder_flux(r_in, 0.0, tau, w_kind);
    rep.defect_abs = rep.final_ - rep.initial + rep.out_outer + rep.out_inner;
    rep.defect_rel = std::abs(rep.defect_abs) / rep.initial;
    return rep;
  }

  // r^2 T_NN at the Sigma_tau point of radius r (fiber integral only).
  double r2_tnn(double tau, double r) const {
    const double ts = leaf_tstar(tau, r);
    std::vector<std::array<double, 3>> nodes;
    fiber_nodes(r, [&](double pr, double ell, double wf) { nodes.push_back({pr, ell, wf}); });
    std::vector<double> contrib(nodes.size(), 0.0);
    parallel_for(nodes.size(), [&](std::size_t i) {
      const auto [pr, ell, wf] = nodes[i];
      const NodeEval ev = tracer_.evaluate(r, pr, ell, ts);
      if (ev.outside || ev.f == 0.0) return;
      Shell<double> s{0.0, r, M_PI / 2.0, 0.0, pr, ell, 0.0};
      const double pt = pt_closure(s, M_);
      const double pN = pN_value(s, pt, M_);
      contrib[i] = 2.0 * M_PI * wf * ell / (r * r * (-pt)) * ev.f * pN * pN;
    }, threads_);
    return r * r * std::accumulate(contrib.begin(), contrib.end(), 0.0);
  }

  double leaf_tstar(double tau, double r) const {
    if (r <= fol_.R0) return tau;
    return tau + fol_.u0 + rstar_of_r(r, M_) + 2.0 * M_ * std::log(r - 2.0 * M_);
  }

 private:
  std::vector<LeafJob> radial_jobs(double lo, double hi, int panels, bool cone,
                                   double tau) const {
    std::vector<LeafJob> jobs;
    // geometric spacing on the cone piece, linear on the spacelike piece
    for (int p = 0; p < panels; ++p) {
      double a, b;
      if (cone) {
        const double q0 = std::log(lo), q1 = std::log(hi);
        a = std::exp(q0 + (q1 - q0) * p / panels);
        b = std::exp(q0 + (q1 - q0) * (p + 1.0) / panels);
      } else {
        a = lo + (hi - lo) * p / panels;
        b = lo + (hi - lo) * (p + 1.0) / panels;
      }
      for (std::size_t i = 0; i < rule_.x.size(); ++i) {
        LeafJob j;
        j.r = 0.5 * (a + b) + 0.5 * (b - a) * rule_.x[i];
        j.w_r = 0.5 * (b - a) * rule_.w[i];
        j.cone = cone;
        j.ts = leaf_tstar(tau, j.r);
        // measure densities of the two pieces
        if (cone)
          j.w_r *= 2.0 / omega_sq(j.r, M_);
        else
          j.w_r *= std::sqrt(1.0 + 2.0 * M_ / j.r);
        jobs.push_back(j);
      }
    }
    return jobs;
  }

  // Enumerates fiber nodes (pr, ell) restricted to the conserved-energy
  // window of the data; emit(pr, ell, weight) with weight = ell-panel weight
  // times pr-panel weight (the ell factor of the measure is applied by the
  // caller).
  template <class Emit>
  void fiber_nodes(double r, const Emit& emit) const {
    const double V0 = omega_sq(r, M_) / (r * r);
    const double lmin = data_.box.ell_lo, lmax = data_.box.ell_hi;
    for (int lp = 0; lp < grid_.panels_ell; ++lp) {
      const double la = lmin + (lmax - lmin) * lp / grid_.panels_ell;
      const double lb = lmin + (lmax - lmin) * (lp + 1.0) / grid_.panels_ell;
      for (std::size_t li = 0; li < rule_.x.size(); ++li) {
        const double ell = 0.5 * (la + lb) + 0.5 * (lb - la) * rule_.x[li];
        const double wl = 0.5 * (lb - la) * rule_.w[li];
        const double V = V0 * ell * ell;
        const double q2max = data_.E_max * data_.E_max - V;
        if (q2max <= 0.0) continue;
        const double qhi = std::sqrt(q2max);
        const double qlo =
            std::sqrt(std::max(0.0, data_.E_min * data_.E_min - V));
        for (int sgn = -1; sgn <= 1; sgn += 2) {
          for (int pp = 0; pp < grid_.panels_pr; ++pp) {
            const double qa = qlo + (qhi - qlo) * pp / grid_.panels_pr;
            const double qb = qlo + (qhi - qlo) * (pp + 1.0) / grid_.panels_pr;
            for (std::size_t qi = 0; qi < rule_.x.size(); ++qi) {
              const double q = 0.5 * (qa + qb) + 0.5 * (qb - qa) * rule_.x[qi];
              const double wq = 0.5 * (qb - qa) * rule_.w[qi];
              emit(sgn * q, ell, wl * wq);
            }
          }
        }
      }
    }
  }

  NormVec run_jobs(const std::vector<LeafJob>& rjobs) const {
    struct Node {
      double r, ts, pr, ell, qw;
      bool cone;
    };
    std::vector<Node> nodes;
    for (const auto& j : rjobs) {
      const double dist = j.r < data_.box.r_lo ? data_.box.r_lo - j.r
                          : (j.r > data_.box.r_hi ? j.r - data_.box.r_hi : 0.0);
      if (dist > j.ts) continue;  // radially unreachable from the support
      fiber_nodes(j.r, [&](double pr, double ell, double wf) {
        nodes.push_back({j.r, j.ts, pr, ell, j.w_r * wf, j.cone});
      });
    }
    std::vector<NormVec> contrib(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t i) {
      contrib[i] = NormVec{};
      const Node& n = nodes[i];
      const NodeEval ev = tracer_.evaluate(n.r, n.pr, n.ell, n.ts);
      if (ev.outside) return;
      if (ev.f == 0.0 && ev.dtf == 0.0 && ev.vpf == 0.0 && ev.dprf == 0.0) return;
      contrib[i] = node_norms(n.r, n.pr, n.ell, ev, 8.0 * M_PI * M_PI * n.qw);
    }, threads_);
    NormVec total{};
    for (const auto& c : contrib) total = total + c;
    return total;
  }

  NormVec node_norms(double r, double pr, double ell, const NodeEval& ev, double qw) const {
    Shell<double> s{0.0, r, M_PI / 2.0, 0.0, pr, ell, 0.0};
    const double pt = pt_closure(s, M_);
    const double E = -pt;
    const double pv = pv_value(s, pt, M_);
    const double puov2 = pu_over_omega_sq(s, pt, M_);
    const double pn = std::abs(leaf_normal_weight(r, pv, puov2, fol_));
    const double base = qw * ell / E * pn;
    const double pN = std::abs(pN_value(s, pt, M_));
    const double bphi = std::abs(bold_phi_minus(s, pt, M_));
    const double w34 = std::pow(pN, 0.75) * std::pow(bphi / r, 0.25);

    const double c0 = pN * std::abs(ev.f);
    const double c1 = bphi * std::abs(ev.dtf);
    const double c2 = 0.0;  // X_|p| f vanishes on spherically symmetric data
    const double c3 = pN * std::abs(ev.vmodf);
    const double c4 = w34 * std::abs(ev.vpf);
    const double c5 = std::abs(ev.dprf);

    const double pv_pt = pv / pt;  // in [0,1]
    const double br1 = 1.0 + r * pv_pt;
    const double br2 = 1.0 + r * r * pv_pt;
    const double wexp = std::exp(exp_b_ * r * pv_pt);

    // ILED-composed constituents of (omega f)
    const double w = iled_weight(r), dw = iled_weight_slope(r);
    const double c0i = pN * std::abs(w * ev.f);
    const double c1i = bphi * std::abs(w * ev.dtf);
    const double c3i = pN * std::abs(w * ev.vmodf + r * dw * ev.f);
    const double c4i = w34 * std::abs(w * ev.vpf + r * dw * ev.f);
    const double c5i = std::abs(w * ev.dprf);

    NormVec v{};
    v[0] = base * c0;
    v[1] = base * c1;
    v[2] = base * c2;
    v[3] = base * c3;
    v[4] = base * c4;
    v[5] = base * c5;
    const double cal = c0 + c1 + c2 + c3 + c4 + c5;
    v[6] = base * cal;
    v[7] = base * cal * br1;
    v[8] = base * cal * br2;
    v[9] = base * cal * wexp;
    v[10] = base * (c0i + c1i + c3i + c4i + c5i);
    v[11] = base * std::abs(ev.f);
    v[12] = base * E * std::abs(ev.f);
    v[13] = base * 0.5 * ell * std::abs(ev.f);
    v[14] = base * (pN / r) * bphi * std::abs(ev.f);
    return v;
  }

  double M_;
  Foliation fol_;
  InitialData data_;
  GridSpec grid_;
  TraceOptions topt_;
  bool derivatives_;
  unsigned threads_;
  double exp_b_;
  PanelRule rule_;
  ReducedTracer tracer_;
  double r_floor_;
};

// ---------------------------------------------------------------------------
// Decay fits on a flux series.
enum class DecayModel { Power, Exponential };

struct DecayFit {
  double rate = 0.0;
  double residual = 0.0;  // rms residual of the linear fit in log space
  std::size_t points = 0;
};

inline DecayFit decay_fit(const std::vector<double>& tau, const std::vector<double>& val,
                          DecayModel model, double window_lo, double window_hi) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (tau[i] < window_lo || tau[i] > window_hi) continue;
    if (!(val[i] > 0.0))
      throw std::domain_error("decay_fit: non-positive flux value inside the fit window");
    x.push_back(model == DecayModel::Power ? std::log(tau[i]) : tau[i]);
    y.push_back(std::log(val[i]));
  }
  if (x.size() < 8) throw std::domain_error("decay_fit: needs at least 8 samples in the window");
  const LinearFit f = fit_line(x, y);
  return {-f.slope, f.residual_rms, x.size()};
}

// Variant that censors values below the quadrature detection floor (exact
// zeros from a fully drained leaf); the kept samples still must fill the
// window with at least 8 points.
inline DecayFit decay_fit_censored(std::vector<double> tau, std::vector<double> val,
                                   DecayModel model, double window_lo, double window_hi,
                                   std::size_t* censored = nullptr) {
  std::vector<double> t2, v2;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (tau[i] >= window_lo && tau[i] <= window_hi && !(val[i] > 0.0)) {
      ++dropped;
      continue;
    }
    t2.push_back(tau[i]);
    v2.push_back(val[i]);
  }
  if (censored) *censored = dropped;
  return decay_fit(t2, v2, model, window_lo, window_hi);
}

// ---------------------------------------------------------------------------
// Full (7D) field evaluation by backward characteristics; quasi-Monte-Carlo
// smoke-test path and the tau=0 oracle comparison both use it.
inline double evaluate_f_full(const PhasePoint& pp, const InitialData& data,
                              const TraceOptions& topt = {}) {
  const double ts = pp.tstar();
  if (ts < 0.0) throw std::domain_error("evaluate_f_full: point precedes the data surface");
  const ConservedSet c = conserved(pp);
  if (c.E < data.E_min - 1e-14 || c.E > data.E_max + 1e-14 || c.l > data.box.ell_hi + 1e-14)
    return 0.0;
  detail::FullSystem sys{pp.M, false, false};
  std::vector<double> y = {pp.t, pp.r, pp.theta, pp.phi, pp.p_rstar, pp.p_theta, pp.p_phi};
  const double ri = std::min(data.box.r_lo, 3.0 * pp.M) * (1.0 - 1e-12);
  const double ro = std::max(data.box.r_hi, 3.0 * pp.M) * (1.0 + 1e-12);
  std::vector<OdeEvent> events;
  events.push_back(
      {[ro](double, const double* yy) { return yy[4] < 0.0 ? (ro - yy[1]) : 1.0; }, true});
  events.push_back(
      {[ri](double, const double* yy) { return yy[4] > 0.0 ? (yy[1] - ri) : 1.0; }, true});
  const double M = pp.M;
  events.push_back(
      {[M](double, const double* yy) { return yy[1] - 2.0 * M * (1.0 + 1e-9); }, true});
  Dopri5 ode(7, topt.ode);
  Dopri5::Rhs rhs = [&sys](double sg, const double* yy, double* dyy) { sys(sg, yy, dyy); };
  const OdeStatus st = ode.integrate(rhs, ts, 0.0, y, &events);
  if (st == OdeStatus::EventStop) return 0.0;
  if (st != OdeStatus::Reached) throw std::runtime_error("evaluate_f_full: trace failed");
  Shell<double> s{y[0], y[1], y[2], y[3], y[4], y[5], y[6]};
  return data(y[1], y[4], ang_mom(s));
}

// Quasi-Monte-Carlo estimate of E[p_N f](0) over the full 3D fiber,
// independent of the reduced quadrature path; returns mean and standard
// error over digital shifts of the Sobol set.
struct McEstimate {
  double value = 0.0, std_error = 0.0;
};

inline McEstimate mc_energy_tau0(const InitialData& data, double M, double R0, int log2_n,
                                 int n_shifts, std::uint64_t seed) {
  const Foliation fol(M, R0);
  const SupportBox& b = data.box;
  const double P = b.ell_hi;
  // spacelike piece of Sigma_0 only: both sides of the oracle comparison
  // integrate over r <= R0
  const double lo[5] = {b.r_lo, 0.0, b.pr_lo, -P, -P};
  const double hi[5] = {std::min(b.r_hi, R0), M_PI, b.pr_hi, P, P};
  double volume = 1.0;
  for (int d = 0; d < 5; ++d) volume *= hi[d] - lo[d];
  const std::size_t n = std::size_t(1) << log2_n;
  std::vector<double> means(n_shifts, 0.0);
  for (int sh = 0; sh < n_shifts; ++sh) {
    Sobol sob(5, std::uint32_t(splitmix64(seed + sh) >> 32) | 1u);
    double acc = 0.0;
    double u[5];
    for (std::size_t i = 0; i < n; ++i) {
      sob.next(u);
      double x[5];
      for (int d = 0; d < 5; ++d) x[d] = lo[d] + (hi[d] - lo[d]) * u[d];
      const double st = std::sin(x[1]);
      if (st <= 1e-12) continue;
      Shell<double> s{0.0, x[0], x[1], 0.0, x[2], x[3], x[4]};
      const double ell = ang_mom(s);
      const double f = data(x[0], x[2], ell);
      if (f == 0.0) continue;
      const double pt = pt_closure(s, M);
      const double pn =
          std::abs(leaf_normal_weight(x[0], pv_value(s, pt, M), pu_over_omega_sq(s, pt, M), fol));
      const double pN = std::abs(pN_value(s, pt, M));
      acc += 2.0 * M_PI * std::sqrt(1.0 + 2.0 * M / x[0]) * pn * pN * f / (-pt);
    }
    means[sh] = volume * acc / double(n);
  }
  McEstimate out;
  for (double m : means) out.value += m;
  out.value /= n_shifts;
  double ss = 0.0;
  for (double m : means) ss += (m - out.value) * (m - out.value);
  out.std_error = std::sqrt(ss / (n_shifts - 1.0) / n_shifts);
  return out;
}

}  // namespace svlab
