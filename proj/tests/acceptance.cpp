// Acceptance suite: runs every agreed exit criterion at its pinned tolerance
// and prints one pass/fail line per criterion. Exit code 0 iff all pass.
#include <cstdio>
#include <vector>

#include "svlab/io.hpp"
#include "svlab/vlasov.hpp"

using namespace svlab;

namespace {

int g_failures = 0;

void report(int idx, const char* what, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %-34s %s\n", pass ? "PASS" : "FAIL", idx, what,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

PhasePoint sample_admissible(std::uint64_t seed, std::uint64_t i, double r_lo = 2.05,
                             double r_hi = 50.0) {
  auto rng = rng_stream(seed, i);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = r_lo * std::pow(r_hi / r_lo, u(rng));
  return sample_point(r, 0.5 * std::pow(4.0, u(rng)), 2.0 * u(rng) - 1.0,
                      2.0 * M_PI * u(rng), 0.15 + (M_PI - 0.3) * u(rng),
                      2.0 * M_PI * u(rng));
}

// --------------------------------------------------------------------------
void criterion1_identities() {
  WallTimer timer;
  const std::size_t n = 100000;
  const double tol = 1e-10;
  const WeightParams wp;
  double worst_overall = 0.0;
  std::string worst_name = "none";
  auto track = [&](const char* name, double v) {
    if (v > worst_overall) {
      worst_overall = v;
      worst_name = name;
    }
  };

  // pointwise weight identities
  {
    std::vector<double> w(n, 0.0), wp_res(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
      const PhasePoint p = sample_admissible(101, i);
      double m = shell_residual(p);
      const double prod = phi_plus(p.shell(), p.p_t, 1.0) * phi_minus(p.shell(), p.p_t, 1.0);
      const double rhs = 27.0 * p.p_t * p.p_t - ang_mom_sq(p.shell());
      m = std::max(m, std::abs(prod - rhs) / (1.0 + std::abs(prod) + std::abs(rhs)));
      for (WeightId id : {WeightId::PhiMinus, WeightId::BoldPhiMinus, WeightId::OmegaPhiPlus,
                          WeightId::RedshiftPu}) {
        const double a = lie_derivative_dual(id, p, wp);
        const double b = *lie_derivative_closed_form(id, p, wp);
        m = std::max(m, std::abs(a - b) / (1.0 + std::abs(a) + std::abs(b)));
      }
      for (double q : {0.0, 1.0, 2.0}) {
        WeightParams w2 = wp;
        w2.rp_power = q;
        const double a = lie_derivative_dual(WeightId::RpPv, p, w2);
        const double b = *lie_derivative_closed_form(WeightId::RpPv, p, w2);
        m = std::max(m, std::abs(a - b) / (1.0 + std::abs(a) + std::abs(b)));
      }
      w[i] = m;
    });
    track("weights", *std::max_element(w.begin(), w.end()));
  }
  // commutator catalog
  for (IdentityId id : identity_catalog()) {
    std::vector<double> w(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
      const PhasePoint p = sample_admissible(211 + std::uint64_t(id), i);
      auto rng = rng_stream(223, i);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      w[i] = identity_residual(id, p, u(rng));
    });
    track(identity_name(id), *std::max_element(w.begin(), w.end()));
  }
  // massive flow identity
  {
    std::vector<double> w(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
      auto rng = rng_stream(227, i);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double m = 0.1 + 0.9 * u(rng);
      const double ell = 4.0 * m * (1.05 + 2.0 * u(rng));
      const MassiveRadii rad = massive_radii(m, ell, 1.0);
      const double r =
          rad.rho_minus + (std::min(rad.rho_plus, 60.0) - rad.rho_minus) * (0.02 + 0.96 * u(rng));
      if (!(r > 2.05)) return;
      Shell<double> s{0.0, r, M_PI / 2.0, 0.0, 2.0 * u(rng) - 1.0, ell, 0.0};
      const double pt = value(massive_pt_closure(s, m, 1.0));
      double worst = 0.0;
      for (int sign : {-1, 1}) {
        const double lhs = massive_phi_lie_dual(s, m, 1.0, sign);
        const double rhs =
            sign * massive_phi_rate(s, pt, m, 1.0) * value(massive_phi(s, pt, m, 1.0, sign));
        worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(lhs) + std::abs(rhs)));
      }
      w[i] = worst;
    });
    track("massive flow identity", *std::max_element(w.begin(), w.end()));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "max residual %.2e (%s), %.0f s", worst_overall,
                worst_name.c_str(), timer.seconds());
  report(1, "identity suite < 1e-10", worst_overall < tol, buf);
}

// --------------------------------------------------------------------------
void criterion2_lyapunov() {
  FlowOptions fo;
  const PhasePoint p = equatorial_point(3.0 * (1.0 + 1e-9), 0.0, std::sqrt(27.0));
  Trajectory tr = integrate_orbit(p, 130.0, fo);
  std::vector<double> ts, lg;
  for (const auto& s : tr.samples) {
    const double d = std::abs(s.pp.r - 3.0);
    if (d > 1e-8 && d < 1e-3) {
      ts.push_back(s.s);
      lg.push_back(std::log(d));
    }
  }
  const LinearFit f = fit_line(ts, lg);
  const double expected = 1.0 / (3.0 * std::sqrt(3.0));
  const double rel = std::abs(f.slope - expected) / expected;
  char buf[128];
  std::snprintf(buf, sizeof buf, "fitted %.6f vs 1/(3 sqrt3 M) = %.6f (%.2f%%)", f.slope,
                expected, 100.0 * rel);
  report(2, "photon-sphere departure rate", rel < 0.02, buf);
}

// --------------------------------------------------------------------------
void criterion3_conservation() {
  FlowOptions fo;
  fo.accumulators = true;
  fo.ode.rtol = 1e-13;
  fo.ode.atol = 1e-15;
  fo.tstar_max = 150.0;
  // the trapping invariant's evaluation conditioning degrades like
  // eps_horizon^{-1} x machine epsilon (Omega^2 against the state's absolute
  // error), so the conservation run stops at a milder guard
  fo.eps_horizon = 1e-4;
  const std::size_t n = 1000;
  std::vector<double> drift(n, 0.0), sdrift(n, 0.0);
  std::vector<int> classes(n, -1);
  parallel_for(n, [&](std::size_t i) {
    auto rng = rng_stream(307, i);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PhasePoint p;
    double span = 40.0;
    bool exactly_trapped = false;
    if (i % 20 == 0) {  // the trapped set itself
      p = sample_point(3.0, 1.0, 0.0, 2.0 * M_PI * u(rng), 0.4 + 2.3 * u(rng), 1.0);
      exactly_trapped = true;
      span = 30.0;
    } else if (i % 5 == 0) {
      // near-trapped: the invariants are exponentially ill-conditioned here,
      // so the span is kept to a few e-folding times
      p = sample_point(3.0 + 0.02 * (u(rng) - 0.5), 1.0, 1e-4 * (u(rng) - 0.5),
                       2.0 * M_PI * u(rng), 0.4 + 2.3 * u(rng), 1.0);
      span = 25.0;
    } else {
      p = sample_point(2.3 + 25.0 * u(rng), 0.5 + 1.5 * u(rng), 2.0 * u(rng) - 1.0,
                       2.0 * M_PI * u(rng), 0.4 + 2.3 * u(rng), 1.0);
    }
    Trajectory tr = integrate_orbit(p, span, fo);
    const ConservedSet d = conserved_drift(tr);
    drift[i] = std::max({d.E, d.lz, d.l});
    classes[i] = int(classify_orbit(p, fo).tag);
    double worst = 0.0;
    if (exactly_trapped) {
      // s = phi_- e^alpha = 0 on the trapped set: phi_- must stay tiny
      for (const auto& s : tr.samples)
        worst = std::max(worst,
                         std::abs(phi_minus(s.pp.shell(), s.pp.p_t, 1.0)) * 1e-4);
    } else {
      const auto& a = tr.samples.front();
      const double la0 = log_abs_s_invariant(a.pp, a.alpha);
      const double lb0 = log_abs_sbar_invariant(a.pp, a.alphabar);
      for (const auto& s : tr.samples) {
        worst = std::max(worst, std::abs(log_abs_s_invariant(s.pp, s.alpha) - la0) /
                                    (1.0 + std::abs(la0)));
        worst = std::max(worst, std::abs(log_abs_sbar_invariant(s.pp, s.alphabar) - lb0) /
                                    (1.0 + std::abs(lb0)));
      }
    }
    sdrift[i] = worst;
  });
  const double worst_drift = *std::max_element(drift.begin(), drift.end());
  const double worst_s = *std::max_element(sdrift.begin(), sdrift.end());
  int have[3] = {0, 0, 0};
  for (int c : classes)
    if (c >= 0) have[c]++;
  const bool all_classes = have[0] > 0 && have[1] > 0 && have[2] > 0;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "drift %.2e, s-invariants %.2e, classes (H+/esc/trap) %d/%d/%d", worst_drift,
                worst_s, have[0], have[1], have[2]);
  report(3, "conservation suite", worst_drift < 1e-10 && worst_s < 1e-8 && all_classes, buf);
}

// --------------------------------------------------------------------------
void criterion4_psi_bound() {
  const std::size_t n = 10000;
  const double span = 300.0;
  const int nbuckets = 10;
  std::vector<double> bucket_sup(nbuckets, 0.0);
  std::vector<double> per_orbit(n, 0.0), bound_viol(n, 0.0);
  std::vector<std::array<double, 10>> orbit_buckets(n);
  parallel_for(n, [&](std::size_t i) {
    auto rng = rng_stream(401, i);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = 2.2 + 25.0 * std::pow(u(rng), 2.0);
    const double E = 0.5 + 1.5 * u(rng);
    const double mu = 2.0 * u(rng) - 1.0;
    const double ell = r / omega(r, 1.0) * E * std::sqrt(std::max(0.0, 1.0 - mu * mu));
    // start on the data surface t* = 0
    double y[3] = {r, mu * E, 0.0};
    orbit_buckets[i].fill(0.0);
    OdeOptions oo{1e-10, 1e-12, 1e-3, 20.0, 100000};
    Dopri5 ode(3, oo);
    Dopri5::Rhs rhs = [ell](double, const double* yy, double* dyy) {
      detail_vlasov::reduced_rhs(yy, dyy, ell, 1.0);
      Shell<double> s{0.0, yy[0], M_PI / 2.0, 0.0, yy[1], ell, 0.0};
      const double pt = pt_closure(s, 1.0);
      const AccumRates rates = accumulator_rates(s, pt, 1.0, yy[2]);
      dyy[2] = rates.psi;
    };
    std::vector<OdeEvent> ev;
    ev.push_back({[](double, const double* yy) { return yy[0] - 2.0 * (1.0 + 1e-8); }, true});
    ev.push_back({[](double, const double* yy) { return 3000.0 - yy[0]; }, true});
    double viol = 0.0;
    Dopri5::Observer obs = [&](double s, const double* yy) {
      Shell<double> sh{0.0, yy[0], M_PI / 2.0, 0.0, yy[1], ell, 0.0};
      PhasePoint p{0.0, yy[0], M_PI / 2.0, 0.0, yy[1], ell, 0.0, pt_closure(sh, 1.0), 1.0};
      const double mon = psi_monitor(p, yy[2]);
      const int b = std::min(nbuckets - 1, int(s / span * nbuckets));
      orbit_buckets[i][b] = std::max(orbit_buckets[i][b], mon);
      // pointwise bounds of the damped transport
      const double bb = source_b(sh, p.p_t, 1.0);
      viol = std::max(viol, std::abs(bb) - psi_source_bound(p));
      viol = std::max(viol, psi_damping_lower_bound(p) - damping_abar(sh, p.p_t, 1.0));
    };
    std::vector<double> yy(y, y + 3);
    ode.integrate(rhs, 0.0, span, yy, &ev, false, obs);
    per_orbit[i] = *std::max_element(orbit_buckets[i].begin(), orbit_buckets[i].end());
    bound_viol[i] = viol;
  });
  for (std::size_t i = 0; i < n; ++i)
    for (int b = 0; b < nbuckets; ++b)
      bucket_sup[b] = std::max(bucket_sup[b], orbit_buckets[i][b]);
  const double ceiling = *std::max_element(per_orbit.begin(), per_orbit.end());
  const double worst_viol = *std::max_element(bound_viol.begin(), bound_viol.end());
  // growth trend: the monitor may approach its (finite) sup from below, so
  // the test is on the late-window slope: extrapolated over another 300M it
  // must stay within 10% of the ceiling
  std::vector<double> xb, yb;
  for (int b = nbuckets / 2; b < nbuckets; ++b) {
    xb.push_back((b + 0.5) * span / nbuckets);
    yb.push_back(bucket_sup[b]);
  }
  const LinearFit trend = fit_line(xb, yb);
  const double growth = trend.slope * span / ceiling;
  const bool ok = std::isfinite(ceiling) && growth <= 0.10 && worst_viol <= 1e-12;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "ceiling %.4f, late-window extrapolated growth %+.1f%%, bound viol %.1e",
                ceiling, 100.0 * growth, worst_viol);
  report(4, "Psi boundedness monitors", ok, buf);
}

// --------------------------------------------------------------------------
void criterion5_balance() {
  const double M = 1.0;
  InitialData data = InitialData::gaussian_shell(M);
  auto defect = [&](int scale, double rtol) {
    GridSpec g;
    g.panels_r_space = 8 * scale;
    g.panels_r_cone = 5 * scale;
    g.panels_pr = 2 * scale + 1;
    g.panels_ell = 2 * scale + 1;
    g.panels_tstar = 8 * scale;
    TraceOptions t;
    t.ode.rtol = rtol;
    t.ode.atol = rtol * 1e-2;
    FluxLab lab(M, 10.0, data, g, t, false, 0);
    double worst = 0.0;
    for (int w : {0, 1})  // number and energy currents
      worst = std::max(worst, lab.balance(12.0, 2.6, 16.0, w).defect_rel);
    return worst;
  };
  const double d_default = defect(2, 1e-9);
  const double d_half = defect(1, 1.6e-8);
  const double order = std::log2(d_half / d_default);
  char buf[128];
  std::snprintf(buf, sizeof buf, "defect %.2e (halved res: %.2e, order %.1f)", d_default,
                d_half, order);
  report(5, "flux balance (Proenergy-type)", d_default < 1e-4 && order >= 2.0, buf);
}

// --------------------------------------------------------------------------
struct SeriesResult {
  std::vector<double> taus;
  std::vector<NormVec> flux;
};

SeriesResult run_series(const InitialData& data, const std::vector<double>& taus,
                        const GridSpec& g, double rtol) {
  TraceOptions t;
  t.ode.rtol = rtol;
  t.ode.atol = rtol * 1e-2;
  FluxLab lab(1.0, 10.0, data, g, t, true, 0);
  SeriesResult out;
  out.taus = taus;
  for (double tau : taus) out.flux.push_back(lab.leaf_flux(tau));
  return out;
}

void criteria_678(const SeriesResult& s) {
  // criterion 6: boundedness of the calE constituents + ILED plateau.
  // Ceilings derived from the tau=0 fluxes: the energy flux E[p_N f] is
  // bounded by its own initial value (the multiplier estimate is monotone);
  // each first-order constituent is controlled by the full first-order norm
  // calF(0) = calE(0) - E[p_N f](0) (the commuted system is coupled, so a
  // single constituent may transiently exceed its own initial value).
  {
    const double calF0 = s.flux[0][6] - s.flux[0][0];
    bool bounded = true;
    double worst_ratio = 0.0;
    for (std::size_t i = 0; i < s.taus.size(); ++i) {
      if (s.taus[i] > 200.0) continue;
      double ratio = s.flux[i][0] / s.flux[0][0];
      for (int k : {1, 3, 4, 5}) ratio = std::max(ratio, s.flux[i][k] / calF0);
      ratio = std::max(ratio, s.flux[i][6] / s.flux[0][6]);
      worst_ratio = std::max(worst_ratio, ratio);
      if (ratio > 1.05) bounded = false;
    }
    // ILED accumulator R(T) plateau between T = 100 and T = 200
    double R100 = 0.0, R200 = 0.0, acc = 0.0;
    for (std::size_t i = 1; i < s.taus.size(); ++i) {
      acc += 0.5 * (s.flux[i][10] + s.flux[i - 1][10]) * (s.taus[i] - s.taus[i - 1]);
      if (s.taus[i] <= 100.0) R100 = acc;
      if (s.taus[i] <= 200.0) R200 = acc;
    }
    R100 /= s.flux[0][6];
    R200 /= s.flux[0][6];
    const bool plateau = (R200 - R100) < 0.05 * R100;
    // full 7D Monte Carlo smoke test, standard error reported, no threshold
    InitialData data = InitialData::gaussian_shell(1.0);
    double mc = 0.0, se = 0.0;
    {
      const double tau = 4.0;
      const Foliation fol(1.0, 10.0);
      const SupportBox& b = data.box;
      const double lo[5] = {std::max(2.2, b.r_lo - tau), 0.3, -1.0, -b.ell_hi, -b.ell_hi};
      const double hi[5] = {std::min(10.0, b.r_hi + tau), M_PI - 0.3, 1.0, b.ell_hi,
                            b.ell_hi};
      double vol = 1.0;
      for (int d = 0; d < 5; ++d) vol *= hi[d] - lo[d];
      const std::size_t nmc = 1 << 9;
      std::vector<double> means;
      for (int shift = 0; shift < 4; ++shift) {
        Sobol sob(5, std::uint32_t(splitmix64(777 + shift) >> 32) | 1u);
        std::vector<std::array<double, 5>> pts(nmc);
        for (auto& pt5 : pts) sob.next(pt5.data());
        std::vector<double> acc_i(nmc, 0.0);
        parallel_for(nmc, [&](std::size_t i) {
          double x[5];
          for (int d = 0; d < 5; ++d) x[d] = lo[d] + (hi[d] - lo[d]) * pts[i][d];
          Shell<double> sh{0.0, x[0], x[1], 0.0, x[2], x[3], x[4]};
          const double pt = pt_closure(sh, 1.0);
          PhasePoint p{fol.leaf_t(tau, x[0]), x[0], x[1], 0.0, x[2], x[3], x[4], pt, 1.0};
          const double f = evaluate_f_full(p, data, TraceOptions{});
          if (f == 0.0) return;
          const double pn = std::abs(leaf_normal_weight(
              x[0], pv_value(sh, pt, 1.0), pu_over_omega_sq(sh, pt, 1.0), fol));
          acc_i[i] = 2.0 * M_PI * std::sqrt(1.0 + 2.0 / x[0]) * pn *
                     std::abs(pN_value(sh, pt, 1.0)) * f / (-pt);
        });
        double m = 0.0;
        for (double a : acc_i) m += a;
        means.push_back(vol * m / double(nmc));
      }
      for (double m : means) mc += m;
      mc /= means.size();
      for (double m : means) se += (m - mc) * (m - mc);
      se = std::sqrt(se / (means.size() - 1.0) / means.size());
    }
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "sup ratio %.3f, R(100)=%.3f R(200)=%.3f; 7D MC smoke E_pN(4)=%.3g+-%.2g",
                  worst_ratio, R100, R200, mc, se);
    report(6, "boundedness + ILED plateau", bounded && plateau, buf);
  }
  // criterion 7 (power part): fitted rate of calE over [20, 200]. Leaves on
  // which the flux has drained below the quadrature floor report exact zeros
  // and are censored from the log fit.
  {
    std::vector<double> vals;
    for (const auto& v : s.flux) vals.push_back(v[6]);
    std::size_t censored = 0;
    const DecayFit f =
        decay_fit_censored(s.taus, vals, DecayModel::Power, 20.0, 200.0, &censored);
    char buf[128];
    std::snprintf(buf, sizeof buf, "calE power rate %.2f (floors 0.7 / 1.7; %zu censored)",
                  f.rate, censored);
    report(7, "power decay floors p=1,2", f.rate >= 1.7, buf);
  }
}

void criterion7_exponential() {
  InitialData data = InitialData::exponential_tail(1.0, 6.0, 7.0, 0.8, 3.0);
  GridSpec g;
  g.panels_r_space = 8;
  g.panels_r_cone = 5;
  g.panels_pr = 2;
  g.panels_ell = 2;
  g.max_cone_batches = 7;
  // fit window past the transient: the core drains first, after which the
  // arriving tail sets a clean exponential rate ~ 1/L
  std::vector<double> taus;
  for (double t = 45.0; t <= 120.5; t *= std::pow(2.0, 0.2)) taus.push_back(t);
  const SeriesResult s = run_series(data, taus, g, 1e-9);
  std::vector<double> vals;
  for (const auto& v : s.flux) vals.push_back(v[6]);
  const DecayFit f = decay_fit(s.taus, vals, DecayModel::Exponential, 45.0, 120.5);
  char buf[128];
  std::snprintf(buf, sizeof buf, "b0 = %.4f / M, semilog rms residual %.3f", f.rate,
                f.residual);
  report(7, "exponential decay (tail data)", f.rate > 0.0 && f.residual < 0.05, buf);
}

void criterion8_pointwise(const SeriesResult& s) {
  InitialData data = InitialData::gaussian_shell(1.0);
  GridSpec g;
  g.panels_pr = 3;
  g.panels_ell = 3;
  TraceOptions t;
  t.ode.rtol = 1e-9;
  t.ode.atol = 1e-11;
  FluxLab lab(1.0, 10.0, data, g, t, false, 0);
  std::vector<double> taus, sups;
  for (double tau : {20.0, 22.0, 24.0, 26.0, 28.0, 31.0, 34.0, 37.0, 40.0, 44.0, 48.0,
                     52.0, 56.0, 62.0, 67.0, 73.0, 80.0}) {
    double sup = 0.0;
    for (int i = 0; i < 14; ++i) {
      const double r = 2.3 * std::pow(60.0 / 2.3, (i + 0.5) / 14.0);
      sup = std::max(sup, lab.r2_tnn(tau, r));
    }
    taus.push_back(tau);
    sups.push_back(sup);
  }
  std::size_t censored = 0;
  const DecayFit ft =
      decay_fit_censored(taus, sups, DecayModel::Exponential, 20.0, 80.0, &censored);
  std::vector<double> evals;
  std::vector<double> etaus;
  for (std::size_t i = 0; i < s.taus.size(); ++i) {
    if (s.taus[i] >= 20.0 && s.taus[i] <= 80.0) {
      etaus.push_back(s.taus[i]);
      evals.push_back(s.flux[i][6]);
    }
  }
  const DecayFit fe = decay_fit_censored(etaus, evals, DecayModel::Exponential, 20.0, 80.0);
  const double rel = std::abs(ft.rate - fe.rate) / fe.rate;
  char buf[128];
  std::snprintf(buf, sizeof buf, "r^2 T_NN rate %.4f vs calE rate %.4f (%.0f%%)", ft.rate,
                fe.rate, 100.0 * rel);
  report(8, "pointwise decay tracks the flux", rel < 0.2, buf);
}

// --------------------------------------------------------------------------
void criterion9_oracle() {
  struct Preset {
    const char* name;
    InitialData data;
  };
  SupportBox ebox{5.0, 9.0, -0.9, 0.9, 0.0, 3.0};
  std::vector<Preset> presets;
  presets.push_back({"gaussian-shell", InitialData::gaussian_shell(1.0)});
  presets.push_back({"gaussian-narrow", InitialData::gaussian_shell(1.0, 6.0, 1.0, 0.2, 0.5, 2.0)});
  presets.push_back({"trapped-bump", InitialData::trapped_bump(1.0)});
  presets.push_back({"exp-tail", InitialData::exponential_tail(1.0, 6.0, 0.8, 0.6, 2.0)});
  presets.push_back(
      {"expression", InitialData::from_expression(
                         "bump((r-7)/1.8)*bump(pr/0.8)*bump(l/2.5)*(1+pr^2)", ebox)});
  bool ok = true;
  std::string detail;
  for (auto& p : presets) {
    GridSpec g;
    g.panels_pr = 4;
    g.panels_ell = 4;
    g.panels_r_space = 12;
    FluxLab lab(1.0, 10.0, p.data, g, TraceOptions{}, false, 0);
    const double quad = lab.leaf_flux(0.0, 0.0, 10.0)[0];
    const McEstimate mc = mc_energy_tau0(p.data, 1.0, 10.0, 14, 8, 90210);
    const double sigmas = std::abs(mc.value - quad) / mc.std_error;
    if (sigmas > 3.0) ok = false;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s %.1fse ", p.name, sigmas);
    detail += buf;
  }
  report(9, "reduced quadrature vs fiber MC", ok, detail);
}

}  // namespace

int main() {
  WallTimer total;
  std::printf("svlab acceptance suite\n");
  criterion1_identities();
  criterion2_lyapunov();
  criterion3_conservation();
  criterion4_psi_bound();
  criterion5_balance();

  // shared flux series for criteria 6-8
  {
    InitialData data = InitialData::gaussian_shell(1.0);
    GridSpec g;
    const std::vector<double> taus = {0.0,  1.0,  2.0,  4.0,  8.0,  14.0, 20.0,
                                      24.0, 28.0, 34.0, 40.0, 48.0, 56.0, 67.0,
                                      80.0, 96.0, 113.0, 160.0, 200.0};
    const SeriesResult s = run_series(data, taus, g, 1e-9);
    criteria_678(s);
    criterion7_exponential();
    criterion8_pointwise(s);
  }
  criterion9_oracle();
  std::printf("%s (%d failure%s, %.0f s total)\n", g_failures == 0 ? "ALL PASS" : "FAILURES",
              g_failures, g_failures == 1 ? "" : "s", total.seconds());
  return g_failures > 0 ? 1 : 0;
}
