#include <catch2/catch_amalgamated.hpp>

#include "svlab/io.hpp"
#include "svlab/util.hpp"
#include "svlab/vlasov.hpp"

using namespace svlab;

TEST_CASE("initial data presets") {
  const double M = 1.0;
  SECTION("densities are nonnegative and compactly supported") {
    for (const InitialData& d :
         {InitialData::gaussian_shell(M), InitialData::trapped_bump(M),
          InitialData::exponential_tail(M)}) {
      auto rng = rng_stream(131, 0);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int i = 0; i < 20000; ++i) {
        const double r = 2.1 + 700.0 * u(rng);
        const double pr = 3.0 * (u(rng) - 0.5);
        const double ell = 8.0 * u(rng);
        const double f = d(r, pr, ell);
        CHECK(f >= 0.0);
        if (r < d.box.r_lo || r > d.box.r_hi || ell > d.box.ell_hi) CHECK(f == 0.0);
      }
    }
  }
  SECTION("gradient oracle matches finite differences") {
    const InitialData d = InitialData::gaussian_shell(M);
    auto rng = rng_stream(137, 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 400; ++i) {
      const double r = 5.6 + 2.8 * u(rng);
      const double pr = -0.75 + 1.5 * u(rng);
      const double ell = 3.4 * u(rng);
      const auto g = d.gradient(r, pr, ell);
      const double h = 1e-6;
      const double fd_r = (d(r + h, pr, ell) - d(r - h, pr, ell)) / (2 * h);
      const double fd_p = (d(r, pr + h, ell) - d(r, pr - h, ell)) / (2 * h);
      const double fd_l = (d(r, pr, ell + h) - d(r, pr, ell - h)) / (2 * h);
      const double scale = 1.0 + std::abs(g[0]) + std::abs(g[1]) + std::abs(g[2]);
      CHECK(std::abs(g[0] - fd_r) / scale < 1e-6);
      CHECK(std::abs(g[1] - fd_p) / scale < 1e-6);
      CHECK(std::abs(g[2] - fd_l) / scale < 1e-6);
    }
  }
  SECTION("conserved-energy window brackets the support") {
    const InitialData d = InitialData::gaussian_shell(M);
    auto rng = rng_stream(139, 2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20000; ++i) {
      const double r = d.box.r_lo + (d.box.r_hi - d.box.r_lo) * u(rng);
      const double pr = d.box.pr_lo + (d.box.pr_hi - d.box.pr_lo) * u(rng);
      const double ell = d.box.ell_lo + (d.box.ell_hi - d.box.ell_lo) * u(rng);
      if (d(r, pr, ell) == 0.0) continue;
      const double E = std::sqrt(pr * pr + omega_sq(r, M) * ell * ell / (r * r));
      CHECK(E >= d.E_min - 1e-12);
      CHECK(E <= d.E_max + 1e-12);
    }
  }
}

TEST_CASE("expression grammar") {
  SECTION("arithmetic and functions") {
    Expression e("2*r + pr^2 - l/4 + exp(-r)*0");
    CHECK(e.eval<double>(3.0, 2.0, 8.0) == Catch::Approx(8.0).epsilon(1e-14));
    Expression b("bump((r-7)/1.5)");
    CHECK(b.eval<double>(7.0, 0, 0) == 1.0);
    CHECK(b.eval<double>(8.6, 0, 0) == 0.0);
    CHECK(b.eval<double>(8.0, 0, 0) > 0.0);
    Expression st("step(r-4)");
    CHECK(st.eval<double>(3.9, 0, 0) == 0.0);
    CHECK(st.eval<double>(5.1, 0, 0) == 1.0);
  }
  SECTION("dual evaluation differentiates") {
    Expression e("r^2*pr");
    const Dual v = e.eval<Dual>({3.0, 1.0}, {2.0, 0.0}, {0.0, 0.0});
    CHECK(v.d == Catch::Approx(12.0).epsilon(1e-14));
  }
  SECTION("parse errors are rejected") {
    CHECK_THROWS_AS(Expression("2*+"), std::invalid_argument);
    CHECK_THROWS_AS(Expression("foo(r)"), std::invalid_argument);
    CHECK_THROWS_AS(Expression("r + q"), std::invalid_argument);
    CHECK_THROWS_AS(Expression("(r"), std::invalid_argument);
    CHECK_THROWS_AS(Expression("r^pr"), std::invalid_argument);  // exponent must be a number
  }
  SECTION("data from an expression") {
    SupportBox box{5.0, 9.0, -1.0, 1.0, 0.0, 3.0};
    InitialData d = InitialData::from_expression("bump((r-7)/2)*bump(pr)*bump(l/3)", box);
    CHECK(d(7.0, 0.0, 0.0) == 1.0);
    CHECK(d(9.5, 0.0, 0.0) == 0.0);
  }
}

TEST_CASE("field evaluation by backward characteristics") {
  const double M = 1.0;
  const InitialData d = InitialData::gaussian_shell(M);
  TraceOptions topt;
  topt.ode.rtol = 1e-13;  // invariance harness runs at matched precision
  topt.ode.atol = 1e-15;
  SECTION("points on the data surface evaluate directly") {
    ReducedTracer tr(d, M, topt, false);
    const NodeEval ev = tr.evaluate(7.0, 0.2, 1.0, 0.0);
    CHECK(ev.f == d(7.0, 0.2, 1.0));
  }
  SECTION("transport invariance along forward orbits") {
    ReducedTracer tr(d, M, topt, false);
    auto rng = rng_stream(149, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FlowOptions fo;
    fo.ode.rtol = 1e-13;
    fo.ode.atol = 1e-15;
    int checked = 0;
    for (int i = 0; i < 40 && checked < 25; ++i) {
      const double r0 = 5.8 + 2.4 * u(rng);
      const double pr0 = -0.7 + 1.4 * u(rng);
      const double ell = 3.2 * u(rng);
      if (d(r0, pr0, ell) < 1e-4) continue;
      PhasePoint p = equatorial_point(r0, pr0, ell, M, -2.0 * M * std::log(r0 - 2.0 * M));
      const double span = 12.0 * u(rng);
      Trajectory orbit = integrate_orbit(p, span, fo);
      if (orbit.status != OdeStatus::Reached) continue;
      const PhasePoint q = orbit.back().pp;
      const NodeEval ev = tr.evaluate(q.r, q.p_rstar, ell, q.tstar());
      CHECK(std::abs(ev.f - d(r0, pr0, ell)) < 1e-8 * (1.0 + d(r0, pr0, ell)));
      ++checked;
    }
    REQUIRE(checked >= 20);
  }
  SECTION("pruning agrees with the full 7D tracer") {
    ReducedTracer tr(d, M, topt, false);
    auto rng = rng_stream(151, 4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
      const double r = 2.2 + 28.0 * u(rng);
      const double E = 0.3 + 0.8 * u(rng);
      const double mu = 2.0 * u(rng) - 1.0;
      const double ts = 20.0 * u(rng);
      PhasePoint p = sample_point(r, E, mu, M_PI / 2.0, M_PI / 2.0, 0.0, M);
      p.t = -2.0 * M * std::log(r - 2.0 * M) + ts;  // place at t* = ts
      const double ell = p.ell();
      const NodeEval ev = tr.evaluate(r, p.p_rstar, ell, ts);
      const double full = evaluate_f_full(p, d, topt);
      CHECK(std::abs(ev.f - full) < 1e-7 * (1.0 + std::abs(full)));
    }
  }
  SECTION("axisymmetric derivative vanishes: d_phi f = 0") {
    // the reduced data is axisymmetric by construction; the full tracer
    // evaluated at phi-shifted points must agree exactly
    const PhasePoint a = equatorial_point(7.0, 0.1, 1.5, M, -2.0 * std::log(5.0));
    PhasePoint b = a;
    b.phi += 0.37;
    CHECK(evaluate_f_full(a, d, topt) == Catch::Approx(evaluate_f_full(b, d, topt)).margin(1e-12));
  }
  SECTION("d_t f equals the time-shift derivative of the traced field") {
    ReducedTracer tr(d, M, topt, true);
    ReducedTracer tr_f(d, M, topt, false);
    int checked = 0;
    for (double r : {5.0, 5.5, 6.0, 6.5, 7.0, 8.0}) {
      for (double pr : {-0.4, -0.1, 0.2}) {
        const double ell = 1.2, ts = 3.0;
        const NodeEval ev = tr.evaluate(r, pr, ell, ts);
        if (ev.outside || std::abs(ev.f) < 1e-4) continue;
        const double h = 1e-5;  // t* shift at fixed (r, p): exactly d_t
        const double fd = (tr_f.evaluate(r, pr, ell, ts + h).f -
                           tr_f.evaluate(r, pr, ell, ts - h).f) /
                          (2.0 * h);
        CHECK(std::abs(fd - ev.dtf) < 2e-5 * (1.0 + std::abs(ev.dtf)));
        ++checked;
      }
    }
    REQUIRE(checked >= 3);
  }
  SECTION("derivative fluxes match finite differences along leaf-tangent directions") {
    ReducedTracer tr(d, M, topt, true);
    ReducedTracer tr_f(d, M, topt, false);
    auto rng = rng_stream(157, 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int i = 0; i < 60 && checked < 15; ++i) {
      const double r = 4.0 + 6.0 * u(rng);
      const double pr = -0.8 + 1.6 * u(rng);
      const double ell = 0.2 + 3.0 * u(rng);
      const double ts = 1.0 + 6.0 * u(rng);
      const NodeEval ev = tr.evaluate(r, pr, ell, ts);
      if (ev.outside || std::abs(ev.f) < 1e-3) continue;
      ++checked;
      // finite difference of f along the bold_V_plus leaf-tangent direction
      Shell<double> s{0.0, r, M_PI / 2.0, 0.0, pr, ell, 0.0};
      const double pt = pt_closure(s, M);
      const Comps vp = eval_field(FieldId::BoldVPlus,
                                  close_shell(0.0, r, M_PI / 2.0, 0.0, pr, ell, 0.0, M));
      const double om2 = omega_sq(r, M);
      const double zt = vp[0] + 2.0 * M / r * vp[1];
      double xhat[2];
      {
        double y[2] = {r, pr}, dy[2];
        detail_vlasov::reduced_rhs(y, dy, ell, M);
        xhat[0] = dy[0];
        xhat[1] = dy[1];
      }
      const double Wr = om2 * vp[1] - zt * xhat[0];
      const double Wp = vp[4] - zt * xhat[1];
      const double h = 1e-5;
      const double fp = tr_f.evaluate(r + h * Wr, pr + h * Wp, ell, ts).f;
      const double fm = tr_f.evaluate(r - h * Wr, pr - h * Wp, ell, ts).f;
      const double fd = (fp - fm) / (2.0 * h);
      CHECK(std::abs(fd - ev.vpf) < 2e-4 * (1.0 + std::abs(ev.vpf)));
    }
    REQUIRE(checked >= 10);
  }
}

TEST_CASE("flux norms") {
  const double M = 1.0;
  SECTION("zero data gives zero flux") {
    InitialData z = InitialData::gaussian_shell(M);
    z.set_density([](const auto& r, const auto&, const auto&) {
      return decltype(r)(0.0);
    });
    FluxLab lab(M, 10.0, z, GridSpec{}, TraceOptions{}, false, 2);
    const NormVec v = lab.leaf_flux(0.0);
    for (double x : v) CHECK(x == 0.0);
  }
  SECTION("hierarchy: calE^0 = calE <= calE^1 <= calE^2 and exp weight >= calE") {
    InitialData d = InitialData::gaussian_shell(M);
    FluxLab lab(M, 10.0, d, GridSpec{}, TraceOptions{}, true, 2);
    for (double tau : {0.0, 4.0}) {
      const NormVec v = lab.leaf_flux(tau);
      CHECK(v[6] <= v[7] * (1.0 + 1e-12));
      CHECK(v[7] <= v[8] * (1.0 + 1e-12));
      CHECK(v[9] >= v[6] * (1.0 - 1e-12));
      CHECK(v[6] > 0.0);
    }
  }
  SECTION("all flux values are nonnegative") {
    InitialData d = InitialData::gaussian_shell(M);
    FluxLab lab(M, 10.0, d, GridSpec{}, TraceOptions{}, true, 2);
    for (double tau : {0.0, 3.0}) {
      const NormVec v = lab.leaf_flux(tau);
      for (double x : v) CHECK(x >= 0.0);
    }
  }
  SECTION("stationary data gives tau-independent r^2 T_NN") {
    // density a function of (E, ell) only: an exact stationary solution
    // within the causal window of its radial cutoff
    SupportBox box{2.3, 360.0, -2.0, 2.0, 0.0, 4.0};
    InitialData d = InitialData::from_expression(
        "bump((sqrt(pr^2+(1-2/r)*l^2/(r^2))-1)*2)*bump(l/4)"
        "*step((r-2.3)/0.4)*(1-step((r-300)/50))",
        box);
    GridSpec g;
    g.panels_pr = 4;
    g.panels_ell = 4;
    FluxLab lab(M, 10.0, d, g, TraceOptions{}, false, 2);
    const double a = lab.r2_tnn(0.0, 5.0);
    const double b = lab.r2_tnn(4.0, 5.0);
    const double c = lab.r2_tnn(8.0, 5.0);
    REQUIRE(a > 0.0);
    CHECK(std::abs(b - a) / a < 2e-3);
    CHECK(std::abs(c - a) / a < 2e-3);
  }
}

TEST_CASE("decay fits on synthetic series") {
  std::vector<double> tau, pw, ex;
  for (double t = 5.0; t <= 300.0; t *= 1.3) {
    tau.push_back(t);
    pw.push_back(3.7 * std::pow(t, -2.0));
    ex.push_back(0.9 * std::exp(-0.3 * t));
  }
  const DecayFit fp = decay_fit(tau, pw, DecayModel::Power, 5.0, 300.0);
  CHECK(fp.rate == Catch::Approx(2.0).margin(0.01));
  const DecayFit fe = decay_fit(tau, ex, DecayModel::Exponential, 5.0, 300.0);
  CHECK(fe.rate == Catch::Approx(0.3).margin(0.003));
  SECTION("windows and positivity are enforced") {
    std::vector<double> bad = pw;
    bad[3] = 0.0;
    CHECK_THROWS_AS(decay_fit(tau, bad, DecayModel::Power, 5.0, 300.0), std::domain_error);
    CHECK_THROWS_AS(decay_fit(tau, pw, DecayModel::Power, 250.0, 300.0), std::domain_error);
  }
}

TEST_CASE("balance bookkeeping closes") {
  const double M = 1.0;
  InitialData d = InitialData::gaussian_shell(M);
  GridSpec g;
  g.panels_r_space = 12;
  g.panels_r_cone = 8;
  g.panels_pr = 4;
  g.panels_ell = 4;
  g.panels_tstar = 12;
  TraceOptions t;
  FluxLab lab(M, 10.0, d, g, t, false, 2);
  const auto rep = lab.balance(12.0, 2.6, 16.0, 0);
  CHECK(rep.defect_rel < 5e-4);
  const auto repE = lab.balance(12.0, 2.6, 16.0, 1);
  CHECK(repE.defect_rel < 5e-4);
}

TEST_CASE("Monte Carlo cross-check of the reduced quadrature") {
  const double M = 1.0;
  InitialData d = InitialData::gaussian_shell(M);
  FluxLab lab(M, 10.0, d, GridSpec{}, TraceOptions{}, false, 2);
  const double quad = lab.leaf_flux(0.0)[0];  // E[p_N f](0)
  const McEstimate mc = mc_energy_tau0(d, M, 10.0, 13, 8, 4242);
  CHECK(std::abs(mc.value - quad) < 3.0 * mc.std_error);
}

TEST_CASE("determinism across thread counts") {
  const double M = 1.0;
  InitialData d = InitialData::gaussian_shell(M);
  FluxLab lab1(M, 10.0, d, GridSpec{}, TraceOptions{}, true, 1);
  FluxLab lab2(M, 10.0, d, GridSpec{}, TraceOptions{}, true, 2);
  const NormVec a = lab1.leaf_flux(2.0);
  const NormVec b = lab2.leaf_flux(2.0);
  for (int i = 0; i < kNumNorms; ++i) CHECK(a[i] == b[i]);
}
