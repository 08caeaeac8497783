#include <catch2/catch_amalgamated.hpp>

#include "svlab/fields.hpp"
#include "svlab/flow.hpp"
#include "svlab/util.hpp"
#include "svlab/weights.hpp"

using namespace svlab;

TEST_CASE("spray components") {
  SECTION("trapped point is a fixed point of (r*, p_r*)") {
    const PhasePoint p = equatorial_point(3.0, 0.0, std::sqrt(27.0));
    double y[7] = {p.t, p.r, p.theta, p.phi, p.p_rstar, p.p_theta, p.p_phi}, dy[7];
    spray_tstar(y, dy, 1.0);
    CHECK(dy[1] == 0.0);  // dr/dt*
    CHECK(dy[4] == 0.0);  // dp_r*/dt*
  }
  SECTION("radial ray keeps p_r* constant") {
    const PhasePoint p = equatorial_point(6.0, -0.7, 0.0);
    double y[7] = {p.t, p.r, p.theta, p.phi, p.p_rstar, p.p_theta, p.p_phi}, dy[7];
    spray_tstar(y, dy, 1.0);
    CHECK(dy[4] == 0.0);
  }
  SECTION("forcing term value (r-3M) l^2 / r^4") {
    const PhasePoint p = equatorial_point(4.0, 0.0, 2.0);
    const Comps c = eval_field(FieldId::XG, p);
    CHECK(c[4] == Catch::Approx(1.0 / 64.0).epsilon(1e-15));
  }
  SECTION("spray annihilates conserved quantities under duals") {
    auto rng = rng_stream(41, 0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
      const PhasePoint p =
          sample_point(2.2 + 40.0 * u(rng), 0.5 + u(rng), 2.0 * u(rng) - 1.0,
                       2.0 * M_PI * u(rng), 0.3 + 2.4 * u(rng), 1.0);
      WeightParams wp;
      CHECK(std::abs(lie_derivative_dual(WeightId::Pt, p, wp)) < 1e-13);
      CHECK(std::abs(lie_derivative_dual(WeightId::Pphi, p, wp)) < 1e-13);
      CHECK(std::abs(lie_derivative_dual(WeightId::Ell, p, wp)) < 1e-12);
    }
  }
}

TEST_CASE("photon sphere") {
  FlowOptions fo;
  SECTION("circular orbit holds then departs") {
    const PhasePoint p = equatorial_point(3.0, 0.0, std::sqrt(27.0));
    Trajectory tr = integrate_orbit(p, 15.0, fo);
    for (const auto& s : tr.samples)
      if (s.s <= 10.0) CHECK(std::abs(s.pp.r - 3.0) < 1e-6);
  }
  SECTION("departure e-folding rate is the Lyapunov exponent") {
    PhasePoint p = equatorial_point(3.0 * (1.0 + 1e-9), 0.0, std::sqrt(27.0));
    Trajectory tr = integrate_orbit(p, 120.0, fo);
    std::vector<double> ts, lg;
    for (const auto& s : tr.samples) {
      const double d = std::abs(s.pp.r - 3.0);
      if (d > 1e-8 && d < 1e-3) {
        ts.push_back(s.s);
        lg.push_back(std::log(d));
      }
    }
    REQUIRE(ts.size() >= 10);
    const LinearFit f = fit_line(ts, lg);
    const double expected = 1.0 / (3.0 * std::sqrt(3.0));
    CHECK(std::abs(f.slope - expected) / expected < 0.02);
  }
}

TEST_CASE("integration quality") {
  FlowOptions fo;
  SECTION("radial ingoing ray reaches the horizon guard with tiny drift") {
    const PhasePoint p = equatorial_point(10.0, -1.0, 0.0);
    Trajectory tr = integrate_orbit(p, 100.0, fo);
    CHECK(tr.status == OdeStatus::EventStop);
    CHECK(tr.back().pp.r <= 2.0 * (1.0 + 1e-8) * (1.0 + 1e-12));
    CHECK(conserved_drift(tr).E < 1e-11);
  }
  SECTION("conserved drift across orbit classes") {
    auto rng = rng_stream(43, 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 25; ++i) {
      const PhasePoint p =
          sample_point(2.5 + 20.0 * u(rng), 0.5 + 1.5 * u(rng), 2.0 * u(rng) - 1.0,
                       2.0 * M_PI * u(rng), 0.4 + 2.3 * u(rng), 0.7);
      Trajectory tr = integrate_orbit(p, 60.0, fo);
      const ConservedSet d = conserved_drift(tr);
      CHECK(d.E < 1e-10);
      CHECK(d.l < 1e-10);
      CHECK(d.lz < 1e-10);
    }
  }
  SECTION("time-translation equivariance") {
    PhasePoint p = equatorial_point(6.0, 0.4, 2.5);
    Trajectory a = integrate_orbit(p, 20.0, fo);
    p.t += 5.0;
    Trajectory b = integrate_orbit(p, 20.0, fo);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      CHECK(b.samples[i].pp.r == Catch::Approx(a.samples[i].pp.r).margin(1e-13));
      CHECK(b.samples[i].pp.t - a.samples[i].pp.t == Catch::Approx(5.0).margin(1e-12));
    }
  }
}

TEST_CASE("flow jacobian") {
  FlowOptions fo;
  fo.jacobian = true;
  SECTION("zero span gives the identity") {
    const PhasePoint p = equatorial_point(5.0, 0.2, 2.0);
    Trajectory tr = integrate_orbit(p, 0.0, fo);
    const auto& J = tr.back().jac;
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j) CHECK(J[7 * i + j] == (i == j ? 1.0 : 0.0));
  }
  SECTION("columns match central finite differences of the flow map") {
    auto rng = rng_stream(47, 2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int orbit = 0; orbit < 10; ++orbit) {
      const double r = 3.5 + 8.0 * u(rng);
      const double E = 0.7 + 0.6 * u(rng);
      const double mu = 1.6 * u(rng) - 0.8;
      const PhasePoint p = sample_point(r, E, mu, 2.0 * M_PI * u(rng), 1.0 + u(rng), 0.5);
      const double span = 4.0 + 4.0 * u(rng);
      Trajectory tr = integrate_orbit(p, span, fo);
      REQUIRE(tr.status == OdeStatus::Reached);
      const auto& J = tr.back().jac;
      double y0[7] = {p.t, p.r, p.theta, p.phi, p.p_rstar, p.p_theta, p.p_phi};
      for (int c = 0; c < 7; ++c) {
        const double h = 1e-6;
        double yp[7], ym[7];
        std::copy(y0, y0 + 7, yp);
        std::copy(y0, y0 + 7, ym);
        yp[c] += h;
        ym[c] -= h;
        auto mk = [&](double* y) {
          PhasePoint q{y[0], y[1], y[2], y[3], y[4], y[5], y[6], 0.0, 1.0};
          q.p_t = pt_closure(q.shell(), 1.0);
          // hold t* fixed: integrate the same span from the shifted start
          FlowOptions f2 = fo;
          f2.jacobian = false;
          return integrate_orbit(q, span, f2).back().pp;
        };
        const PhasePoint qp = mk(yp), qm = mk(ym);
        const double fd[7] = {(qp.t - qm.t) / (2 * h),        (qp.r - qm.r) / (2 * h),
                              (qp.theta - qm.theta) / (2 * h), (qp.phi - qm.phi) / (2 * h),
                              (qp.p_rstar - qm.p_rstar) / (2 * h),
                              (qp.p_theta - qm.p_theta) / (2 * h),
                              (qp.p_phi - qm.p_phi) / (2 * h)};
        for (int rix = 0; rix < 7; ++rix) {
          const double ref = J[7 * rix + c];
          CHECK(std::abs(fd[rix] - ref) <= 1e-5 * (1.0 + std::abs(ref)) + 1e-5);
        }
      }
    }
  }
  SECTION("pulled-back conserved gradients stay constant") {
    const PhasePoint p = equatorial_point(5.5, 0.3, 3.2);
    Trajectory tr = integrate_orbit(p, 25.0, fo);
    // grad p_phi = e_7, grad ell: dual sweep at each sample
    std::array<double, 7> g0{};
    bool first = true;
    for (const auto& s : tr.samples) {
      std::array<double, 7> g{};
      for (int c = 0; c < 7; ++c) {
        double acc = 0.0;
        // d(p_phi)/dy = e_7 pulled back: row vector times J
        acc = s.jac[7 * 6 + c];
        g[c] = acc;
      }
      if (first) {
        g0 = g;
        first = false;
      } else {
        for (int c = 0; c < 7; ++c) CHECK(std::abs(g[c] - g0[c]) < 1e-9 * (1.0 + std::abs(g0[c])));
      }
    }
  }
}

TEST_CASE("orbit classification") {
  FlowOptions fo;
  SECTION("exactly trapped") {
    const PhasePoint p = equatorial_point(3.0, 0.0, std::sqrt(27.0));
    CHECK(classify_orbit(p, fo).tag == OrbitTag::TrappedNumerical);
  }
  SECTION("radial outgoing escapes") {
    const PhasePoint p = equatorial_point(4.0, 1.0, 0.0);
    const OrbitClass oc = classify_orbit(p, fo);
    CHECK(oc.tag == OrbitTag::Escapes);
    CHECK(oc.t1 == 0.0);
    CHECK(oc.t2 <= oc.tstar_exit);
  }
  SECTION("radial ingoing crosses the horizon") {
    const PhasePoint p = equatorial_point(2.5, -1.0, 0.0);
    const OrbitClass oc = classify_orbit(p, fo);
    CHECK(oc.tag == OrbitTag::CrossesHorizon);
    CHECK(oc.t1 == 0.0);
  }
  SECTION("potential comparison agrees with the numerics") {
    auto rng = rng_stream(53, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 40; ++i) {
      const double r = 2.3 + 30.0 * u(rng);
      const double E = 0.6 + u(rng);
      const double mu = 2.0 * u(rng) - 1.0;
      const PhasePoint p = sample_point(r, E, mu, 0.3, M_PI / 2.0, 0.0);
      const double disc = 27.0 * E * E - ang_mom_sq(p.shell());
      const OrbitClass oc = classify_orbit(p, fo);
      if (disc > 1e-6) {
        // over-barrier: ingoing falls in, outgoing escapes
        if (p.p_rstar < 0.0) CHECK(oc.tag == OrbitTag::CrossesHorizon);
        if (p.p_rstar > 0.0) CHECK(oc.tag == OrbitTag::Escapes);
      } else if (disc < -1e-6) {
        if (r > 3.0) CHECK(oc.tag == OrbitTag::Escapes);
        else CHECK(oc.tag == OrbitTag::CrossesHorizon);
      }
    }
  }
}

TEST_CASE("accumulators and invariants along orbits") {
  FlowOptions fo;
  fo.accumulators = true;
  SECTION("s and s-bar are conserved (log form)") {
    auto rng = rng_stream(59, 4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
      const PhasePoint p =
          sample_point(2.6 + 15.0 * u(rng), 0.6 + 0.9 * u(rng), 1.8 * u(rng) - 0.9,
                       1.0, M_PI / 2.0, 0.0);
      Trajectory tr = integrate_orbit(p, 40.0, fo);
      const auto& a = tr.samples.front();
      const auto& b = tr.back();
      if (phi_minus(b.pp.shell(), b.pp.p_t, 1.0) *
              phi_minus(a.pp.shell(), a.pp.p_t, 1.0) <= 0.0)
        continue;  // sign change would need the crossing time split
      const double la = log_abs_s_invariant(a.pp, a.alpha);
      const double lb = log_abs_s_invariant(b.pp, b.alpha);
      CHECK(std::abs(lb - la) < 1e-8 * (1.0 + std::abs(la)));
      const double ba = log_abs_sbar_invariant(a.pp, a.alphabar);
      const double bb = log_abs_sbar_invariant(b.pp, b.alphabar);
      CHECK(std::abs(bb - ba) < 1e-8 * (1.0 + std::abs(ba)));
    }
  }
  SECTION("d/ds phi_minus along dense output matches the closed form") {
    const PhasePoint p0 = equatorial_point(5.0, -0.25, 3.0);
    detail::FullSystem sys{1.0, false, false};
    Dopri5 ode(7, fo.ode);
    std::vector<double> y = {p0.t, p0.r, p0.theta, p0.phi, p0.p_rstar, p0.p_theta, p0.p_phi};
    Dopri5::Rhs rhs = [&sys](double s, const double* yy, double* dyy) { sys(s, yy, dyy); };
    REQUIRE(ode.integrate(rhs, 0.0, 12.0, y, nullptr, true) == OdeStatus::Reached);
    double worst = 0.0;
    std::vector<double> ys(7), dys(7);
    for (const auto& st : ode.dense_steps()) {
      for (double th : {0.25, 0.7}) {
        const double s = st.s0 + th * st.h;
        ode.dense_eval(st, s, ys.data());
        ode.dense_deriv(st, s, dys.data());
        PhasePoint q{ys[0], ys[1], ys[2], ys[3], ys[4], ys[5], ys[6], 0.0, 1.0};
        q.p_t = pt_closure(q.shell(), 1.0);
        // d/dt* phi_- from the interpolant via duals
        Shell<Dual> sd{{ys[0], dys[0]}, {ys[1], dys[1]}, {ys[2], dys[2]}, {ys[3], dys[3]},
                       {ys[4], dys[4]}, {ys[5], dys[5]}, {ys[6], dys[6]}};
        const Dual pt = pt_closure(sd, 1.0);
        const double lhs = phi_minus(sd, pt, 1.0).d;
        // closed form: X_g(phi_-)/lambda, with 1/lambda = om2_over_lapse
        const double rhs_cf = -kappa_rate(q.shell(), q.p_t, 1.0) *
                              phi_minus(q.shell(), q.p_t, 1.0) *
                              om2_over_lapse(q.shell(), q.p_t, 1.0);
        worst = std::max(worst, std::abs(lhs - rhs_cf) / (1.0 + std::abs(rhs_cf)));
      }
    }
    CHECK(worst < 10.0 * 1e-9);  // dense output is one order below the step tolerance
  }
}
