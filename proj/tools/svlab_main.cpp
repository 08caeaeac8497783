// svlab command line: experiment orchestration and artifact emission.
//
// Subcommands: verify-identities, verify-commutators, trace, flux, iled,
// decay, tnn-scan. Every run writes its artifacts atomically together with a
// manifest (config hash, seed, wall time, per-check outcome). Exit codes:
// 0 all checks pass, 1 a check failed, 2 usage/config error.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "svlab/io.hpp"
#include "svlab/vlasov.hpp"

namespace {

using namespace svlab;
namespace fs = std::filesystem;

struct Common {
  RunConfig cfg;
  fs::path out;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  RunManifest manifest;
  WallTimer timer;
};

InitialData make_data(const Json& j, double M) {
  const std::string preset = j.at("preset");
  const Json& p = j.at("params");
  auto get = [&](const char* k, double dflt) { return p.contains(k) ? p[k].get<double>() : dflt; };
  if (preset == "gaussian-shell")
    return InitialData::gaussian_shell(M, get("r0", 7.0), get("wr", 1.5), get("pr0", 0.0),
                                       get("wpr", 0.8), get("wl", 3.5), get("amp", 1.0));
  if (preset == "trapped-neighborhood-bump")
    return InitialData::trapped_bump(M, get("wr", 0.6), get("wpr", 0.35),
                                     get("ell0", 5.196), get("wl", 1.2), get("amp", 1.0));
  if (preset == "exponential-tail")
    return InitialData::exponential_tail(M, get("r0", 6.0), get("L", 12.0), get("wpr", 0.8),
                                         get("wl", 3.0), get("amp", 1.0));
  if (preset == "expression") {
    const Json& s = j.at("support");
    SupportBox box{s.at("r_lo"), s.at("r_hi"),   s.at("pr_lo"),
                   s.at("pr_hi"), s.at("ell_lo"), s.at("ell_hi")};
    return InitialData::from_expression(j.at("expression"), box);
  }
  throw std::invalid_argument("unknown data preset: " + preset);
}

GridSpec make_grid(const Json& g) {
  GridSpec spec;
  spec.gl_pts = g.at("gl_pts");
  spec.panels_r_space = g.at("panels_r_space");
  spec.panels_r_cone = g.at("panels_r_cone");
  spec.panels_pr = g.at("panels_pr");
  spec.panels_ell = g.at("panels_ell");
  spec.panels_tstar = g.at("panels_tstar");
  return spec;
}

TraceOptions make_trace_opts(const Json& cfg) {
  TraceOptions t;
  t.ode.rtol = cfg.at("ode").at("rtol");
  t.ode.atol = cfg.at("ode").at("atol");
  return t;
}

PhasePoint config_point(const Json& t, double M) {
  const double E = t.at("E");
  double ell = t.at("ell");
  if (ell == 0.0) ell = std::sqrt(27.0) * M * E;  // circular-photon value
  return equatorial_point(t.at("r").get<double>(), t.at("pr").get<double>(), ell, M);
}

int finish(Common& c) {
  c.manifest.wall_seconds = c.timer.seconds();
  bool pass = true;
  for (const auto& [k, v] : c.manifest.checks) {
    std::printf("%-44s %s\n", k.c_str(), v ? "pass" : "FAIL");
    pass = pass && v;
  }
  atomic_write(c.out / "manifest.json", c.manifest.to_json().dump(2) + "\n");
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
int run_verify_identities(Common& c) {
  const Json& cfg = c.cfg.j;
  const double M = cfg.at("M");
  const Json& idc = cfg.at("identities");
  const std::size_t n = idc.at("samples");
  const double r_lo = idc.at("r_lo"), r_hi = idc.at("r_hi");
  const double tol = idc.at("tolerance");
  WeightParams wp;
  wp.M = M;
  wp.eps_xi = idc.at("xi_eps");

  auto sample = [&](std::uint64_t i) {
    auto rng = rng_stream(c.seed, i);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = r_lo * std::pow(r_hi / r_lo, u(rng));
    const double E = 0.5 * std::pow(4.0, u(rng));
    const double mu = 2.0 * u(rng) - 1.0;
    const double th = 0.15 + (M_PI - 0.3) * u(rng);
    return sample_point(r, E, mu, 2.0 * M_PI * u(rng), th, 2.0 * M_PI * u(rng), M);
  };

  Json report;
  report["seed"] = c.seed;
  report["samples"] = n;
  Json residuals = Json::object();

  struct Entry {
    std::string name;
    double max_res = 0.0;
  };
  std::vector<Entry> entries;
  // closure residual and product identity
  {
    double worst_closure = 0.0, worst_prod = 0.0, worst_shellrel = 0.0;
    std::vector<WeightId> lie_ids = {WeightId::PhiMinus,   WeightId::BoldPhiMinus,
                                     WeightId::OmegaPhiPlus, WeightId::RedshiftPu,
                                     WeightId::PhiPlus};
    std::vector<double> worst_lie(lie_ids.size() + 3, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const PhasePoint p = sample(i);
      worst_closure = std::max(worst_closure, shell_residual(p));
      const double prod = phi_plus(p.shell(), p.p_t, M) * phi_minus(p.shell(), p.p_t, M);
      const double rhs = 27.0 * M * M * p.p_t * p.p_t - ang_mom_sq(p.shell());
      worst_prod = std::max(worst_prod, std::abs(prod - rhs) / (1.0 + std::abs(prod) + std::abs(rhs)));
      const double fourpupv = 4.0 * p.pu() * p.pv() - omega_sq(p.r, M) * ang_mom_sq(p.shell()) / (p.r * p.r);
      worst_shellrel = std::max(worst_shellrel, std::abs(fourpupv) / (p.p_t * p.p_t));
      for (std::size_t k = 0; k < lie_ids.size(); ++k) {
        const double a = lie_derivative_dual(lie_ids[k], p, wp);
        const double b = *lie_derivative_closed_form(lie_ids[k], p, wp);
        worst_lie[k] = std::max(worst_lie[k], std::abs(a - b) / (1.0 + std::abs(a) + std::abs(b)));
      }
      for (int q = 0; q <= 2; ++q) {
        WeightParams wq = wp;
        wq.rp_power = q;
        const double a = lie_derivative_dual(WeightId::RpPv, p, wq);
        const double b = *lie_derivative_closed_form(WeightId::RpPv, p, wq);
        worst_lie[lie_ids.size() + q] =
            std::max(worst_lie[lie_ids.size() + q], std::abs(a - b) / (1.0 + std::abs(a) + std::abs(b)));
      }
    }
    entries.push_back({"null_shell_closure", worst_closure});
    entries.push_back({"pu_pv_shell_relation", worst_shellrel});
    entries.push_back({"phi_product", worst_prod});
    const char* lname[] = {"Xg_phi_minus", "Xg_bold_phi_minus", "Xg_omega_phi_plus",
                           "Xg_redshift_pu", "Xg_phi_plus"};
    for (std::size_t k = 0; k < lie_ids.size(); ++k) entries.push_back({lname[k], worst_lie[k]});
    for (int q = 0; q <= 2; ++q)
      entries.push_back({"Xg_rp_pv_p" + std::to_string(q), worst_lie[lie_ids.size() + q]});
  }
  // massive flow identity
  {
    double worst = 0.0;
    for (std::size_t i = 0; i < n / 10 + 1; ++i) {
      auto rng = rng_stream(c.seed ^ 0xabcdef, i);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double m = 0.1 + 0.9 * u(rng);
      const double ell = 4.0 * m * M * (1.05 + 2.0 * u(rng));
      const MassiveRadii rad = massive_radii(m, ell, M);
      const double r = rad.rho_minus + (std::min(rad.rho_plus, 60.0) - rad.rho_minus) *
                                           (0.02 + 0.96 * u(rng));
      if (!(r > 2.0 * M * 1.01)) continue;
      const double pr = 2.0 * u(rng) - 1.0;
      Shell<double> s{0.0, r, M_PI / 2.0, 0.0, pr, ell, 0.0};
      const double pt = value(massive_pt_closure(s, m, M));
      for (int sign : {-1, 1}) {
        const double lhs = massive_phi_lie_dual(s, m, M, sign);
        const double rhs = sign * massive_phi_rate(s, pt, m, M) *
                           value(massive_phi(s, pt, m, M, sign));
        worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(lhs) + std::abs(rhs)));
      }
    }
    entries.push_back({"massive_flow_identity", worst});
  }
  // sign checks (reported; zeta bounds asserted)
  {
    const std::size_t ns = idc.at("sign_samples");
    double worst_zeta = 0.0, zmin = 1e9, zmax = -1e9, worst_xi = 0.0, worst_logphi = 0.0,
           worst_pn = 0.0, pn_band_const = 0.0;
    for (std::size_t i = 0; i < ns; ++i) {
      const PhasePoint p = sample(i ^ 0x5a5a5a);
      if (std::abs(p.p_rstar) < 1e-8 || std::abs(p.r - 3.0 * M) < 1e-8) continue;
      const double z = eval_weight(WeightId::Zeta, p, wp);
      zmin = std::min(zmin, std::abs(z));
      zmax = std::max(zmax, std::abs(z));
      worst_zeta = std::max(worst_zeta, lie_derivative_dual(WeightId::Zeta, p, wp));
      worst_xi = std::max(worst_xi, -lie_derivative_dual(WeightId::Xi, p, wp));
      worst_logphi = std::max(worst_logphi, lie_derivative_dual(WeightId::LogPhiPlus, p, wp));
      // redshift estimate for |p_N|: the combination
      //   X_g|p_N| + 4|r-3M||p_u|^2/(M^2 Omega^4) 1_{r<=2.5M}
      // is nonpositive outside the cutoff band and bounded by C|p_t|^2 in it
      double comb = -lie_derivative_dual(WeightId::PN, p, wp);
      double comb_scale = 1.0 + p.p_t * p.p_t;
      if (p.r <= 2.5 * M) {
        const double puo = p.pu_over_om2();  // |p_u|/Omega^2 up to sign
        const double bulk = 4.0 * std::abs(p.r - 3.0 * M) * puo * puo / (M * M);
        comb += bulk;
        comb_scale += bulk;
      }
      if (p.r <= 2.5 * M || p.r >= 2.7 * M)
        worst_pn = std::max(worst_pn, comb / comb_scale);
      else
        pn_band_const = std::max(pn_band_const, comb / (p.p_t * p.p_t));
    }
    // ladder search for the largest admissible multiplier constant
    double eps_admissible = 0.0;
    for (double eps : {1e-3, 3e-4, 1e-4, 3e-5, 1e-5}) {
      WeightParams we = wp;
      we.eps_xi = eps;
      double worst = 1e300;
      for (std::size_t i = 0; i < ns / 4; ++i) {
        const PhasePoint p = sample(i ^ 0x77aa11);
        if (std::abs(p.p_rstar) < 1e-8 || std::abs(p.r - 3.0 * M) < 1e-8) continue;
        worst = std::min(worst, lie_derivative_dual(WeightId::Xi, p, we));
      }
      if (worst >= 0.0) {
        eps_admissible = eps;
        break;
      }
    }
    report["xi_eps_admissible"] = eps_admissible;
    report["zeta_abs_range"] = {zmin, zmax};
    report["xi_worst_Xg_abs"] = worst_xi;          // should be <= 0 (X_g|xi| <= 0)
    report["zeta_worst_Xg"] = worst_zeta;          // should be <= 0
    report["log_phi_plus_worst_Xg_abs"] = worst_logphi;  // should be <= 0
    report["pN_redshift_comb_outside_band"] = worst_pn;  // should be <= 0
    report["pN_redshift_band_constant"] = pn_band_const;  // reported, not asserted
    c.manifest.checks.push_back({"zeta in [1,3]", zmin >= 1.0 && zmax <= 3.0});
    c.manifest.checks.push_back({"Xg|zeta| <= 0 (sampled)", worst_zeta <= 1e-14});
    c.manifest.checks.push_back({"Xg|xi| <= 0 (sampled)", worst_xi <= 1e-14});
    c.manifest.checks.push_back({"Xg|log(Om phi+/..)| <= 0 (sampled)", worst_logphi <= 1e-14});
    c.manifest.checks.push_back({"pN redshift combination <= 0 off band", worst_pn <= 1e-10});
  }

  for (const auto& e : entries) {
    residuals[e.name] = e.max_res;
    c.manifest.checks.push_back({e.name + " < tol", e.max_res < tol});
  }
  report["max_residuals"] = residuals;
  report["tolerance"] = tol;
  atomic_write(c.out / "identities.json", report.dump(2) + "\n");
  return finish(c);
}

// ---------------------------------------------------------------------------
int run_verify_commutators(Common& c) {
  const Json& cfg = c.cfg.j;
  const double M = cfg.at("M");
  const Json& idc = cfg.at("identities");
  const std::size_t n = idc.at("samples");
  const double r_lo = idc.at("r_lo"), r_hi = idc.at("r_hi");
  const double tol = idc.at("tolerance");

  Json residuals = Json::object();
  for (IdentityId id : identity_catalog()) {
    double worst = 0.0;
    PhasePoint worst_pt{};
    for (std::size_t i = 0; i < n; ++i) {
      auto rng = rng_stream(c.seed ^ (0x777 + std::uint64_t(id)), i);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double r = r_lo * std::pow(r_hi / r_lo, u(rng));
      const double E = 0.5 * std::pow(4.0, u(rng));
      const double mu = 2.0 * u(rng) - 1.0;
      const double th = 0.15 + (M_PI - 0.3) * u(rng);
      const PhasePoint p =
          sample_point(r, E, mu, 2.0 * M_PI * u(rng), th, 2.0 * M_PI * u(rng), M);
      const double phi = 2.0 * u(rng) - 1.0;
      const double res = identity_residual(id, p, phi);
      if (res > worst) {
        worst = res;
        worst_pt = p;
      }
    }
    residuals[identity_name(id)] = worst;
    c.manifest.checks.push_back({std::string(identity_name(id)) + " < tol", worst < tol});
  }
  Json report{{"seed", c.seed}, {"samples", n}, {"tolerance", tol},
              {"max_residuals", residuals}};
  atomic_write(c.out / "commutators.json", report.dump(2) + "\n");
  return finish(c);
}

// ---------------------------------------------------------------------------
int run_trace(Common& c) {
  const Json& cfg = c.cfg.j;
  const double M = cfg.at("M");
  const Json& t = cfg.at("trace");
  PhasePoint p0 = config_point(t, M);
  FlowOptions fo;
  fo.ode.rtol = cfg.at("ode").at("rtol");
  fo.ode.atol = cfg.at("ode").at("atol");
  fo.accumulators = t.at("accumulators");
  const Trajectory tr = integrate_orbit(p0, t.at("span").get<double>(), fo);

  CsvWriter csv({"tstar", "t", "r", "theta", "phi", "p_rstar", "p_theta", "p_phi", "p_t",
                 "E_drift", "l_drift", "alpha", "alphabar", "psi"});
  const ConservedSet c0 = conserved(tr.samples.front().pp);
  for (const auto& s : tr.samples) {
    const ConservedSet cc = conserved(s.pp);
    csv.row({format_double(s.s), format_double(s.pp.t), format_double(s.pp.r),
             format_double(s.pp.theta), format_double(s.pp.phi), format_double(s.pp.p_rstar),
             format_double(s.pp.p_theta), format_double(s.pp.p_phi), format_double(s.pp.p_t),
             format_double((cc.E - c0.E) / c0.E),
             format_double((cc.l - c0.l) / (c0.l + 1e-300)), format_double(s.alpha),
             format_double(s.alphabar), format_double(s.psi)});
  }
  atomic_write(c.out / "trajectory.csv", csv.str());

  // photon-sphere departure rate fit (meaningful for near-trapped starts)
  Json report{{"seed", c.seed}};
  {
    std::vector<double> ts, lg;
    for (const auto& s : tr.samples) {
      const double d = std::abs(s.pp.r - 3.0 * M);
      if (d > 1e-8 * M && d < 1e-3 * M) {
        ts.push_back(s.s);
        lg.push_back(std::log(d));
      }
    }
    if (ts.size() >= 8) {
      const LinearFit f = fit_line(ts, lg);
      const double expected = 1.0 / (3.0 * std::sqrt(3.0) * M);
      report["lyapunov_rate"] = f.slope;
      report["lyapunov_expected"] = expected;
      report["lyapunov_rel_err"] = std::abs(f.slope - expected) / expected;
      c.manifest.checks.push_back(
          {"lyapunov rate within 2%", std::abs(f.slope - expected) / expected < 0.02});
    }
  }
  const ConservedSet drift = conserved_drift(tr);
  report["E_drift"] = drift.E;
  report["l_drift"] = drift.l;
  report["orbit_class"] = int(classify_orbit(p0, fo).tag);
  c.manifest.checks.push_back({"E drift < 1e-10", drift.E < 1e-10});
  atomic_write(c.out / "trace.json", report.dump(2) + "\n");
  return finish(c);
}

// ---------------------------------------------------------------------------
FluxLab make_lab(Common& c, bool derivatives) {
  const Json& cfg = c.cfg.j;
  const double M = cfg.at("M");
  InitialData data = make_data(cfg.at("data"), M);
  return FluxLab(M, cfg.at("R0"), std::move(data), make_grid(cfg.at("flux").at("grid")),
                 make_trace_opts(cfg), derivatives, c.threads,
                 cfg.at("flux").at("exp_b").get<double>());
}

int run_flux(Common& c) {
  const Json& cfg = c.cfg.j;
  FluxLab lab = make_lab(c, cfg.at("flux").at("derivatives").get<bool>());
  const std::vector<double> taus = cfg.at("flux").at("taus").get<std::vector<double>>();
  const bool want_err = cfg.at("flux").at("err_est");

  CsvWriter csv({"tau", "norm_tag", "value", "err_est"});
  std::map<std::string, std::vector<double>> series;
  std::vector<double> tgrid;
  for (double tau : taus) {
    const NormVec v = lab.leaf_flux(tau);
    NormVec e{};
    if (want_err) {
      GridSpec coarse = make_grid(cfg.at("flux").at("grid"));
      coarse.panels_r_space = std::max(1, coarse.panels_r_space / 2);
      coarse.panels_r_cone = std::max(1, coarse.panels_r_cone / 2);
      coarse.panels_pr = std::max(1, coarse.panels_pr / 2);
      coarse.panels_ell = std::max(1, coarse.panels_ell / 2);
      FluxLab lab2(cfg.at("M"), cfg.at("R0"), lab.data(), coarse, make_trace_opts(cfg),
                   cfg.at("flux").at("derivatives").get<bool>(), c.threads,
                   cfg.at("flux").at("exp_b").get<double>());
      const NormVec vc = lab2.leaf_flux(tau);
      for (int i = 0; i < kNumNorms; ++i) e[i] = std::abs(v[i] - vc[i]);
    }
    tgrid.push_back(tau);
    for (int i = 0; i < kNumNorms; ++i) {
      csv.row({format_double(tau), norm_names()[i], format_double(v[i]), format_double(e[i])});
      series[norm_names()[i]].push_back(v[i]);
    }
  }
  atomic_write(c.out / "flux.csv", csv.str());

  // summary: balance defect, ILED plateau, decay fits
  Json summary{{"seed", c.seed}};
  {
    const Json& b = cfg.at("balance");
    auto rep = lab.balance(b.at("tau"), b.at("r_in"), b.at("r_out"),
                           b.at("weight") == "energy" ? 1 : 0);
    summary["balance"] = {{"initial", rep.initial},
                          {"final", rep.final_},
                          {"outflow_outer", rep.out_outer},
                          {"outflow_inner", rep.out_inner},
                          {"defect_rel", rep.defect_rel}};
  }
  if (tgrid.size() >= 3) {
    const auto& iled = series["calE_iled"];
    double acc = 0.0;
    std::vector<double> R;
    for (std::size_t i = 1; i < tgrid.size(); ++i) {
      acc += 0.5 * (iled[i] + iled[i - 1]) * (tgrid[i] - tgrid[i - 1]);
      R.push_back(acc);
    }
    summary["iled_ratio_final"] = R.back() / std::max(series["calE"][0], 1e-300);
  }
  try {
    const Json& d = cfg.at("decay");
    const auto w = d.at("window").get<std::vector<double>>();
    const DecayFit f =
        decay_fit(tgrid, series[d.at("norm")],
                  d.at("model") == "power" ? DecayModel::Power : DecayModel::Exponential,
                  w[0], w[1]);
    summary["decay_fit"] = {{"rate", f.rate}, {"residual", f.residual}, {"points", f.points}};
  } catch (const std::exception& e) {
    summary["decay_fit"] = {{"error", e.what()}};
  }
  atomic_write(c.out / "flux_summary.json", summary.dump(2) + "\n");
  c.manifest.checks.push_back({"flux series emitted", true});
  return finish(c);
}

// ---------------------------------------------------------------------------
int run_iled(Common& c) {
  const Json& cfg = c.cfg.j;
  FluxLab lab = make_lab(c, true);
  const double tau_max = cfg.at("iled").at("tau_max");
  std::vector<double> tgrid{0.0};
  for (double t = 1.0; t <= tau_max; t *= 2.0) tgrid.push_back(std::min(t, tau_max));
  if (tgrid.back() < tau_max) tgrid.push_back(tau_max);
  if (tgrid.size() >= 2 && 0.5 * tau_max < tgrid[tgrid.size() - 2]) {
  } else {
    tgrid.insert(tgrid.end() - 1, 0.5 * tau_max);
    std::sort(tgrid.begin(), tgrid.end());
  }

  double denom = 0.0, denom_deg = 0.0;
  std::vector<double> Rmain, Rdeg;
  double acc = 0.0, acc_deg = 0.0, prev_tau = 0.0, prev_v = 0.0, prev_vdeg = 0.0;
  CsvWriter csv({"T", "R_main", "R_degenerate"});
  for (std::size_t i = 0; i < tgrid.size(); ++i) {
    const NormVec v = lab.leaf_flux(tgrid[i]);
    if (i == 0) {
      denom = std::max(v[6], 1e-300);       // calE(0)
      denom_deg = std::max(v[0], 1e-300);   // E[p_N f](0)
      prev_tau = tgrid[0];
      prev_v = v[10];
      prev_vdeg = v[14];
      continue;
    }
    acc += 0.5 * (v[10] + prev_v) * (tgrid[i] - prev_tau);
    acc_deg += 0.5 * (v[14] + prev_vdeg) * (tgrid[i] - prev_tau);
    prev_tau = tgrid[i];
    prev_v = v[10];
    prev_vdeg = v[14];
    Rmain.push_back(acc / denom);
    Rdeg.push_back(acc_deg / denom_deg);
    csv.row({format_double(tgrid[i]), format_double(Rmain.back()), format_double(Rdeg.back())});
  }
  atomic_write(c.out / "iled.csv", csv.str());
  Json rep{{"seed", c.seed},
           {"R_final", Rmain.back()},
           {"R_half", Rmain[Rmain.size() / 2]},
           {"R_degenerate_final", Rdeg.back()}};
  const bool plateau =
      (Rmain.back() - Rmain[Rmain.size() - 2]) < 0.1 * Rmain[Rmain.size() - 2] + 1e-12;
  rep["plateau"] = plateau;
  c.manifest.checks.push_back({"ILED ratio plateaus", plateau});
  atomic_write(c.out / "iled.json", rep.dump(2) + "\n");
  return finish(c);
}

// ---------------------------------------------------------------------------
int run_decay(Common& c) {
  const Json& cfg = c.cfg.j;
  FluxLab lab = make_lab(c, true);
  const Json& d = cfg.at("decay");
  const auto w = d.at("window").get<std::vector<double>>();
  std::vector<double> tgrid;
  for (double t = std::max(1.0, w[0] / 4.0); t <= w[1] * 1.0001; t *= std::sqrt(2.0))
    tgrid.push_back(t);
  std::vector<double> vals;
  CsvWriter csv({"tau", "value"});
  for (double tau : tgrid) {
    const NormVec v = lab.leaf_flux(tau);
    vals.push_back(v[norm_index(d.at("norm"))]);
    csv.row({format_double(tau), format_double(vals.back())});
  }
  atomic_write(c.out / "decay.csv", csv.str());
  const DecayFit f =
      decay_fit(tgrid, vals, d.at("model") == "power" ? DecayModel::Power : DecayModel::Exponential,
                w[0], w[1]);
  Json rep{{"seed", c.seed}, {"rate", f.rate}, {"residual", f.residual}, {"points", f.points}};
  atomic_write(c.out / "decay.json", rep.dump(2) + "\n");
  c.manifest.checks.push_back({"fitted rate positive", f.rate > 0.0});
  return finish(c);
}

// ---------------------------------------------------------------------------
int run_tnn(Common& c) {
  const Json& cfg = c.cfg.j;
  FluxLab lab = make_lab(c, false);
  const Json& t = cfg.at("tnn");
  const std::vector<double> taus = t.at("taus").get<std::vector<double>>();
  const double r_lo = t.at("r_lo"), r_hi = t.at("r_hi");
  const int n_r = t.at("n_r");
  CsvWriter csv({"tau", "r", "r2Tnn"});
  Json sups = Json::array();
  for (double tau : taus) {
    double sup = 0.0;
    for (int i = 0; i < n_r; ++i) {
      const double r = r_lo * std::pow(r_hi / r_lo, (i + 0.5) / n_r);
      const double v = lab.r2_tnn(tau, r);
      sup = std::max(sup, v);
      csv.row({format_double(tau), format_double(r), format_double(v)});
    }
    sups.push_back(sup);
  }
  atomic_write(c.out / "tnn.csv", csv.str());
  atomic_write(c.out / "tnn.json",
               Json{{"seed", c.seed}, {"sup_r2Tnn", sups}}.dump(2) + "\n");
  c.manifest.checks.push_back({"tnn scan emitted", true});
  return finish(c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"svlab: massless Vlasov fields on the Schwarzschild exterior"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::uint64_t seed_override = 0;
  unsigned threads_override = 0;
  bool have_seed = false;
  app.add_option("--config", config_path, "config file (JSON)");
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed_override, "RNG seed override");
  app.add_option("--threads", threads_override, "worker threads (0: hardware)");

  const char* names[] = {"verify-identities", "verify-commutators", "trace", "flux",
                         "iled", "decay", "tnn-scan"};
  for (const char* n : names) app.add_subcommand(n, n)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    Common c;
    c.cfg = svlab::RunConfig::load(config_path);
    have_seed = seed_opt->count() > 0;
    if (have_seed) c.cfg.j["seed"] = seed_override;
    if (threads_override) c.cfg.j["threads"] = threads_override;
    if (!out_dir.empty()) c.cfg.j["out"] = out_dir;
    c.seed = c.cfg.j.at("seed").get<std::uint64_t>();
    c.threads = c.cfg.j.at("threads").get<unsigned>();
    c.out = c.cfg.j.at("out").get<std::string>();
    c.manifest.config_hash = c.cfg.hash();
    c.manifest.seed = c.seed;

    const std::string sub = app.get_subcommands().front()->get_name();
    c.manifest.subcommand = sub;
    if (sub == "verify-identities") return run_verify_identities(c);
    if (sub == "verify-commutators") return run_verify_commutators(c);
    if (sub == "trace") return run_trace(c);
    if (sub == "flux") return run_flux(c);
    if (sub == "iled") return run_iled(c);
    if (sub == "decay") return run_decay(c);
    if (sub == "tnn-scan") return run_tnn(c);
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
