// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed here.
// Usage: acceptance [--only N[,M...]]

#include <boost/math/special_functions/gamma.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "kten/cancellation.hpp"
#include "kten/cli.hpp"
#include "kten/density.hpp"
#include "kten/kernels.hpp"
#include "kten/parallel.hpp"
#include "kten/simulator.hpp"
#include "kten/spreading.hpp"
#include "kten/stats.hpp"
#include "kten/tails.hpp"

using namespace kten;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [FAIL]");
  }
};

std::string fmt(const char* f, double x) {
  char b[64];
  std::snprintf(b, sizeof b, f, x);
  return b;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "kten_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json load(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// 1. exponent formula
void c1(Outcome& o) {
  o.check(spreading_exponent(1.0) == 2.0, "p(1) = " + fmt("%.17g", spreading_exponent(1.0)));
  const double lim = spreading_exponent(0.5 + 1e-12);
  o.check(std::abs(lim - 6.213) < 1e-3, "p(1/2+) = " + fmt("%.6f", lim));
  bool mono = true;
  double prev = INFINITY;
  for (int i = 0; i < 100; ++i) {
    const double p = spreading_exponent(0.5 + 0.5 * (i + 1) / 100.0);
    mono = mono && p < prev;
    prev = p;
  }
  o.check(mono, "strictly decreasing on 100 points");
}

// 2. conservation suite
void c2(Outcome& o) {
  const fs::path out = scratch("c2");
  const int rc = dispatch({"--quiet", "--output-dir", out.string(), "verify-geometry",
                           "--collisions", "1000000", "--alpha", "0.5", "--masses", "1,3"});
  o.check(rc == 0, "verify-geometry exit " + std::to_string(rc));
  if (rc != 0) return;
  const json g = load(out / "geometry.json");
  const double pm = std::max(g["inelastic_momentum_residual"].get<double>(),
                             g["inelastic_sigma_momentum_residual"].get<double>());
  o.check(pm < 1e-12, "inelastic momentum " + fmt("%.2e", pm));
  const double rs = g["restitution_identity_residual"].get<double>();
  o.check(rs < 1e-12, "restitution identity " + fmt("%.2e", rs));
  const auto inc = g["relative_speed_increases"].get<std::uint64_t>();
  o.check(inc == 0, "|g'| > |g| in " + std::to_string(inc) + " collisions");
  const double mm = g["mixture_momentum_residual"].get<double>();
  const double me = g["mixture_energy_residual"].get<double>();
  o.check(mm < 1e-10, "mixture momentum " + fmt("%.2e", mm));
  o.check(me < 1e-10, "mixture energy " + fmt("%.2e", me));
}

// 3. cancellation elastic limits
void c3(Outcome& o) {
  struct Case {
    int d;
    double gamma;
  };
  double worst = 0.0, smallest = INFINITY;
  for (Case c : {Case{3, -1.0}, Case{2, -0.5}}) {
    KernelSpec ki;
    ki.d = c.d;
    ki.gamma = c.gamma;
    ki.s = 0.5;
    ki.model = Model::Inelastic;
    KernelSpec km = ki;
    km.model = Model::Mixture;
    const double ei = SFunction(SFunctionSpec::elastic(ki)).S1();
    const double em = SFunction(SFunctionSpec::elastic(km)).S1();
    const double si =
        SFunction(SFunctionSpec::inelastic(ki, RestitutionParams::from_beta(1 - 1e-6))).S1();
    const double light = SFunction(SFunctionSpec::mixture(km, MassPair(1.0, 1.0 + 1e-6))).S1();
    const double heavy = SFunction(SFunctionSpec::mixture(km, MassPair(1.0 + 1e-6, 1.0))).S1();
    for (double r : {si / ei - 1, light / em - 1, heavy / em - 1}) worst = std::max(worst, std::abs(r));
    for (double s : {ei, em, si, light, heavy}) smallest = std::min(smallest, s);
    // a range of strictly inelastic and unequal-mass cases must stay positive too
    for (double beta : {0.55, 0.7, 0.8, 0.95})
      smallest = std::min(smallest,
                          SFunction(SFunctionSpec::inelastic(ki, RestitutionParams::from_beta(beta))).S1());
    for (double m : {0.1, 0.5, 2.0, 10.0})
      smallest = std::min(smallest, SFunction(SFunctionSpec::mixture(km, MassPair(m, 1.0))).S1());
  }
  o.check(worst < 1e-3, "max |S/S_elastic - 1| = " + fmt("%.2e", worst));
  o.check(smallest > 0.0, "min S1 = " + fmt("%.4g", smallest));
}

// 4. kernel scaling
void c4(Outcome& o) {
  const GaussianDensity f(3);
  KernelSpec k;
  k.d = 3;
  k.gamma = -1.0;
  k.s = 0.5;
  k.model = Model::Inelastic;
  std::vector<double> r;
  for (int i = 0; i <= 12; ++i) r.push_back(std::pow(10.0, -3.0 + 3.0 * i / 12));
  for (int i = 0; i <= 8; ++i) r.push_back(2.0 * std::pow(50.0, i / 8.0));
  // the large-r gamma law needs the Carleman plane close to the density bulk
  const ScalingReport a = verify_Kf_scaling(
      f, k, CarlemanSetup::inelastic(RestitutionParams::from_beta(0.9995)), Vec(3), r);
  o.check(std::abs(a.small_inner.slope - 1.0) <= 0.1, "inner " + fmt("%.4f", a.small_inner.slope));
  o.check(std::abs(a.small_outer.slope + 1.0) <= 0.1, "outer small r " + fmt("%.4f", a.small_outer.slope));
  o.check(std::abs(a.large_outer.slope + 1.0) <= 0.1, "outer large r " + fmt("%.4f", a.large_outer.slope));
  o.detail << " (beta = 0.9995)";
  const ScalingReport b = verify_Kf_scaling(
      f, k, CarlemanSetup::inelastic(RestitutionParams::from_beta(0.8)), Vec(3), r);
  o.detail << "; info beta = 0.8: inner " << fmt("%.4f", b.small_inner.slope) << ", outer small r "
           << fmt("%.4f", b.small_outer.slope) << ", outer large r "
           << fmt("%.2f", b.large_outer.slope);
}

// 5. region estimate
void c5(Outcome& o) {
  const std::vector<double> eps{0.01, 0.02, 0.04, 0.08, 0.12, 0.16, 0.2};
  std::vector<double> v;
  for (double e : eps) v.push_back(region_estimate_mc(1.0, e, 0.8, 3, 10000000).estimate);
  const LinearFit fe = loglog_fit(eps, v);
  o.check(std::abs(fe.slope - 3.0) <= 0.5, "eps exponent " + fmt("%.3f", fe.slope) + " (target 3)");
  const std::vector<double> R{1.0, 2.0, 4.0};
  std::vector<double> w;
  for (double x : R) w.push_back(region_estimate_mc(x, 0.1, 0.8, 3, 10000000).estimate);
  const LinearFit fr = loglog_fit(R, w);
  o.check(std::abs(fr.slope - 5.0) <= 0.5, "R exponent " + fmt("%.4f", fr.slope));
}

// 6. spreading iteration
void c6(Outcome& o) {
  const SpreadingConfig cfg;
  SpreadingResult res;
  try {
    res = run_iteration(cfg);
  } catch (const Error& e) {
    o.check(false, e.what());
    return;
  }
  o.check(res.trace.size() == 31, "30 steps, no guard violation");
  const double ratio = res.trace.back().R / std::pow(cfg.rho(), 30);
  o.check(std::abs(ratio - 0.288788) < 1e-3, "R30/rho^30 = " + fmt("%.6f", ratio));
  bool dom = true;
  for (const SpreadingState& s : res.trace)
    dom = dom && s.log_l >= std::log(res.envelope.a) - res.envelope.b * std::pow(s.R, res.envelope.p);
  o.check(dom, "l_n >= envelope(R_n) for all n (p = " + fmt("%.6f", res.envelope.p) + ")");
}

// 7. particle simulation
void c7(Outcome& o) {
  {
    SimConfig c;
    c.model = SimModel::Mixture;
    c.masses = {1.0};
    c.particles = {100000};
    c.cutoff = true;
    c.gamma = 0.0;
    c.dt = 0.1;
    c.steps = 100;
    c.init = "two_bump";
    c.seed = 101;
    Ensemble e = initialize(c);
    const double e0 = moments(e).energy;
    Simulator sim(c);
    sim.run(e, nullptr);
    const Moments m = moments(e);
    const double drift = std::abs(m.energy - e0) / e0;
    o.check(drift < 1e-8, "elastic energy drift " + fmt("%.2e", drift));
    const Vec mean = m.momentum / m.mass[0];
    std::vector<double> r;
    double s2 = 0.0;
    for (const Vec& v : e.species[0].v) {
      r.push_back(distance(v, mean));
      s2 += norm2(v - mean);
    }
    const double T = s2 / (3.0 * double(r.size()));
    const double D =
        ks_statistic(r, [T](double x) { return boost::math::gamma_p(1.5, 0.5 * x * x / T); });
    const double crit = ks_critical(r.size(), 0.01);
    o.check(D < crit, "KS D " + fmt("%.5f", D) + " vs " + fmt("%.5f", crit) + " at N = 1e5");
  }
  {
    SimConfig c;
    c.model = SimModel::Inelastic;
    c.alpha = 0.5;
    c.particles = {100000};
    c.cutoff = true;
    c.gamma = 0.0;
    c.dt = 0.05;
    c.steps = 40;
    c.seed = 202;
    Ensemble e = initialize(c);
    Simulator sim(c);
    const double mw = e.species[0].mass * e.species[0].weight;
    bool monotone = true;
    double measured = 0.0, predicted = 0.0;
    double prev = moments(e).energy;
    for (std::uint64_t k = 0; k < c.steps; ++k) {
      // mean |g|^2 over distinct pairs, taken before the step
      const std::size_t N = e.species[0].v.size();
      Vec mean(3);
      for (const Vec& v : e.species[0].v) mean += v;
      mean /= double(N);
      double var = 0.0;
      for (const Vec& v : e.species[0].v) var += norm2(v - mean);
      const double g2 = 2.0 * var / double(N - 1);
      const StepStats st = sim.step(e);
      const double now = moments(e).energy;
      monotone = monotone && now <= prev && (st.collisions == 0 || now < prev);
      measured += (prev - now) / mw;
      predicted += double(st.collisions) * 0.5 * (1 - c.alpha * c.alpha) * g2 * sim.mean_normal_fraction();
      prev = now;
    }
    o.check(monotone, "inelastic energy strictly decreasing over " + std::to_string(c.steps) + " steps");
    const double rel = measured / predicted - 1.0;
    o.check(std::abs(rel) < 0.1, "per-collision loss vs restitution law " + fmt("%+.4f", rel));
  }
}

// 8. tail fitting self-test
void c8(Outcome& o) {
  for (double p : {2.0, 4.0}) {
    const auto v = sample_stretched(3, 0.5, p, 1000000, 8);
    const TailHistogram h = make_tail_histogram(v, 1.0);
    const auto w0 = default_fit_window(h);
    const auto w = resolved_window(h, w0.first, w0.second);
    const TailFit f = fit_tail_exponent(h, w.first, w.second);
    const double tol = p == 2.0 ? 0.05 : 0.1;
    o.check(std::abs(f.p_hat - p) <= tol, "p = " + fmt("%.0f", p) + ": p_hat " + fmt("%.4f", f.p_hat));
  }
  SimConfig c;
  c.model = SimModel::Mixture;
  c.masses = {1.0};
  c.particles = {1000000};
  c.init = "gaussian";
  c.init_temperature = 1.0;
  const Ensemble e = initialize(c);
  const TailHistogram h = make_tail_histogram(e.species[0].v, 1.0);
  const double a_max = std::pow(2 * M_PI, -1.5);
  const Envelope env{0.1 * a_max, 0.5, 2.0};
  const DominationReport rep = check_envelope(h, env);
  o.check(rep.dominated(), std::to_string(rep.violations.size()) + " envelope violations on [" +
                               fmt("%.2f", rep.resolved_lo) + ", " + fmt("%.2f", rep.resolved_hi) + "]");
}

// 9. reproducibility from manifests
void c9(Outcome& o) {
  const fs::path base = scratch("c9");
  std::ofstream(base / "sim.cfg") << "model = mixture\nmasses = 1,2\nparticles = 4000,4000\n"
                                     "s_or_h = 0.5\ngamma = -0.5\ntheta_min = 0.2\ndt = 0.002\n"
                                     "steps = 5\nsnapshot_every = 5\n";
  const fs::path sim_out = base / "simulate";
  std::ofstream(base / "env.json") << R"({"a": 1e-6, "b": 1.0, "p": 2.0})";
  const std::vector<std::vector<std::string>> runs{
      {"simulate", "--config", (base / "sim.cfg").string()},
      {"kernel-scaling", "--n-small", "4", "--n-large", "4", "--beta", "0.9"},
      {"cancellation", "--family", "mixture", "--m-i", "2", "--m-j", "1"},
      {"spreading"},
      {"region", "--R", "1,2", "--eps", "0.05,0.1", "--samples", "300000"},
      {"tails", "--snapshots", sim_out.string(), "--envelope", (base / "env.json").string()},
      {"verify-geometry", "--collisions", "200000"}};
  std::size_t identical = 0;
  for (const auto& args : runs) {
    const std::string& name = args[0];
    const fs::path out = base / name;
    std::vector<std::string> a{"--quiet", "--threads", "1", "--output-dir", out.string()};
    a.insert(a.end(), args.begin(), args.end());
    int rc = dispatch(a);
    bool ok = rc == 0;
    for (const char* t : {"4", "8"}) {
      if (!ok) break;
      rc = dispatch({"--quiet", "--replay", (out / "manifest.json").string(), "--threads", t,
                     "--output-dir", (base / (name + "_replay" + t)).string()});
      ok = rc == 0;
    }
    if (ok)
      ++identical;
    else
      o.check(false, name + " not reproduced");
  }
  o.check(identical == runs.size(),
          std::to_string(identical) + "/" + std::to_string(runs.size()) +
              " subcommands byte-identical at 1, 4, 8 threads");
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no runtime limit
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string t;
      while (std::getline(ss, t, ',')) only.insert(std::stoi(t));
    } else {
      std::cerr << "usage: acceptance [--only N[,M...]]\n";
      return 2;
    }
  }
  set_thread_count(int(std::max(1u, std::thread::hardware_concurrency())));

  const std::vector<Criterion> all{
      {1, "exponent formula", 1, c1},          {2, "conservation suite", 10, c2},
      {3, "cancellation elastic limits", 30, c3}, {4, "kernel scaling", 300, c4},
      {5, "region estimate", 600, c5},        {6, "spreading iteration", 1, c6},
      {7, "particle simulation", 300, c7},    {8, "tail fitting", 120, c8},
      {9, "reproducibility", 0, c9}};

  bool all_pass = true;
  for (const Criterion& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0) o.check(secs < c.budget_s, "runtime " + fmt("%.1f s", secs) + " < " + fmt("%.0f s", c.budget_s));
    else o.detail << "; runtime " << fmt("%.1f s", secs);
    std::printf("criterion %d %s: %s | %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL",
                o.detail.str().c_str());
    std::fflush(stdout);
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
