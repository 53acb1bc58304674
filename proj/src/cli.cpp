#include "kten/cli.hpp"

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "kten/cancellation.hpp"
#include "kten/density.hpp"
#include "kten/error.hpp"
#include "kten/geometry.hpp"
#include "kten/kernels.hpp"
#include "kten/parallel.hpp"
#include "kten/rng.hpp"
#include "kten/simulator.hpp"
#include "kten/spreading.hpp"
#include "kten/stats.hpp"
#include "kten/tails.hpp"

namespace kten {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kInputPrefix = "@input:";

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

// JSON has no inf or nan; they are written as null
json jnum(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(bool(in), Errc::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json fit_json(const LinearFit& f, const char* target_key, double target) {
  json j;
  j["slope"] = jnum(f.slope);
  j["ci95"] = jnum(f.slope_ci95);
  j["r2"] = jnum(f.r2);
  j["points"] = f.n;
  j[target_key] = target;
  return j;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  require(lo > 0.0 && hi > lo && n >= 2, Errc::InvalidParameter, "bad radius grid");
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
  return g;
}

// One subcommand invocation: output directory, replayable arguments and the files written.
struct Run {
  fs::path out;
  std::uint64_t seed = kDefaultSeed;
  std::vector<std::string> args;
  json inputs = json::object();
  json config = json::object();
  std::vector<std::string> files;

  void write(const std::string& name, const std::string& content) {
    const fs::path p = out / name;
    fs::create_directories(p.parent_path());
    std::ofstream o(p, std::ios::binary);
    require(bool(o), Errc::IoError, "cannot write " + p.string());
    o << content;
    require(bool(o), Errc::IoError, "short write to " + p.string());
    record(name);
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
  void record(const std::string& name) {
    if (std::find(files.begin(), files.end(), name) == files.end()) files.push_back(name);
  }
};

// ---- simulate -------------------------------------------------------------

struct SimulateOpts {
  std::string config;
};

std::string config_text(const SimConfig& cfg) {
  std::string t;
  for (const auto& [k, v] : sim_config_entries(cfg))
    if (k != "output_dir") t += k + " = " + v + "\n";
  return t;
}

void run_simulate(Run& run, const SimulateOpts& o, bool seed_given, bool outdir_given) {
  SimConfig cfg = parse_sim_config(read_file(o.config));
  if (seed_given) cfg.seed = run.seed;
  run.seed = cfg.seed;
  if (!outdir_given) run.out = cfg.output_dir;
  fs::create_directories(run.out);

  const std::string text = config_text(cfg);
  run.write("config.txt", text);
  run.inputs["config.txt"] = text;
  run.args = {"simulate", "--config", std::string(kInputPrefix) + "config.txt"};
  for (const auto& [k, v] : sim_config_entries(cfg))
    if (k != "output_dir") run.config[k] = v;

  Simulator sim(cfg);
  Ensemble ens = initialize(cfg);
  const TruncationInfo tr = sim.truncation();
  if (!cfg.cutoff)
    spdlog::info("angular truncation at theta_min = {}: kept rate {}, momentum transfer kept {} "
                 "and discarded {}",
                 tr.theta_min, tr.kept_rate, tr.kept_transfer, tr.discarded_transfer);

  const std::size_t S = ens.species.size();
  std::ostringstream mcsv, scsv, tcsv;
  mcsv << "t";
  for (std::size_t i = 0; i < S; ++i) mcsv << ",mass_" << i;
  const char* axes[] = {"px", "py", "pz"};
  for (int a = 0; a < cfg.d; ++a) mcsv << "," << axes[a];
  mcsv << ",energy,entropy,collisions,predicted_loss\n";
  scsv << "step,t,species,mass,weight,count,file\n";
  tcsv << "step,t,species,sigma,window_lo,window_hi,p_hat,b_hat,a_hat,r2,bins,status\n";

  std::uint64_t collisions = 0, candidates = 0, reruns = 0, clipped = 0;
  std::uint64_t last_snapshot = UINT64_MAX;
  auto snapshot = [&](const Ensemble& e) {
    last_snapshot = e.step_index;
    for (std::size_t i = 0; i < S; ++i) {
      const Species& sp = e.species[i];
      char name[64];
      std::snprintf(name, sizeof name, "snapshots/step_%06llu_s%zu.bin",
                    static_cast<unsigned long long>(e.step_index), i);
      fs::create_directories(run.out / "snapshots");
      write_snapshot((run.out / name).string(), sp.v, e.d);
      run.record(name);
      scsv << e.step_index << "," << num(e.time) << "," << i << "," << num(sp.mass) << ","
           << num(sp.weight) << "," << sp.v.size() << "," << name << "\n";
      const double mass = sp.mass * sp.weight * double(sp.v.size());
      const TailHistogram h = make_tail_histogram(sp.v, mass);
      const auto w0 = default_fit_window(h);
      const auto w = resolved_window(h, w0.first, w0.second);
      tcsv << e.step_index << "," << num(e.time) << "," << i << "," << num(h.sigma) << ","
           << num(w.first) << "," << num(w.second) << ",";
      try {
        const TailFit f = fit_tail_exponent(h, w.first, w.second);
        tcsv << num(f.p_hat) << "," << num(f.b_hat) << "," << num(f.a_hat) << "," << num(f.r2)
             << "," << f.bins_used << ",ok\n";
      } catch (const Error& err) {
        if (err.code() != Errc::InsufficientData && err.code() != Errc::InvalidParameter) throw;
        tcsv << ",,,,0,insufficient_data\n";
      }
    }
  };

  sim.run(ens, [&](const Ensemble& e, const StepStats& st) {
    collisions += st.collisions;
    candidates += st.candidates;
    reruns += st.reruns;
    clipped += st.clipped;
    const Moments m = moments(e);
    mcsv << num(e.time);
    for (double x : m.mass) mcsv << "," << num(x);
    for (int a = 0; a < cfg.d; ++a) mcsv << "," << num(m.momentum[a]);
    mcsv << "," << num(m.energy) << "," << num(m.entropy) << "," << st.collisions << ","
         << num(st.predicted_loss) << "\n";
    if (cfg.snapshot_every > 0 && e.step_index % cfg.snapshot_every == 0) snapshot(e);
  });
  if (last_snapshot != ens.step_index) snapshot(ens);

  run.write("moments.csv", mcsv.str());
  run.write("snapshots.csv", scsv.str());
  run.write("tails.csv", tcsv.str());

  json s;
  s["angular_rate"] = sim.angular_rate();
  s["mean_normal_fraction"] = sim.mean_normal_fraction();
  json t;
  t["theta_min"] = tr.theta_min;
  t["kept_rate"] = tr.kept_rate;
  t["kept_momentum_transfer"] = tr.kept_transfer;
  t["discarded_momentum_transfer"] = tr.discarded_transfer;
  s["truncation"] = t;
  s["steps"] = cfg.steps;
  s["final_time"] = ens.time;
  s["candidates"] = candidates;
  s["collisions"] = collisions;
  s["majorant_reruns"] = reruns;
  s["clipped_pairs"] = clipped;
  const Moments m = moments(ens);
  s["final_energy"] = m.energy;
  s["final_entropy"] = m.entropy;
  run.write_json("summary.json", s);
}

// ---- kernel-scaling -------------------------------------------------------

struct KernelScalingOpts {
  std::string model = "inelastic";
  double beta = 0.8, m_i = 1.0, m_j = 2.0, gamma = -1.0, s = 0.5;
  int d = 3;
  double small_min = 1e-3, large_min = 2.0, large_max = 100.0;
  int n_small = 13, n_large = 9;
};

void run_kernel_scaling(Run& run, const KernelScalingOpts& o) {
  require(o.model == "inelastic" || o.model == "mixture", Errc::InvalidParameter,
          "model must be inelastic or mixture");
  KernelSpec k;
  k.d = o.d;
  k.gamma = o.gamma;
  k.s = o.s;
  k.model = o.model == "inelastic" ? Model::Inelastic : Model::Mixture;
  k.validate();
  const CarlemanSetup setup = o.model == "inelastic"
                                  ? CarlemanSetup::inelastic(RestitutionParams::from_beta(o.beta))
                                  : CarlemanSetup::mixture(MassPair(o.m_i, o.m_j));
  require(o.small_min < 1.0 && o.large_min > 1.0, Errc::InvalidParameter,
          "small radii must lie below 1 and large radii above 1");
  std::vector<double> r = log_grid(o.small_min, 1.0, o.n_small);
  const std::vector<double> big = log_grid(o.large_min, o.large_max, o.n_large);
  r.insert(r.end(), big.begin(), big.end());

  run.config = {{"model", o.model}, {"d", o.d},           {"gamma", o.gamma},
                {"s", o.s},         {"r_small_min", o.small_min},
                {"n_small", o.n_small}, {"r_large_min", o.large_min},
                {"r_large_max", o.large_max}, {"n_large", o.n_large}};
  if (o.model == "inelastic")
    run.config["beta"] = o.beta;
  else
    run.config["masses"] = {o.m_i, o.m_j};

  const GaussianDensity f(o.d);
  const ScalingReport rep = verify_Kf_scaling(f, k, setup, Vec(o.d), r);
  std::ostringstream csv;
  csv << "r,inner_second_moment,outer_mass\n";
  for (std::size_t i = 0; i < rep.r.size(); ++i)
    csv << num(rep.r[i]) << "," << num(rep.inner[i]) << "," << num(rep.outer[i]) << "\n";
  run.write("kernel_scaling.csv", csv.str());
  json j;
  j["density"] = "unit Gaussian centred at 0, evaluation point 0";
  j["inner_small_r"] = fit_json(rep.small_inner, "expected", 2 - 2 * o.s);
  j["outer_small_r"] = fit_json(rep.small_outer, "expected", -2 * o.s);
  j["outer_large_r"] = fit_json(rep.large_outer, "expected", o.gamma);
  j["inner_large_r"] = fit_json(rep.large_inner, "upper_bound", o.gamma + 3);
  run.write_json("kernel_scaling.json", j);
}

// ---- cancellation ---------------------------------------------------------

struct CancellationOpts {
  std::string family = "inelastic";
  double beta = 0.8, m_i = 1.0, m_j = 2.0, gamma = -1.0, s = 0.5;
  int d = 3;
  std::vector<double> speeds{0.25, 0.5, 1.0, 2.0, 4.0};
};

void run_cancellation(Run& run, const CancellationOpts& o) {
  require(o.family == "inelastic" || o.family == "mixture" || o.family == "elastic",
          Errc::InvalidParameter, "family must be inelastic, mixture or elastic");
  for (double r : o.speeds) require(r > 0.0, Errc::InvalidParameter, "speeds must be positive");
  KernelSpec k;
  k.d = o.d;
  k.gamma = o.gamma;
  k.s = o.s;
  k.model = o.family == "inelastic" ? Model::Inelastic : Model::Mixture;
  k.validate();
  SFunctionSpec spec = o.family == "inelastic"
                           ? SFunctionSpec::inelastic(k, RestitutionParams::from_beta(o.beta))
                       : o.family == "mixture" ? SFunctionSpec::mixture(k, MassPair(o.m_i, o.m_j))
                                               : SFunctionSpec::elastic(k);
  run.config = {{"family", o.family}, {"d", o.d}, {"gamma", o.gamma}, {"s", o.s}, {"speeds", o.speeds}};
  if (o.family == "inelastic") run.config["beta"] = o.beta;
  if (o.family == "mixture") run.config["masses"] = {o.m_i, o.m_j};

  const SFunction S(spec);
  const SFunction E(SFunctionSpec::elastic(k));
  json j;
  j["family"] = family_name(S.spec().family);
  j["lambda"] = S.spec().lambda;
  j["S1"] = S.S1();
  j["S1_elastic"] = E.S1();
  j["ratio_to_elastic"] = S.S1() / E.S1();
  json tab = json::array();
  for (double r : o.speeds) tab.push_back({{"speed", r}, {"S", S(r)}});
  j["S"] = tab;
  run.write_json("cancellation.json", j);
}

// ---- spreading ------------------------------------------------------------

struct SpreadingOpts {
  std::string model = "inelastic";
  SpreadingConfig cfg;
};

void run_spreading(Run& run, SpreadingOpts o) {
  require(o.model == "inelastic" || o.model == "mixture", Errc::InvalidParameter,
          "model must be inelastic or mixture");
  o.cfg.model = o.model == "inelastic" ? SpreadModel::Inelastic : SpreadModel::Mixture;
  o.cfg.validate();
  const SpreadingConfig& c = o.cfg;
  run.config = {{"model", o.model}, {"d", c.d},   {"gamma", c.gamma}, {"s", c.s},
                {"t0", c.T0},       {"l0", c.l0}, {"K", c.K},         {"n_max", c.n_max}};
  if (o.model == "inelastic")
    run.config["beta"] = c.beta;
  else
    run.config["masses"] = {c.m_i, c.m_j};

  const SpreadingResult res = run_iteration(c);
  std::ostringstream csv;
  csv << "n,T,R,eps,log_l,envelope_log\n";
  json trace = json::array();
  bool dominated = true;
  for (const SpreadingState& st : res.trace) {
    const double env_log = std::log(res.envelope.a) - res.envelope.b * std::pow(st.R, res.envelope.p);
    dominated = dominated && st.log_l >= env_log;
    csv << st.n << "," << num(st.T) << "," << num(st.R) << "," << num(st.eps) << ","
        << num(st.log_l) << "," << num(env_log) << "\n";
    trace.push_back({{"n", st.n}, {"T", st.T}, {"R", st.R}, {"eps", st.eps},
                     {"log_l", st.log_l}, {"l", st.l()}});
  }
  run.write("spreading.csv", csv.str());
  json j;
  j["rho"] = c.rho();
  j["q"] = c.q();
  j["eps_limit"] = c.eps_limit();
  j["envelope"] = {{"a", res.envelope.a}, {"b", res.envelope.b}, {"p", res.envelope.p}};
  j["b_fit"] = res.b_fit;
  j["C_proof"] = res.C_proof;
  j["R_final_over_rho_n"] = res.trace.back().R / std::pow(c.rho(), c.n_max);
  j["envelope_below_trace"] = dominated;
  j["trace"] = trace;
  run.write_json("spreading.json", j);
}

// ---- region ---------------------------------------------------------------

struct RegionOpts {
  std::vector<double> R{1.0};
  std::vector<double> eps{0.01, 0.02, 0.04, 0.08, 0.12, 0.16, 0.2};
  double beta = 0.8;
  int d = 3;
  std::uint64_t samples = 1000000;
};

void run_region(Run& run, const RegionOpts& o) {
  require(o.beta > 0.5 && o.beta < 1.0, Errc::InvalidParameter, "beta must lie in (1/2, 1)");
  const double rho = std::sqrt(1.0 + o.beta * o.beta);
  for (double e : o.eps)
    require(e > 0.0 && e < 1.0 - 1.0 / rho, Errc::EpsOutOfRange,
            "eps = " + num(e) + " outside (0, " + num(1.0 - 1.0 / rho) + ")");
  for (double R : o.R) require(R > 0.0, Errc::InvalidParameter, "R must be positive");
  require(o.d == 2 || o.d == 3, Errc::InvalidParameter, "d must be 2 or 3");
  run.config = {{"R", o.R}, {"eps", o.eps}, {"beta", o.beta}, {"d", o.d}, {"samples", o.samples}};

  std::ostringstream csv;
  csv << "R,eps,estimate,stderr,degenerate\n";
  json rows = json::array();
  std::vector<std::vector<double>> est(o.R.size());
  for (std::size_t a = 0; a < o.R.size(); ++a)
    for (double e : o.eps) {
      const RegionEstimate r = region_estimate_mc(o.R[a], e, o.beta, o.d, o.samples, run.seed);
      est[a].push_back(r.estimate);
      csv << num(o.R[a]) << "," << num(e) << "," << num(r.estimate) << "," << num(r.stderr_)
          << "," << (r.degenerate ? 1 : 0) << "\n";
      rows.push_back({{"R", o.R[a]}, {"eps", e}, {"estimate", r.estimate},
                      {"stderr", r.stderr_}, {"degenerate", r.degenerate}});
    }
  run.write("region.csv", csv.str());
  json j;
  j["rows"] = rows;
  json ef = json::array(), rf = json::array();
  if (o.eps.size() >= 2)
    for (std::size_t a = 0; a < o.R.size(); ++a)
      ef.push_back({{"R", o.R[a]}, {"fit", fit_json(loglog_fit(o.eps, est[a]), "lower_bound_exponent", o.d)}});
  if (o.R.size() >= 2)
    for (std::size_t e = 0; e < o.eps.size(); ++e) {
      std::vector<double> y;
      for (std::size_t a = 0; a < o.R.size(); ++a) y.push_back(est[a][e]);
      rf.push_back({{"eps", o.eps[e]}, {"fit", fit_json(loglog_fit(o.R, y), "expected", 2 * o.d - 1)}});
    }
  j["eps_exponent"] = ef;
  j["R_exponent"] = rf;
  run.write_json("region.json", j);
}

// ---- tails ----------------------------------------------------------------

struct TailsOpts {
  std::string snapshots;
  std::string envelope;
  double t0 = 0.0;
  double confidence = 0.99;
  int bins = 200;
};

json ranges_json(const TailHistogram& h, const std::vector<std::size_t>& idx) {
  json out = json::array();
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && idx[j + 1] == idx[j] + 1) ++j;
    out.push_back({h.edges[idx[i]], h.edges[idx[j] + 1]});
    i = j + 1;
  }
  return out;
}

void run_tails(Run& run, const TailsOpts& o) {
  const fs::path dir = fs::absolute(o.snapshots).lexically_normal();
  const fs::path envp = fs::absolute(o.envelope).lexically_normal();
  require(o.confidence > 0.0 && o.confidence < 1.0, Errc::InvalidParameter,
          "confidence must lie in (0, 1)");
  require(o.bins >= 8, Errc::InvalidParameter, "need at least 8 bins");
  json ej;
  try {
    ej = json::parse(read_file(envp));
  } catch (const json::exception& e) {
    fail(Errc::InvalidParameter, "envelope file: " + std::string(e.what()));
  }
  const json& ev = ej.contains("envelope") ? ej["envelope"] : ej;
  require(ev.contains("a") && ev.contains("b") && ev.contains("p"), Errc::InvalidParameter,
          "envelope needs a, b and p");
  const Envelope env{ev["a"].get<double>(), ev["b"].get<double>(), ev["p"].get<double>()};
  require(env.a >= 0.0 && env.b > 0.0 && env.p > 0.0, Errc::InvalidParameter,
          "envelope needs a >= 0, b > 0, p > 0");
  run.args = {"tails", "--snapshots", dir.string(), "--envelope", envp.string(),
              "--t0", num(o.t0), "--confidence", num(o.confidence), "--bins", std::to_string(o.bins)};
  run.config = {{"snapshots", dir.string()}, {"envelope", {{"a", env.a}, {"b", env.b}, {"p", env.p}}},
                {"t0", o.t0}, {"confidence", o.confidence}, {"bins", o.bins}};

  // snapshots.csv: step,t,species,mass,weight,count,file
  std::istringstream index(read_file(dir / "snapshots.csv"));
  std::string line;
  std::getline(index, line);
  std::map<std::size_t, std::vector<TimedHistogram>> by_species;
  std::map<std::size_t, std::vector<std::uint64_t>> steps;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    require(f.size() == 7, Errc::IoError, "malformed snapshots.csv line: " + line);
    const double t = std::stod(f[1]);
    const std::size_t sp = std::stoul(f[2]);
    const double mass = std::stod(f[3]) * std::stod(f[4]) * std::stod(f[5]);
    const std::vector<Vec> v = read_snapshot((dir / f[6]).string());
    by_species[sp].push_back({t, make_tail_histogram(v, mass, o.bins)});
    steps[sp].push_back(std::stoull(f[0]));
  }
  require(!by_species.empty(), Errc::EmptySeries, "no snapshots listed in " + dir.string());

  json j;
  j["note"] = "domination is tested only on the resolved speed range of each histogram";
  j["envelope"] = {{"a", env.a}, {"b", env.b}, {"p", env.p}};
  j["t0"] = o.t0;
  bool uniform = true;
  std::optional<double> earliest;
  json species = json::array();
  for (const auto& [sp, series] : by_species) {
    const UniformityReport u = uniformity_scan(series, env, o.t0);
    uniform = uniform && u.uniform;
    if (u.earliest_failure && (!earliest || *u.earliest_failure < *earliest))
      earliest = u.earliest_failure;
    json times = json::array();
    std::size_t r = 0;
    for (std::size_t k = 0; k < series.size(); ++k) {
      if (!(series[k].t > o.t0)) continue;
      const TailHistogram& h = series[k].hist;
      const DominationReport& rep = u.reports[r++];
      json row;
      row["step"] = steps[sp][k];
      row["t"] = series[k].t;
      const auto w0 = default_fit_window(h);
      const auto w = resolved_window(h, w0.first, w0.second);
      try {
        const TailFit f = fit_tail_exponent(h, w.first, w.second);
        row["fit"] = {{"p_hat", f.p_hat}, {"b_hat", f.b_hat}, {"a_hat", f.a_hat}, {"r2", f.r2},
                      {"window", {w.first, w.second}}, {"bins", f.bins_used}};
      } catch (const Error& e) {
        if (e.code() != Errc::InsufficientData && e.code() != Errc::InvalidParameter) throw;
        row["fit"] = nullptr;
      }
      row["resolved_range"] = {rep.resolved_lo, rep.resolved_hi};
      json viol = json::array();
      for (std::size_t b : rep.violations)
        viol.push_back({{"r", rep.bins[b].r}, {"density", rep.bins[b].density},
                        {"upper", rep.bins[b].upper}, {"envelope", rep.bins[b].envelope}});
      row["violations"] = viol;
      row["unresolved_ranges"] = ranges_json(h, rep.unresolved);
      times.push_back(row);
    }
    species.push_back({{"species", sp}, {"uniform", u.uniform},
                       {"earliest_failure", u.earliest_failure ? json(*u.earliest_failure) : json(nullptr)},
                       {"times", times}});
  }
  j["uniform"] = uniform;
  j["earliest_failure"] = earliest ? json(*earliest) : json(nullptr);
  j["species"] = species;
  run.write_json("tails_report.json", j);
}

// ---- verify-geometry ------------------------------------------------------

struct GeometryOpts {
  std::uint64_t collisions = 1000000;
  int d = 3;
  double alpha = 0.5;
  std::vector<double> masses{1.0, 2.0};
};

struct GeomAcc {
  double inel_momentum = 0, inel_restitution = 0, inel_energy = 0, sigma_momentum = 0;
  double mix_momentum = 0, mix_energy = 0;
  std::uint64_t speed_increase = 0;
  void merge(const GeomAcc& o) {
    inel_momentum = std::max(inel_momentum, o.inel_momentum);
    inel_restitution = std::max(inel_restitution, o.inel_restitution);
    inel_energy = std::max(inel_energy, o.inel_energy);
    sigma_momentum = std::max(sigma_momentum, o.sigma_momentum);
    mix_momentum = std::max(mix_momentum, o.mix_momentum);
    mix_energy = std::max(mix_energy, o.mix_energy);
    speed_increase += o.speed_increase;
  }
};

void run_verify_geometry(Run& run, const GeometryOpts& o) {
  require(o.d == 2 || o.d == 3, Errc::InvalidParameter, "d must be 2 or 3");
  require(o.collisions >= 1, Errc::InvalidParameter, "need at least one collision");
  require(o.masses.size() == 2 && o.masses[0] > 0 && o.masses[1] > 0, Errc::InvalidParameter,
          "masses takes two positive values");
  const RestitutionParams rp = RestitutionParams::from_alpha(o.alpha);
  const MassPair mp(o.masses[0], o.masses[1]);
  run.config = {{"collisions", o.collisions}, {"d", o.d}, {"alpha", o.alpha}, {"masses", o.masses}};

  constexpr std::uint64_t kChunk = 1 << 14;
  const std::uint64_t nchunks = (o.collisions + kChunk - 1) / kChunk;
  std::vector<GeomAcc> part(nchunks);
  const int d = o.d;
  parallel_chunks(nchunks, [&](std::size_t c) {
    CounterRng g(run.seed, streams::kGeometry, c, 0);
    GeomAcc acc;
    auto gauss = [&](double sd) {
      Vec x(d);
      for (int k = 0; k < d; ++k) x[k] = sd * g.normal();
      return x;
    };
    const std::uint64_t end = std::min<std::uint64_t>(o.collisions, (c + 1) * kChunk);
    for (std::uint64_t i = c * kChunk; i < end; ++i) {
      const double scale = std::exp(2.0 * g.normal());
      const Vec v = gauss(scale), w = gauss(scale);
      const Vec gv = v - w;
      Vec n = normalized(gauss(1.0));
      if (dot(gv, n) < 0.0) n = -n;
      const Vec sigma = normalized(gauss(1.0));
      const double mom = norm(v) + norm(w);
      const double en = norm2(v) + norm2(w);

      const PostCollision a = inelastic_post_n(v, w, n, rp);
      const Vec ga = a.v_prime - a.v_star_prime;
      acc.inel_momentum = std::max(acc.inel_momentum, norm(a.v_prime + a.v_star_prime - v - w) / mom);
      acc.inel_restitution = std::max(acc.inel_restitution,
                                      std::abs(dot(ga, n) + o.alpha * dot(gv, n)) / norm(gv));
      const double gn = dot(gv, n);
      const double loss = en - norm2(a.v_prime) - norm2(a.v_star_prime);
      acc.inel_energy = std::max(acc.inel_energy,
                                 std::abs(loss - 0.5 * (1 - o.alpha * o.alpha) * gn * gn) / en);
      if (norm(ga) > norm(gv) * (1 + 1e-14)) ++acc.speed_increase;

      const PostCollision b = inelastic_post_sigma(v, w, sigma, rp);
      acc.sigma_momentum = std::max(acc.sigma_momentum, norm(b.v_prime + b.v_star_prime - v - w) / mom);
      if (norm(b.v_prime - b.v_star_prime) > norm(gv) * (1 + 1e-14)) ++acc.speed_increase;

      for (int form = 0; form < 2; ++form) {
        const PostCollision m = form == 0 ? mixture_post_sigma(v, w, sigma, mp)
                                          : mixture_post_n(v, w, n, mp);
        const double P = mp.m_i * norm(v) + mp.m_j * norm(w);
        const double E = mp.m_i * norm2(v) + mp.m_j * norm2(w);
        acc.mix_momentum = std::max(
            acc.mix_momentum,
            norm(mp.m_i * m.v_prime + mp.m_j * m.v_star_prime - mp.m_i * v - mp.m_j * w) / P);
        acc.mix_energy = std::max(
            acc.mix_energy,
            std::abs(mp.m_i * norm2(m.v_prime) + mp.m_j * norm2(m.v_star_prime) - E) / E);
      }
    }
    part[c] = acc;
  });
  GeomAcc tot;
  for (const GeomAcc& a : part) tot.merge(a);
  json j;
  j["collisions"] = o.collisions;
  j["inelastic_momentum_residual"] = tot.inel_momentum;
  j["inelastic_sigma_momentum_residual"] = tot.sigma_momentum;
  j["restitution_identity_residual"] = tot.inel_restitution;
  j["inelastic_energy_loss_residual"] = tot.inel_energy;
  j["relative_speed_increases"] = tot.speed_increase;
  j["mixture_momentum_residual"] = tot.mix_momentum;
  j["mixture_energy_residual"] = tot.mix_energy;
  run.write_json("geometry.json", j);
}

// ---- manifest and replay --------------------------------------------------

void write_manifest(const Run& run, const std::string& sub, const std::string& started) {
  json m;
  m["subcommand"] = sub;
  m["tool_version"] = kToolVersion;
  m["args"] = run.args;
  if (!run.inputs.empty()) m["inputs"] = run.inputs;
  m["config"] = run.config;
  m["seed"] = run.seed;
  m["threads"] = thread_count();
  m["started"] = started;
  m["finished"] = utc_now();
  json outs = json::array();
  for (const std::string& f : run.files)
    outs.push_back({{"file", f},
                    {"fnv1a64", fnv1a_file((run.out / f).string())},
                    {"bytes", fs::file_size(run.out / f)}});
  m["outputs"] = outs;
  std::ofstream o(run.out / "manifest.json", std::ios::binary);
  require(bool(o), Errc::IoError, "cannot write manifest");
  o << m.dump(2) << "\n";
}

int report_error(const Error& e) {
  std::cerr << "kten: " << e.what() << "\n";
  return is_numerical(e.code()) ? 2 : 1;
}

int replay(const std::string& manifest_path, const std::string& out_dir, int threads, bool quiet) {
  json m;
  try {
    m = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    fail(Errc::InvalidParameter, "manifest: " + std::string(e.what()));
  }
  const fs::path out = out_dir.empty() ? fs::path(manifest_path).parent_path() / "replay" : fs::path(out_dir);
  fs::create_directories(out);
  std::vector<std::string> args;
  for (const auto& a : m.at("args")) {
    std::string s = a.get<std::string>();
    if (s.rfind(kInputPrefix, 0) == 0) {
      // inputs are materialized beside the replayed outputs
      const std::string name = s.substr(std::string(kInputPrefix).size());
      const fs::path p = out / "inputs" / name;
      fs::create_directories(p.parent_path());
      std::ofstream(p, std::ios::binary) << m.at("inputs").at(name).get<std::string>();
      s = p.string();
    }
    args.push_back(s);
  }
  args.insert(args.begin(), {"--output-dir", out.string(), "--threads", std::to_string(threads),
                             "--seed", std::to_string(m.at("seed").get<std::uint64_t>())});
  if (quiet) args.insert(args.begin(), "--quiet");
  const int rc = dispatch(args);
  if (rc != 0) return rc;

  std::size_t same = 0;
  std::vector<std::string> differ;
  for (const auto& o : m.at("outputs")) {
    const std::string f = o.at("file").get<std::string>();
    const fs::path p = out / f;
    if (fs::exists(p) && fnv1a_file(p.string()) == o.at("fnv1a64").get<std::string>())
      ++same;
    else
      differ.push_back(f);
  }
  if (!differ.empty()) {
    std::cerr << "kten: replay differs in " << differ.size() << " output(s):";
    for (const auto& f : differ) std::cerr << " " << f;
    std::cerr << "\n";
    return 2;
  }
  if (!quiet)
    std::cout << "replay: " << same << " output(s) byte-identical at " << threads << " thread(s)\n";
  return 0;
}

}  // namespace

std::string fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), Errc::IoError, "cannot read " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Kinetic tail and kernel toolkit", "kten"};
  app.set_version_flag("--version", kToolVersion);
  int threads = int(std::max(1u, std::thread::hardware_concurrency()));
  std::uint64_t seed = kDefaultSeed;
  std::string out_dir = "kten_out", replay_path;
  bool quiet = false;
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  auto* out_opt = app.add_option("--output-dir", out_dir, "output directory");
  app.add_flag("--quiet", quiet, "only print errors");
  app.add_option("--replay", replay_path, "re-run the run recorded in a manifest.json");

  app.option_defaults()->always_capture_default();

  SimulateOpts sim;
  auto* c_sim = app.add_subcommand("simulate", "particle simulation from a key=value config");
  c_sim->add_option("--config", sim.config, "config file")->required();

  KernelScalingOpts ks;
  auto* c_ks = app.add_subcommand("kernel-scaling", "scaling exponents of the Carleman kernel");
  c_ks->add_option("--model", ks.model, "inelastic or mixture");
  c_ks->add_option("--beta", ks.beta, "(1 + alpha) / 2");
  c_ks->add_option("--m-i", ks.m_i, "mass of the evaluated species");
  c_ks->add_option("--m-j", ks.m_j, "mass of the partner species");
  c_ks->add_option("--d", ks.d, "dimension");
  c_ks->add_option("--gamma", ks.gamma, "speed exponent");
  c_ks->add_option("--s", ks.s, "angular singularity");
  c_ks->add_option("--r-small-min", ks.small_min, "smallest radius");
  c_ks->add_option("--n-small", ks.n_small, "radii in [r-small-min, 1]");
  c_ks->add_option("--r-large-min", ks.large_min, "smallest large radius");
  c_ks->add_option("--r-large-max", ks.large_max, "largest radius");
  c_ks->add_option("--n-large", ks.n_large, "large radii");

  CancellationOpts co;
  auto* c_co = app.add_subcommand("cancellation", "angular function of the cancellation identity");
  c_co->add_option("--family", co.family, "inelastic, mixture or elastic");
  c_co->add_option("--beta", co.beta, "(1 + alpha) / 2");
  c_co->add_option("--m-i", co.m_i, "mass of the evaluated species");
  c_co->add_option("--m-j", co.m_j, "mass of the partner species");
  c_co->add_option("--d", co.d, "dimension");
  c_co->add_option("--gamma", co.gamma, "speed exponent");
  c_co->add_option("--s", co.s, "angular singularity");
  c_co->add_option("--speeds", co.speeds, "relative speeds to tabulate")->delimiter(',');

  SpreadingOpts sp;
  auto* c_sp = app.add_subcommand("spreading", "lower-bound spreading iteration and envelope");
  c_sp->add_option("--model", sp.model, "inelastic or mixture");
  c_sp->add_option("--beta", sp.cfg.beta, "(1 + alpha) / 2");
  c_sp->add_option("--m-i", sp.cfg.m_i, "mixture mass i");
  c_sp->add_option("--m-j", sp.cfg.m_j, "mixture mass j");
  c_sp->add_option("--d", sp.cfg.d, "dimension");
  c_sp->add_option("--gamma", sp.cfg.gamma, "speed exponent");
  c_sp->add_option("--s", sp.cfg.s, "angular singularity");
  c_sp->add_option("--t0", sp.cfg.T0, "final time of the iteration");
  c_sp->add_option("--l0", sp.cfg.l0, "initial level");
  c_sp->add_option("--K", sp.cfg.K, "spreading constant");
  c_sp->add_option("--n-max", sp.cfg.n_max, "iterations");

  RegionOpts ro;
  auto* c_ro = app.add_subcommand("region", "Monte Carlo region estimate");
  c_ro->add_option("--R", ro.R, "ball radii")->delimiter(',');
  c_ro->add_option("--eps", ro.eps, "eps values")->delimiter(',');
  c_ro->add_option("--beta", ro.beta, "(1 + alpha) / 2");
  c_ro->add_option("--d", ro.d, "dimension");
  c_ro->add_option("--samples", ro.samples, "samples per estimate");

  TailsOpts to;
  auto* c_to = app.add_subcommand("tails", "tail fits and envelope domination over snapshots");
  c_to->add_option("--snapshots", to.snapshots, "simulate output directory")->required();
  c_to->add_option("--envelope", to.envelope, "JSON with a, b, p (or spreading.json)")->required();
  c_to->add_option("--t0", to.t0, "only times after t0 are checked");
  c_to->add_option("--confidence", to.confidence, "Poisson confidence level");
  c_to->add_option("--bins", to.bins, "speed bins");

  GeometryOpts go;
  auto* c_go = app.add_subcommand("verify-geometry", "conservation checks on random collisions");
  c_go->add_option("--collisions", go.collisions, "number of random collisions");
  c_go->add_option("--d", go.d, "dimension");
  c_go->add_option("--alpha", go.alpha, "restitution coefficient");
  c_go->add_option("--masses", go.masses, "two masses")->delimiter(',');

  for (CLI::App* sc : app.get_subcommands({})) sc->fallthrough();
  app.require_subcommand(0, 1);

  if (args.empty()) {
    std::cerr << app.help();
    return 1;
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << kToolVersion << "\n";
    return 0;
  } catch (const CLI::ExtrasError& e) {
    std::cerr << "kten: " << errc_name(Errc::UnknownSubcommand) << ": " << e.what() << "\n"
              << app.help();
    return 1;
  } catch (const CLI::ParseError& e) {
    std::cerr << "kten: " << e.what() << "\n" << app.help();
    return 1;
  }

  spdlog::set_level(quiet ? spdlog::level::err : spdlog::level::info);
  const int saved_threads = thread_count();
  set_thread_count(threads);
  struct Restore {
    int n;
    ~Restore() { set_thread_count(n); }
  } restore{saved_threads};

  try {
    if (!replay_path.empty()) {
      require(app.get_subcommands().empty(), Errc::InvalidParameter,
              "--replay takes no subcommand");
      return replay(replay_path, out_opt->count() ? out_dir : "", threads, quiet);
    }
    if (app.get_subcommands().empty()) {
      std::cerr << "kten: " << errc_name(Errc::UnknownSubcommand) << ": no subcommand given\n"
                << app.help();
      return 1;
    }
    CLI::App* sc = app.get_subcommands().front();
    const std::string name = sc->get_name();
    Run run;
    run.out = out_dir;
    run.seed = seed;
    // replayable arguments: the subcommand and its own options as given
    run.args.push_back(name);
    for (const CLI::Option* opt : sc->get_options()) {
      if (opt->count() == 0 || opt->get_name() == "--help") continue;
      const std::string flag = opt->get_name();
      std::string joined;
      for (const std::string& r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
      run.args.push_back(flag);
      run.args.push_back(joined);
    }
    const std::string started = utc_now();
    if (name != "simulate") fs::create_directories(run.out);
    if (name == "simulate")
      run_simulate(run, sim, seed_opt->count() > 0, out_opt->count() > 0);
    else if (name == "kernel-scaling")
      run_kernel_scaling(run, ks);
    else if (name == "cancellation")
      run_cancellation(run, co);
    else if (name == "spreading")
      run_spreading(run, sp);
    else if (name == "region")
      run_region(run, ro);
    else if (name == "tails")
      run_tails(run, to);
    else
      run_verify_geometry(run, go);
    write_manifest(run, name, started);
    if (!quiet) {
      std::cout << name << ": wrote";
      for (const std::string& f : run.files)
        if (f.rfind("snapshots/", 0) != 0) std::cout << " " << f;
      std::cout << " manifest.json to " << run.out.string() << "\n";
    }
    return 0;
  } catch (const Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    std::cerr << "kten: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace kten
