#include "kten/simulator.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "kten/error.hpp"
#include "kten/parallel.hpp"
#include "kten/quadrature.hpp"
#include "kten/rng.hpp"

namespace kten {

namespace {

constexpr double kPi = std::numbers::pi;
// largest inflation of a sampled soft-potential majorant
constexpr double kInflationCap = 8.0;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  double x = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  require(r.ec == std::errc() && r.ptr == s.data() + s.size() && std::isfinite(x),
          Errc::InvalidParameter, key + ": not a number: '" + s + "'");
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& s) {
  std::uint64_t x = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  require(r.ec == std::errc() && r.ptr == s.data() + s.size(), Errc::InvalidParameter,
          key + ": not a nonnegative integer: '" + s + "'");
  return x;
}

std::string fmt_double(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>)
      out += fmt_double(xs[i]);
    else
      out += std::to_string(xs[i]);
  }
  return out;
}

double sin_pow(double th, int d) { return d == 3 ? std::sin(th) : 1.0; }

}  // namespace

void Ensemble::validate() const {
  require(d == 2 || d == 3, Errc::InvalidParameter, "dimension must be 2 or 3");
  require(!species.empty(), Errc::InvalidParameter, "ensemble has no species");
  for (std::size_t i = 0; i < species.size(); ++i) {
    const Species& s = species[i];
    require(!s.v.empty(), Errc::InvalidParameter, "species " + std::to_string(i) + " is empty");
    require(s.mass > 0.0, Errc::InvalidParameter, "masses must be positive");
    require(s.weight > 0.0 && s.weight == species[0].weight, Errc::InvalidParameter,
            "particle weights must be positive and equal across species");
    if (i > 0)
      require(s.mass > species[i - 1].mass, Errc::InvalidParameter,
              "species masses must be strictly increasing");
    for (const Vec& v : s.v)
      require(v.dim() == d && v.finite(), Errc::InvalidParameter, "bad particle velocity");
  }
}

std::size_t Ensemble::total_particles() const {
  std::size_t n = 0;
  for (const Species& s : species) n += s.v.size();
  return n;
}

void SimConfig::validate() const {
  require(d == 2 || d == 3, Errc::InvalidParameter, "d must be 2 or 3");
  if (cutoff) {
    require(gamma >= 0.0 && gamma <= 1.0, Errc::InvalidParameter,
            "cutoff kernels need gamma in [0, 1]");
    require(h_const > 0.0, Errc::InvalidParameter, "h must be positive");
  } else {
    require(s > 0.0 && s < 1.0, Errc::InvalidParameter, "s must lie in (0, 1)");
    require(gamma > -d, Errc::InvalidParameter, "gamma must exceed -d");
    require(theta_min > 0.0 && theta_min < kPi, Errc::InvalidParameter,
            "noncutoff sampling needs theta_min in (0, pi)");
  }
  if (model == SimModel::Inelastic) {
    require(alpha > 0.0 && alpha < 1.0, Errc::InvalidParameter, "alpha must lie in (0, 1)");
    require(particles.size() == 1, Errc::InvalidParameter,
            "inelastic model has one species: give one particle count");
  } else {
    require(!masses.empty(), Errc::InvalidParameter, "mixture needs at least one mass");
    for (std::size_t i = 0; i < masses.size(); ++i) {
      require(masses[i] > 0.0, Errc::InvalidParameter, "masses must be positive");
      if (i) require(masses[i] > masses[i - 1], Errc::InvalidParameter,
                     "masses must be strictly increasing");
    }
    require(particles.size() == masses.size(), Errc::InvalidParameter,
            "give one particle count per species");
  }
  for (std::size_t n : particles)
    require(n >= 2, Errc::InvalidParameter, "each species needs at least 2 particles");
  require(dt > 0.0 && std::isfinite(dt), Errc::InvalidParameter, "dt must be positive");
  require(init == "gaussian" || init == "two_bump" || init == "shell", Errc::InvalidParameter,
          "init must be gaussian, two_bump or shell");
  require(init_temperature > 0.0, Errc::InvalidParameter, "init_temperature must be positive");
  require(majorant_refresh >= 1, Errc::InvalidParameter, "majorant_refresh must be >= 1");
}

KernelSpec SimConfig::effective_kernel() const {
  KernelSpec k;
  k.d = d;
  k.gamma = gamma;
  k.s = s;
  k.model = model == SimModel::Inelastic ? Model::Inelastic : Model::Mixture;
  k.cutoff = cutoff;
  const double h = h_const;
  k.h = [h](double) { return h; };
  k.theta_min = cutoff ? 0.0 : theta_min;
  return k;
}

SimConfig parse_sim_config(const std::string& text) {
  SimConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool have_alpha = false, have_masses = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, Errc::InvalidParameter,
            "line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    if (key == "model") {
      require(val == "inelastic" || val == "mixture", Errc::InvalidParameter,
              "model must be inelastic or mixture");
      c.model = val == "inelastic" ? SimModel::Inelastic : SimModel::Mixture;
    } else if (key == "d") {
      c.d = int(to_u64(key, val));
    } else if (key == "gamma") {
      c.gamma = to_double(key, val);
    } else if (key == "s_or_h") {
      if (val == "h") {
        c.cutoff = true;
        c.h_const = 1.0;
      } else if (val.rfind("h:", 0) == 0) {
        c.cutoff = true;
        c.h_const = to_double(key, val.substr(2));
      } else {
        c.cutoff = false;
        c.s = to_double(key, val);
      }
    } else if (key == "alpha") {
      c.alpha = to_double(key, val);
      have_alpha = true;
    } else if (key == "masses") {
      c.masses.clear();
      for (const auto& m : split_list(val)) c.masses.push_back(to_double(key, m));
      have_masses = true;
    } else if (key == "particles") {
      c.particles.clear();
      for (const auto& n : split_list(val)) c.particles.push_back(to_u64(key, n));
    } else if (key == "dt") {
      c.dt = to_double(key, val);
    } else if (key == "steps") {
      c.steps = to_u64(key, val);
    } else if (key == "seed") {
      c.seed = to_u64(key, val);
    } else if (key == "theta_min") {
      c.theta_min = to_double(key, val);
    } else if (key == "init") {
      c.init = val;
    } else if (key == "init_temperature") {
      c.init_temperature = to_double(key, val);
    } else if (key == "snapshot_every") {
      c.snapshot_every = to_u64(key, val);
    } else if (key == "majorant_refresh") {
      c.majorant_refresh = to_u64(key, val);
    } else if (key == "output_dir") {
      c.output_dir = val;
    } else {
      fail(Errc::InvalidParameter, "unknown config key '" + key + "'");
    }
  }
  require(!(c.model == SimModel::Inelastic && have_masses), Errc::InvalidParameter,
          "masses apply to the mixture model only");
  require(!(c.model == SimModel::Mixture && have_alpha), Errc::InvalidParameter,
          "alpha applies to the inelastic model only");
  if (c.model == SimModel::Mixture && c.particles.size() == 1 && c.masses.size() > 1)
    c.particles.assign(c.masses.size(), c.particles[0]);
  c.validate();
  return c;
}

std::map<std::string, std::string> sim_config_entries(const SimConfig& c) {
  std::map<std::string, std::string> m;
  m["model"] = c.model == SimModel::Inelastic ? "inelastic" : "mixture";
  m["d"] = std::to_string(c.d);
  m["gamma"] = fmt_double(c.gamma);
  m["s_or_h"] = c.cutoff ? "h:" + fmt_double(c.h_const) : fmt_double(c.s);
  if (c.model == SimModel::Inelastic)
    m["alpha"] = fmt_double(c.alpha);
  else
    m["masses"] = join(c.masses);
  m["particles"] = join(c.particles);
  m["dt"] = fmt_double(c.dt);
  m["steps"] = std::to_string(c.steps);
  m["seed"] = std::to_string(c.seed);
  m["theta_min"] = fmt_double(c.theta_min);
  m["init"] = c.init;
  m["init_temperature"] = fmt_double(c.init_temperature);
  m["snapshot_every"] = std::to_string(c.snapshot_every);
  m["majorant_refresh"] = std::to_string(c.majorant_refresh);
  m["output_dir"] = c.output_dir;
  return m;
}

Ensemble initialize(const SimConfig& cfg) {
  cfg.validate();
  Ensemble e;
  e.d = cfg.d;
  e.seed = cfg.seed;
  std::size_t total = 0;
  for (std::size_t n : cfg.particles) total += n;
  const double w = 1.0 / double(total);
  const std::vector<double> masses =
      cfg.model == SimModel::Inelastic ? std::vector<double>{1.0} : cfg.masses;
  for (std::size_t si = 0; si < masses.size(); ++si) {
    Species sp;
    sp.mass = masses[si];
    sp.weight = w;
    const double sd = std::sqrt(cfg.init_temperature / sp.mass);
    CounterRng g(cfg.seed, streams::kInit, si, 0);
    sp.v.reserve(cfg.particles[si]);
    for (std::size_t k = 0; k < cfg.particles[si]; ++k) {
      Vec v(cfg.d);
      if (cfg.init == "gaussian") {
        for (int a = 0; a < cfg.d; ++a) v[a] = sd * g.normal();
      } else if (cfg.init == "two_bump") {
        // bumps at +-c e1 with the same total temperature
        const double c = sd * std::sqrt(0.75 * cfg.d);
        for (int a = 0; a < cfg.d; ++a) v[a] = 0.5 * sd * g.normal();
        v[0] += (k % 2 == 0) ? c : -c;
      } else {
        for (int a = 0; a < cfg.d; ++a) v[a] = g.normal();
        v = (sd * std::sqrt(double(cfg.d)) / norm(v)) * v;
      }
      sp.v.push_back(v);
    }
    e.species.push_back(std::move(sp));
  }
  e.validate();
  return e;
}

Moments moments(const Ensemble& ens) {
  Moments m;
  m.momentum = Vec(ens.d);
  for (const Species& s : ens.species) {
    const double mw = s.mass * s.weight;
    m.mass.push_back(mw * double(s.v.size()));
    for (const Vec& v : s.v) {
      m.momentum += mw * v;
      m.energy += mw * norm2(v);
    }
    // histogram entropy with the Miller-Madow bias correction
    const double N = double(s.v.size());
    Vec mean(ens.d);
    for (const Vec& v : s.v) mean += v;
    mean /= N;
    double var = 0.0;
    for (const Vec& v : s.v) var += norm2(v - mean);
    const double sd = std::sqrt(var / (N * ens.d));
    if (sd == 0.0 || s.v.size() < 2) continue;
    const double h = 3.5 * sd * std::pow(N, -1.0 / (ens.d + 2));
    std::unordered_map<std::uint64_t, std::uint64_t> bins;
    for (const Vec& v : s.v) {
      std::uint64_t key = 0;
      for (int a = 0; a < ens.d; ++a) {
        const auto idx = std::int64_t(std::floor((v[a] - mean[a]) / h)) + (1 << 20);
        key = (key << 21) | (std::uint64_t(idx) & 0x1FFFFF);
      }
      ++bins[key];
    }
    double plogp = 0.0;
    for (const auto& kv : bins) {
      const double p = double(kv.second) / N;
      plogp += p * std::log(p);
    }
    plogp -= (double(bins.size()) - 1.0) / (2.0 * N);
    const double n_s = s.weight * N;
    m.entropy += n_s * (plogp + std::log(n_s / std::pow(h, ens.d)));
  }
  return m;
}

PositivityReport positivity_probe(const Ensemble& ens, double radius, int bins) {
  require(radius > 0.0 && bins >= 1, Errc::InvalidParameter, "bad probe grid");
  const int d = ens.d;
  Vec mean(d);
  double mtot = 0.0;
  for (const Species& s : ens.species)
    for (const Vec& v : s.v) {
      mean += s.mass * v;
      mtot += s.mass;
    }
  mean /= mtot;
  PositivityReport r;
  std::size_t cells = 1;
  for (int a = 0; a < d; ++a) cells *= std::size_t(bins);
  r.counts.assign(cells, 0);
  const double h = 2.0 * radius / bins;
  for (const Species& s : ens.species)
    for (const Vec& v : s.v) {
      std::size_t idx = 0;
      bool inside = true;
      for (int a = 0; a < d; ++a) {
        const double x = (v[a] - mean[a] + radius) / h;
        if (x < 0.0 || x >= bins) {
          inside = false;
          break;
        }
        idx = idx * bins + std::size_t(x);
      }
      if (inside) ++r.counts[idx];
    }
  r.populated_radius = radius;
  for (std::size_t c = 0; c < cells; ++c) {
    std::size_t rem = c;
    double r2 = 0.0;
    for (int a = d - 1; a >= 0; --a) {
      const double x = -radius + (double(rem % bins) + 0.5) * h;
      rem /= bins;
      r2 += x * x;
    }
    const double rc = std::sqrt(r2);
    if (rc > radius) continue;
    ++r.bins_in_ball;
    if (r.counts[c] == 0) {
      ++r.empty_in_ball;
      r.populated_radius = std::min(r.populated_radius, rc);
    }
  }
  return r;
}

double Simulator::AngleTable::sample(double u) const {
  const double target = u * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  const std::size_t k = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - cdf.begin(), 1),
                                              cdf.size() - 1);
  const double c0 = cdf[k - 1], c1 = cdf[k];
  const double f = c1 > c0 ? (target - c0) / (c1 - c0) : 0.5;
  return theta[k - 1] + f * (theta[k] - theta[k - 1]);
}

Simulator::Simulator(SimConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  kernel_ = cfg_.effective_kernel();
  const int d = cfg_.d;
  const double area = sphere_area(d - 2);
  lambda_ = kernel_.angular_integral();

  // inverse-CDF table of the angular density
  auto dens = [&](double th) { return kernel_.b_angle(th) * sin_pow(th, d); };
  const Rule1D g4 = gauss_legendre(4, 0.0, 1.0);
  const int n = 4096;
  const double lo = cfg_.cutoff ? 0.0 : cfg_.theta_min, hi = cfg_.cutoff ? kPi / 2 : kPi;
  table_.theta.resize(n + 1);
  for (int k = 0; k <= n; ++k)
    table_.theta[k] = cfg_.cutoff ? lo + (hi - lo) * k / n : lo * std::pow(hi / lo, double(k) / n);
  table_.theta[n] = hi;
  table_.cdf.assign(n + 1, 0.0);
  for (int k = 0; k < n; ++k) {
    const double a = table_.theta[k], b = table_.theta[k + 1];
    double m = 0.0;
    for (std::size_t i = 0; i < g4.size(); ++i) m += g4.w[i] * dens(a + (b - a) * g4.x[i]);
    table_.cdf[k + 1] = table_.cdf[k] + m * (b - a);
  }

  // mean <g^, n>^2 and the truncation summary by an independent graded rule
  auto weight = [&](double th) {
    const double sh = std::sin(0.5 * th), c = std::cos(th);
    return cfg_.cutoff ? c * c : sh * sh;
  };
  Rule1D r = cfg_.cutoff ? composite_gl(16, 16, 0.0, kPi / 2)
                         : graded_gl(16, cfg_.theta_min, kPi, cfg_.theta_min * 1e-9, 1.3, 0.1);
  if (!cfg_.cutoff) {
    // graded_gl leaves [theta_min, theta_min + h0] uncovered; its share is negligible
    r.append(gauss_legendre(16, cfg_.theta_min, cfg_.theta_min * (1 + 1e-9)));
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    num += r.w[i] * dens(r.x[i]) * weight(r.x[i]);
    den += r.w[i] * dens(r.x[i]);
  }
  mean_normal_fraction_ = num / den;
  trunc_.theta_min = cfg_.cutoff ? 0.0 : cfg_.theta_min;
  trunc_.kept_rate = lambda_;
  trunc_.kept_transfer = area * num;
  trunc_.discarded_transfer = 0.0;
  if (!cfg_.cutoff) {
    const Rule1D z = graded_gl(16, 0.0, cfg_.theta_min, cfg_.theta_min * 1e-12, 2.0);
    for (std::size_t i = 0; i < z.size(); ++i)
      trunc_.discarded_transfer += z.w[i] * area * dens(z.x[i]) * weight(z.x[i]);
  }
}

TruncationInfo Simulator::truncation() const { return trunc_; }

void Simulator::refresh_majorants(const Ensemble& ens) {
  const std::size_t S = ens.species.size();
  const bool periodic = last_refresh_ == UINT64_MAX ||
                        ens.step_index - last_refresh_ >= cfg_.majorant_refresh;
  if (majorant_.size() != S * S) {
    majorant_.assign(S * S, 0.0);
    ceiling_.assign(S * S, 0.0);
  }
  if (cfg_.gamma >= 0.0) {
    // |v - v*| <= |v - c| + |v* - c| gives a rigorous bound
    Vec c(ens.d);
    double n = 0.0;
    for (const Species& s : ens.species)
      for (const Vec& v : s.v) {
        c += v;
        n += 1.0;
      }
    c /= n;
    std::vector<double> rmax(S, 0.0);
    for (std::size_t i = 0; i < S; ++i)
      for (const Vec& v : ens.species[i].v) rmax[i] = std::max(rmax[i], distance(v, c));
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t j = i; j < S; ++j) {
        const double g = rmax[i] + rmax[j];
        const double fresh = lambda_ * (cfg_.gamma == 0.0 ? 1.0 : std::pow(g, cfg_.gamma));
        majorant_[i * S + j] = fresh;
        ceiling_[i * S + j] = fresh;
      }
    if (periodic) last_refresh_ = ens.step_index;
    return;
  }
  if (!periodic) return;
  last_refresh_ = ens.step_index;
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t j = i; j < S; ++j) {
      CounterRng g(ens.seed, streams::kMajorant, ens.step_index, i * S + j);
      const auto& A = ens.species[i].v;
      const auto& B = ens.species[j].v;
      double best = 0.0;
      for (int k = 0; k < 1024; ++k) {
        const double gn = distance(A[g.below(A.size())], B[g.below(B.size())]);
        if (gn > 0.0) best = std::max(best, std::pow(gn, cfg_.gamma));
      }
      majorant_[i * S + j] = 2.0 * lambda_ * best;
      ceiling_[i * S + j] = kInflationCap * majorant_[i * S + j];
    }
}

namespace {

struct Candidate {
  std::uint32_t sa, sb;
  std::uint32_t ia, ib;
  std::uint32_t pair;
};

}  // namespace

StepStats Simulator::step(Ensemble& ens) {
  ens.validate();
  require(ens.d == cfg_.d, Errc::InvalidParameter, "ensemble dimension differs from config");
  if (cfg_.model == SimModel::Inelastic)
    require(ens.species.size() == 1, Errc::InvalidParameter, "inelastic model has one species");
  refresh_majorants(ens);

  const std::size_t S = ens.species.size();
  const double w = ens.species[0].weight;
  const int d = ens.d;
  const auto rp = cfg_.model == SimModel::Inelastic ? RestitutionParams::from_alpha(cfg_.alpha)
                                                    : RestitutionParams{1.0, 1.0};
  std::vector<std::size_t> offset(S + 1, 0);
  for (std::size_t i = 0; i < S; ++i) offset[i + 1] = offset[i] + ens.species[i].v.size();

  std::vector<std::vector<Vec>> saved;
  for (const Species& s : ens.species) saved.push_back(s.v);

  StepStats st;
  for (;;) {
    st.candidates = st.collisions = 0;
    st.predicted_loss = 0.0;
    st.majorant = 0.0;
    double per_particle = 0.0;

    // candidates per species pair, drawn in a fixed order
    std::vector<Candidate> cand;
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t j = i; j < S; ++j) {
        const double maj = majorant_[i * S + j];
        st.majorant = std::max(st.majorant, maj);
        const double Ni = double(ens.species[i].v.size()), Nj = double(ens.species[j].v.size());
        const double pairs = i == j ? 0.5 * Ni * (Ni - 1.0) : Ni * Nj;
        const double expect = w * cfg_.dt * maj * pairs;
        per_particle = std::max(per_particle, cfg_.dt * w * maj * (i == j ? Ni : Nj));
        CounterRng g(ens.seed, streams::kCandidates, ens.step_index, i * S + j);
        auto count = std::uint64_t(std::floor(expect));
        if (g.uniform() < expect - std::floor(expect)) ++count;
        for (std::uint64_t c = 0; c < count; ++c) {
          Candidate k{std::uint32_t(i), std::uint32_t(j), 0, 0, std::uint32_t(i * S + j)};
          k.ia = std::uint32_t(g.below(std::uint64_t(Ni)));
          if (i == j) {
            k.ib = std::uint32_t(g.below(std::uint64_t(Ni) - 1));
            if (k.ib >= k.ia) ++k.ib;
          } else {
            k.ib = std::uint32_t(g.below(std::uint64_t(Nj)));
          }
          cand.push_back(k);
        }
      }
    st.candidates = cand.size();
    st.max_collision_probability = per_particle;

    // conflict-free rounds: a candidate runs after every earlier one sharing a particle
    std::vector<std::uint32_t> last(offset[S], 0), round(cand.size());
    std::uint32_t nrounds = 0;
    for (std::size_t c = 0; c < cand.size(); ++c) {
      const std::size_t a = offset[cand[c].sa] + cand[c].ia, b = offset[cand[c].sb] + cand[c].ib;
      round[c] = std::max(last[a], last[b]) + 1;
      last[a] = last[b] = round[c];
      nrounds = std::max(nrounds, round[c]);
    }
    std::vector<std::vector<std::uint32_t>> by_round(nrounds + 1);
    for (std::size_t c = 0; c < cand.size(); ++c) by_round[round[c]].push_back(std::uint32_t(c));

    std::vector<double> loss(cand.size(), 0.0), violation(cand.size(), 0.0);
    std::vector<unsigned char> accepted(cand.size(), 0), clipped(cand.size(), 0);

    auto process = [&](std::uint32_t c) {
      const Candidate& k = cand[c];
      Species& A = ens.species[k.sa];
      Species& B = ens.species[k.sb];
      Vec& va = A.v[k.ia];
      Vec& vb = B.v[k.ib];
      const Vec g = va - vb;
      const double gn = norm(g);
      if (gn == 0.0) return;
      const double rate = lambda_ * (cfg_.gamma == 0.0 ? 1.0 : std::pow(gn, cfg_.gamma));
      const double maj = majorant_[k.pair];
      CounterRng rng(ens.seed, streams::kCollision, ens.step_index, c);
      if (rate > maj) {
        if (maj < ceiling_[k.pair]) {
          violation[c] = rate;
          return;
        }
        // soft-potential rates are unbounded as |g| -> 0; past the cap they are clipped
        clipped[c] = 1;
        rng.uniform();
      } else if (rng.uniform() * maj >= rate) {
        return;
      }
      const double th = table_.sample(rng.uniform());
      const Vec gh = g / gn;
      const PlaneBasis pb = orthogonal_basis(gh);
      Vec e;
      if (d == 3) {
        const double phi = 2.0 * kPi * rng.uniform();
        e = std::cos(phi) * pb.e[0] + std::sin(phi) * pb.e[1];
      } else {
        e = rng.uniform() < 0.5 ? pb.e[0] : -pb.e[0];
      }
      const Vec dir = normalized(std::cos(th) * gh + std::sin(th) * e);
      PostCollision pc;
      double gn2 = 0.0;  // <g, n>^2
      if (cfg_.model == SimModel::Inelastic) {
        if (cfg_.cutoff) {
          pc = inelastic_post_n(va, vb, dir, rp);
          gn2 = gn * gn * std::cos(th) * std::cos(th);
        } else {
          pc = inelastic_post_sigma(va, vb, dir, rp);
          const double sh = std::sin(0.5 * th);
          gn2 = gn * gn * sh * sh;
        }
        loss[c] = A.mass * w * 0.5 * (1.0 - cfg_.alpha * cfg_.alpha) * gn2;
      } else {
        const MassPair mp(A.mass, B.mass);
        pc = cfg_.cutoff ? mixture_post_n(va, vb, dir, mp) : mixture_post_sigma(va, vb, dir, mp);
      }
      va = pc.v_prime;
      vb = pc.v_star_prime;
      accepted[c] = 1;
    };

    double worst = 0.0;
    for (std::uint32_t r = 1; r <= nrounds && worst == 0.0; ++r) {
      const auto& ids = by_round[r];
      constexpr std::size_t kChunk = 1024;
      if (ids.size() >= 2 * kChunk && thread_count() > 1) {
        parallel_chunks((ids.size() + kChunk - 1) / kChunk, [&](std::size_t ch) {
          const std::size_t end = std::min(ids.size(), (ch + 1) * kChunk);
          for (std::size_t q = ch * kChunk; q < end; ++q) process(ids[q]);
        });
      } else {
        for (std::uint32_t c : ids) process(c);
      }
      for (std::uint32_t c : ids) worst = std::max(worst, violation[c]);
    }

    if (worst > 0.0) {
      // restore, inflate every pair that was exceeded, and redo the step
      for (std::size_t i = 0; i < S; ++i) ens.species[i].v = saved[i];
      for (std::size_t c = 0; c < cand.size(); ++c)
        if (violation[c] > 0.0)
          majorant_[cand[c].pair] = std::min(ceiling_[cand[c].pair],
                                             std::max(majorant_[cand[c].pair], 2.0 * violation[c]));
      ++st.reruns;
      spdlog::warn("step {}: rate majorant exceeded ({}), inflated and re-running", ens.step_index,
                   worst);
      require(st.reruns < 60, Errc::MajorantViolation, "majorant inflation did not settle");
      continue;
    }
    for (std::size_t c = 0; c < cand.size(); ++c) {
      st.collisions += accepted[c];
      st.clipped += clipped[c];
      st.predicted_loss += loss[c];
    }
    break;
  }
  if (st.max_collision_probability >= 1.0 && !warned_dt_) {
    warned_dt_ = true;
    spdlog::warn("step {}: dt times the majorant rate is {:.3g} (>= 1)", ens.step_index,
                 st.max_collision_probability);
  }
  ens.time += cfg_.dt;
  ++ens.step_index;
  return st;
}

void Simulator::run(Ensemble& ens,
                    const std::function<void(const Ensemble&, const StepStats&)>& observe) {
  if (observe) observe(ens, StepStats{});
  for (std::uint64_t k = 0; k < cfg_.steps; ++k) {
    const StepStats st = step(ens);
    if (observe) observe(ens, st);
  }
}

Ensemble step(Ensemble ens, const SimConfig& cfg) {
  Simulator sim(cfg);
  sim.step(ens);
  return ens;
}

void write_snapshot(const std::string& path, const std::vector<Vec>& v, int d) {
  static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes little endian");
  std::ofstream out(path, std::ios::binary);
  require(bool(out), Errc::IoError, "cannot write " + path);
  const std::uint32_t version = 1, dim = std::uint32_t(d);
  const std::uint64_t count = v.size();
  out.write("KTEN", 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  out.write(reinterpret_cast<const char*>(&count), 8);
  std::vector<double> buf;
  buf.reserve(v.size() * std::size_t(d));
  for (const Vec& x : v)
    for (int a = 0; a < d; ++a) buf.push_back(x[a]);
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(double)));
  require(bool(out), Errc::IoError, "short write to " + path);
}

std::vector<Vec> read_snapshot(const std::string& path, int* d_out) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), Errc::IoError, "cannot read " + path);
  char magic[4];
  std::uint32_t version = 0, dim = 0;
  std::uint64_t count = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&dim), 4);
  in.read(reinterpret_cast<char*>(&count), 8);
  require(bool(in) && std::memcmp(magic, "KTEN", 4) == 0, Errc::IoError,
          path + ": not a snapshot file");
  require(version == 1 && (dim == 2 || dim == 3), Errc::IoError, path + ": unsupported header");
  std::vector<double> buf(count * dim);
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(double)));
  require(bool(in), Errc::IoError, path + ": truncated snapshot");
  std::vector<Vec> v(count, Vec(int(dim)));
  for (std::uint64_t i = 0; i < count; ++i)
    for (std::uint32_t a = 0; a < dim; ++a) v[i][int(a)] = buf[i * dim + a];
  if (d_out) *d_out = int(dim);
  return v;
}

}  // namespace kten
