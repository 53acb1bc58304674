#include "kten/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kten/parallel.hpp"

namespace kten {

const char* model_name(Model m) {
  switch (m) {
    case Model::Inelastic: return "inelastic";
    case Model::Mixture: return "mixture";
    case Model::Elastic: return "elastic";
  }
  return "?";
}

namespace {

constexpr double kPi = std::numbers::pi;

double sin_pow(double theta, int d) { return d == 3 ? std::sin(theta) : 1.0; }

// Power-law model F ~ C x^k fitted through (x1, F1), (x2, F2).
struct PowerLaw {
  double C = 0.0, k = 0.0;
  PowerLaw(double x1, double F1, double x2, double F2) {
    if (F1 == 0.0 || F2 == 0.0) return;
    k = std::log(std::abs(F2 / F1)) / std::log(x2 / x1);
    C = F1 / std::pow(x1, k);
  }
  // int_0^a C x^k
  double below(double a) const {
    if (C == 0.0) return 0.0;
    require(k > -1.0, Errc::QuadratureTruncation, "integrand not integrable at the origin");
    return C * std::pow(a, k + 1) / (k + 1);
  }
  // int_b^inf C x^k
  double above(double b) const {
    if (C == 0.0) return 0.0;
    require(k < -1.0, Errc::QuadratureTruncation, "integrand decays too slowly for the tail model");
    return -C * std::pow(b, k + 1) / (k + 1);
  }
};

}  // namespace

void KernelSpec::validate() const {
  require(d == 2 || d == 3, Errc::InvalidParameter, "dimension must be 2 or 3");
  require(std::isfinite(gamma), Errc::InvalidParameter, "gamma must be finite");
  require(theta_min >= 0.0 && theta_min < kPi, Errc::InvalidParameter,
          "theta_min must lie in [0, pi)");
  const Rule1D r = composite_gl(16, 8, 0.0, cutoff ? kPi / 2 : kPi);
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double v = cutoff ? h(r.x[i]) : btilde(std::cos(r.x[i])) * sin_pow(r.x[i], d);
    require(std::isfinite(v) && v >= 0.0, Errc::InvalidParameter,
            "angular profile must be finite and nonnegative");
    total += r.w[i] * v;
  }
  require(std::isfinite(total) && total > 0.0, Errc::InvalidParameter,
          "angular profile must have a finite positive integral");
  if (cutoff) {
    require(gamma >= 0.0 && gamma <= 1.0, Errc::InvalidParameter,
            "cutoff kernels need hard potentials, 0 <= gamma <= 1");
    return;
  }
  require(s > 0.0 && s < 1.0, Errc::InvalidParameter, "s must lie in (0, 1)");
  require(gamma > -d, Errc::InvalidParameter, "gamma must exceed -d");
  if (moderately_soft) {
    require(gamma < 0.0 && gamma + 2 * s >= 0.0 && gamma + 2 * s <= 2.0, Errc::InvalidParameter,
            "moderately soft potentials need gamma < 0 and gamma + 2s in [0, 2]");
  }
}

double KernelSpec::normalization() const {
  return std::pow(2.0, model == Model::Inelastic ? d - 2 : d - 1);
}

double KernelSpec::b(double cos_theta) const {
  const double c = std::clamp(cos_theta, -1.0, 1.0);
  if (cutoff) {
    const double th = std::acos(c);
    return th <= kPi / 2 ? h(th) : 0.0;
  }
  const double sh = std::sqrt(0.5 * (1.0 - c));
  const double ch = std::sqrt(0.5 * (1.0 + c));
  return std::pow(sh, -(d - 1) - 2 * s) * std::pow(ch, gamma + 2 * s + 1) * btilde(c) /
         normalization();
}

double KernelSpec::b_angle(double theta) const {
  if (cutoff) return theta <= kPi / 2 ? h(theta) : 0.0;
  const double sh = std::sin(0.5 * theta), ch = std::cos(0.5 * theta);
  return std::pow(sh, -(d - 1) - 2 * s) * std::pow(ch, gamma + 2 * s + 1) *
         btilde(1.0 - 2.0 * sh * sh) / normalization();
}

double KernelSpec::angular_integral() const {
  const double area = sphere_area(d - 2);
  if (cutoff) {
    const Rule1D r = composite_gl(16, 8, 0.0, kPi / 2);
    double t = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) t += r.w[i] * h(r.x[i]) * sin_pow(r.x[i], d);
    return area * t;
  }
  require(theta_min > 0.0, Errc::DivergentIntegral,
          "noncutoff angular integral needs theta_min > 0");
  Rule1D r;
  if (theta_min < kPi / 2) {
    r = graded_gl(16, 0.0, kPi / 2, theta_min, 1.5);
    r.append(graded_gl_right(16, kPi / 2, kPi, 1e-12, 2.0, 0.25));
  } else {
    r = graded_gl_right(16, theta_min, kPi, 1e-12, 2.0, 0.25);
  }
  double t = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i)
    t += r.w[i] * b_angle(r.x[i]) * sin_pow(r.x[i], d);
  return area * t;
}

double eval_B(double rel_speed, double cos_theta, const KernelSpec& spec, bool enforce_theta_min) {
  require(rel_speed >= 0.0, Errc::InvalidParameter, "relative speed must be nonnegative");
  if (rel_speed == 0.0 && spec.gamma < 0.0)
    fail(Errc::SingularAtZeroSpeed, "|v - v*| = 0 with gamma < 0");
  if (enforce_theta_min && std::acos(std::clamp(cos_theta, -1.0, 1.0)) < spec.theta_min)
    fail(Errc::SingularAngle, "scattering angle below theta_min");
  const double radial = spec.gamma == 0.0 ? 1.0 : std::pow(rel_speed, spec.gamma);
  return radial * spec.b(cos_theta);
}

CarlemanSetup CarlemanSetup::inelastic(const RestitutionParams& p) {
  return {CarlemanKind::Inelastic, 1.0 / p.beta, 0.0};
}

CarlemanSetup CarlemanSetup::mixture(const MassPair& m) {
  require(m.m_i != m.m_j, Errc::EqualMasses, "equal masses use the mono-species kernel");
  return {m.m_i < m.m_j ? CarlemanKind::LightOnHeavy : CarlemanKind::HeavyOnLight,
          m.total() / (2.0 * m.m_j), m.m_i / m.m_j};
}

double CarlemanSetup::cos_theta(const Vec& x, const Vec& y, const Vec& node) const {
  // sin(theta/2) = c |x - y| / |pre-collision relative velocity|
  double rel;
  if (kind == CarlemanKind::LightOnHeavy) {
    const Vec v_star = node + mass_ratio * (y - x);
    rel = distance(x, v_star);
  } else {
    rel = distance(y, node);
  }
  if (rel == 0.0) return 1.0;
  const double sh = std::min(1.0, c * distance(x, y) / rel);
  return 1.0 - 2.0 * sh * sh;
}

HyperplaneQuadrature HyperplaneQuadrature::build(const Vec& base_point, const Vec& normal,
                                                 const DensityField& f, const PlaneOptions& opt) {
  HyperplaneQuadrature q;
  q.base_point = base_point;
  q.normal = normal;
  const double sigma = f.scale();
  const Vec c = f.center();
  const Vec cp = c - dot(c - base_point, normal) * normal;
  const double off = distance(cp, base_point);
  if (off <= 3.0 * sigma) {
    q.origin = base_point;
    q.R_trunc = off + opt.trunc_sigmas * sigma;
  } else {
    q.origin = cp;
    q.R_trunc = opt.trunc_sigmas * sigma;
  }
  const int panels = std::max(1, int(std::ceil(q.R_trunc / (opt.panel_sigmas * sigma))));
  q.radial = composite_gl(opt.radial_order, panels, 0.0, q.R_trunc);
  q.angular = subsphere_rule(normal, opt.angular_nodes);
  return q;
}

double HyperplaneQuadrature::disk_volume() const {
  return integrate([](const Vec&) { return 1.0; });
}

double carleman_kernel(const Vec& u, const Vec& u_prime, const DensityField& f,
                       const KernelSpec& spec, const CarlemanSetup& setup, KernelVariant variant,
                       const PlaneOptions& opt) {
  require(!spec.cutoff, Errc::InvalidParameter, "Carleman kernels need a noncutoff spec");
  const double k = spec.gamma + 2 * spec.s + 1;
  require(k >= 0.0, Errc::InvalidParameter, "gamma + 2s + 1 < 0 makes the plane weight singular");
  const Vec& x = u_prime;
  const Vec& y = u;
  const double r = distance(x, y);
  require(r > 0.0, Errc::CoincidentPoints, "kernel is singular at u == u'");
  if (f.mass() == 0.0) return 0.0;
  const Vec base = setup.base(x, y);
  const auto quad = HyperplaneQuadrature::build(base, (y - x) / r, f, opt);
  const Vec& anchor = variant == KernelVariant::Exact ? base : x;
  const double integral = quad.integrate([&](const Vec& node) {
    const double fv = f(node);
    if (fv == 0.0) return 0.0;
    return spec.btilde(setup.cos_theta(x, y, node)) * std::pow(distance(node, anchor), k) * fv;
  });
  return std::pow(setup.c, -2 * spec.s) * std::pow(r, -spec.d - 2 * spec.s) * integral;
}

double K_f_inelastic(const Vec& u, const Vec& u_prime, const DensityField& f,
                     const KernelSpec& spec, const RestitutionParams& p, KernelVariant variant,
                     const PlaneOptions& opt) {
  return carleman_kernel(u, u_prime, f, spec, CarlemanSetup::inelastic(p), variant, opt);
}

double K_f_mixture(const Vec& u, const Vec& u_prime, const DensityField& f,
                   const KernelSpec& spec, const MassPair& m, KernelVariant variant,
                   const PlaneOptions& opt) {
  return carleman_kernel(u, u_prime, f, spec, CarlemanSetup::mixture(m), variant, opt);
}

ScalingReport verify_Kf_scaling(const DensityField& f, const KernelSpec& spec,
                                const CarlemanSetup& setup, const Vec& u_prime,
                                const std::vector<double>& r_grid, const ScalingOptions& opt) {
  std::vector<double> small, large;
  for (double r : r_grid) {
    require(r > 0.0, Errc::InvalidParameter, "radii must be positive");
    (r <= 1.0 ? small : large).push_back(r);
  }
  require(small.size() >= 4 && large.size() >= 4, Errc::InsufficientGrid,
          "need at least 4 radii in (0, 1] and 4 in (1, inf)");
  const double rmax = *std::max_element(r_grid.begin(), r_grid.end());
  const double rmin = *std::min_element(r_grid.begin(), r_grid.end());
  require(rmin > opt.l_min && rmax < opt.l_max, Errc::InsufficientGrid,
          "radii must lie strictly inside (l_min, l_max)");

  // Panel breakpoints: geometric sequence plus every requested radius.
  std::vector<double> bp;
  for (double l = opt.l_min; l < opt.l_max; l *= opt.ratio) bp.push_back(l);
  bp.push_back(opt.l_max);
  bp.insert(bp.end(), r_grid.begin(), r_grid.end());
  std::sort(bp.begin(), bp.end());
  std::vector<double> uniq;
  for (double b : bp)
    if (uniq.empty() || b > uniq.back() * (1.0 + 1e-9)) uniq.push_back(b);
  bp.swap(uniq);

  const int d = spec.d;
  const SphereRule sph = sphere_rule(d, opt.sphere_theta, opt.sphere_phi);
  struct Node {
    double l, w;
    std::size_t panel;
  };
  std::vector<Node> nodes;
  for (std::size_t p = 0; p + 1 < bp.size(); ++p) {
    const Rule1D g = gauss_legendre(opt.order, bp[p], bp[p + 1]);
    for (std::size_t i = 0; i < g.size(); ++i) nodes.push_back({g.x[i], g.w[i], p});
  }
  std::vector<double> Kbar(nodes.size()), K(nodes.size());
  parallel_chunks(nodes.size(), [&](std::size_t i) {
    double sb = 0.0, se = 0.0;
    for (std::size_t a = 0; a < sph.size(); ++a) {
      const Vec u = u_prime + nodes[i].l * sph.nodes[a];
      sb += sph.w[a] * carleman_kernel(u, u_prime, f, spec, setup, KernelVariant::Symmetrized,
                                       opt.plane);
      se += sph.w[a] * carleman_kernel(u, u_prime, f, spec, setup, KernelVariant::Exact, opt.plane);
    }
    Kbar[i] = sb;
    K[i] = se;
  });

  const std::size_t npan = bp.size() - 1;
  std::vector<double> pin(npan, 0.0), pout(npan, 0.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double l = nodes[i].l;
    pin[nodes[i].panel] += nodes[i].w * std::pow(l, d + 1) * Kbar[i];
    pout[nodes[i].panel] += nodes[i].w * std::pow(l, d - 1) * K[i];
  }
  const std::size_t o = std::size_t(opt.order);
  const std::size_t n = nodes.size();
  auto Fin = [&](std::size_t i) { return std::pow(nodes[i].l, d + 1) * Kbar[i]; };
  auto Fout = [&](std::size_t i) { return std::pow(nodes[i].l, d - 1) * K[i]; };
  const double tail_in =
      PowerLaw(nodes[0].l, Fin(0), nodes[o - 1].l, Fin(o - 1)).below(bp.front());
  const double tail_out =
      PowerLaw(nodes[n - o].l, Fout(n - o), nodes[n - 1].l, Fout(n - 1)).above(bp.back());

  ScalingReport rep;
  for (double r : r_grid) {
    double in = tail_in;
    double out = tail_out;
    for (std::size_t p = 0; p < npan; ++p) {
      if (bp[p + 1] <= r * (1.0 + 1e-9)) in += pin[p];
      if (bp[p] >= r * (1.0 - 1e-9)) out += pout[p];
    }
    rep.r.push_back(r);
    rep.inner.push_back(in);
    rep.outer.push_back(out);
  }
  auto fit = [&](bool want_small, const std::vector<double>& ys) {
    std::vector<double> xs, vs;
    for (std::size_t i = 0; i < rep.r.size(); ++i)
      if ((rep.r[i] <= 1.0) == want_small) {
        xs.push_back(rep.r[i]);
        vs.push_back(ys[i]);
      }
    return loglog_fit(xs, vs);
  };
  rep.small_inner = fit(true, rep.inner);
  rep.small_outer = fit(true, rep.outer);
  rep.large_inner = fit(false, rep.inner);
  rep.large_outer = fit(false, rep.outer);
  return rep;
}

TestFunction gaussian_bump(const Vec& center, double width) {
  require(width > 0.0, Errc::InvalidParameter, "bump width must be positive");
  TestFunction t;
  const double inv = 0.5 / (width * width);
  t.value = [center, inv](const Vec& u) { return std::exp(-inv * norm2(u - center)); };
  t.sup = 1.0;
  t.grad_sup = std::exp(-0.5) / width;
  t.hess_sup = 1.0 / (width * width);
  return t;
}

TestFunction constant_function(double c) {
  TestFunction t;
  t.value = [c](const Vec&) { return c; };
  t.sup = std::abs(c);
  return t;
}

TestFunction spreading_bump(double R, double eps, double beta) {
  require(R > 0.0 && eps > 0.0 && eps < 1.0, Errc::InvalidParameter, "bad bump parameters");
  const double rho = std::sqrt(1.0 + beta * beta);
  const double r_in = rho * (1.0 - eps) * R;
  const double width = rho * 0.5 * eps * R;
  TestFunction t;
  t.value = [r_in, width](const Vec& u) {
    const double x = std::clamp((norm(u) - r_in) / width, 0.0, 1.0);
    return 1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
  };
  // quintic smoothstep: max |s'| = 15/8, max |s''| = 10/sqrt(3)
  t.sup = 1.0;
  t.grad_sup = 1.875 / width;
  t.hess_sup = std::max(10.0 / std::sqrt(3.0) / (width * width), 1.875 / (width * r_in));
  return t;
}

TestFunction linear_combination(double a, const TestFunction& p1, double b,
                                const TestFunction& p2) {
  TestFunction t;
  t.value = [a, b, f1 = p1.value, f2 = p2.value](const Vec& u) { return a * f1(u) + b * f2(u); };
  t.sup = std::abs(a) * p1.sup + std::abs(b) * p2.sup;
  t.grad_sup = std::abs(a) * p1.grad_sup + std::abs(b) * p2.grad_sup;
  t.hess_sup = std::abs(a) * p1.hess_sup + std::abs(b) * p2.hess_sup;
  return t;
}

QsResult Q_s_apply(const DensityField& f, const TestFunction& psi, const Vec& v,
                   const KernelSpec& spec, const CarlemanSetup& setup, const QsOptions& opt) {
  const int d = spec.d;
  const double r_split = opt.r_split.value_or(0.1 * (1.0 + norm(v)));
  require(r_split > 0.0 && r_split < opt.l_max, Errc::InvalidParameter, "bad split radius");
  const SphereRule sph = sphere_rule(d, opt.sphere_theta, opt.sphere_phi);
  const std::size_t half = sph.size() / 2;
  const double psi0 = psi.value(v);

  // Inner ball: pair antipodal directions so the odd part of K cancels exactly.
  const double h0 = r_split * opt.l_min_rel;
  const Rule1D rin = graded_gl(opt.order, 0.0, r_split, h0, 2.0);
  std::vector<double> Fin(rin.size());
  parallel_chunks(rin.size(), [&](std::size_t i) {
    const double l = rin.x[i];
    double acc = 0.0;
    for (std::size_t a = 0; a < half; ++a) {
      const Vec w = l * sph.nodes[a];
      const Vec up = v + w, um = v - w;
      const double Kp = carleman_kernel(up, v, f, spec, setup, KernelVariant::Exact, opt.plane);
      const double Km = carleman_kernel(um, v, f, spec, setup, KernelVariant::Exact, opt.plane);
      const double pp = psi.value(up), pm = psi.value(um);
      acc += sph.w[a] * (0.5 * (Kp + Km) * (pp + pm - 2.0 * psi0) + 0.5 * (Kp - Km) * (pp - pm));
    }
    Fin[i] = std::pow(l, d - 1) * acc;
  });
  double inner = 0.0;
  for (std::size_t i = 0; i < rin.size(); ++i) inner += rin.w[i] * Fin[i];
  const std::size_t o = std::size_t(opt.order);
  // second differences of psi vanish like l^2, so the radial profile behaves as l^{1-2s}
  const double k = 1.0 - 2.0 * spec.s;
  const double sliver = Fin[0] / std::pow(rin.x[0], k) * std::pow(h0, k + 1) / (k + 1);

  // Outer region: direct integration of K (psi(u) - psi(v)).
  const Rule1D rout = graded_gl(opt.order, 0.0, opt.l_max, r_split, 1.5, 2.0);
  std::vector<double> Fout(rout.size()), Gout(rout.size());
  parallel_chunks(rout.size(), [&](std::size_t i) {
    const double l = rout.x[i];
    double acc = 0.0, kacc = 0.0;
    for (std::size_t a = 0; a < sph.size(); ++a) {
      const Vec u = v + l * sph.nodes[a];
      const double K = carleman_kernel(u, v, f, spec, setup, KernelVariant::Exact, opt.plane);
      acc += sph.w[a] * K * (psi.value(u) - psi0);
      kacc += sph.w[a] * K;
    }
    Fout[i] = std::pow(l, d - 1) * acc;
    Gout[i] = std::pow(l, d - 1) * kacc;
  });
  double outer = 0.0;
  for (std::size_t i = 0; i < rout.size(); ++i) outer += rout.w[i] * Fout[i];
  const std::size_t n = rout.size();
  // tail of K weighted by the bracket psi(u) - psi(v) as seen on the last shell
  double tail = 0.0;
  if (Fout[n - 1] != 0.0 && Gout[n - 1] > 0.0)
    tail = Fout[n - 1] / Gout[n - 1] *
           PowerLaw(rout.x[n - o], Gout[n - o], rout.x[n - 1], Gout[n - 1]).above(opt.l_max);

  QsResult res;
  res.value = inner + sliver + outer + tail;
  require(std::isfinite(res.value), Errc::NonFiniteResult, "Q^s evaluation is not finite");
  require(std::abs(sliver) <= 1e-3 * (std::abs(inner) + 1e-300) || std::abs(sliver) < 1e-14,
          Errc::NonFiniteResult, "inner Taylor remainder estimate exceeds tolerance");
  res.bound = std::pow(psi.sup, 1.0 - spec.s) *
              std::pow(std::max(psi.hess_sup, psi.grad_sup), spec.s) *
              std::pow(1.0 + norm(v), spec.gamma + 2 * spec.s);
  res.ratio = res.bound > 0.0 ? std::abs(res.value) / res.bound : 0.0;
  return res;
}

namespace {

// Mean of |w - rho a|^gamma over a in S^2, |w| = W.
double shell_mean_3d(double W, double rho, double gamma) {
  const double hi = std::max(W, rho), lo = std::min(W, rho);
  if (lo <= 1e-8 * hi) return std::pow(hi, gamma);
  const double g2 = gamma + 2.0;
  return (std::pow(W + rho, g2) - std::pow(std::abs(W - rho), g2)) / (2.0 * g2 * W * rho);
}

}  // namespace

double potential_convolution(const DensityField& f, const Vec& v, double gamma,
                             const ConvolutionOptions& opt) {
  const int d = f.dim();
  require(v.dim() == d, Errc::InvalidParameter, "dimension mismatch");
  require(gamma > -d, Errc::InvalidParameter, "gamma must exceed -d");
  if (f.mass() == 0.0) return 0.0;
  const double sigma = f.scale();
  const Vec c = f.center();
  const Vec w = v - c;
  const double W = norm(w);
  const double R = opt.trunc_sigmas * sigma;

  if (d == 3 && f.isotropic() && gamma > -2.0) {
    // Exact angular average leaves a radial integral with a kink at rho = W.
    const Vec e = Vec::axis(3, 0);
    auto term = [&](double rho) {
      return 4.0 * kPi * rho * rho * f(c + rho * e) * shell_mean_3d(W, rho, gamma);
    };
    Rule1D r;
    if (W > 0.0 && W < R) {
      r = graded_gl_right(opt.order, 0.0, W, 1e-14 * W, 2.0, 0.5 * sigma);
      r.append(graded_gl(opt.order, W, R, 1e-14 * W, 2.0, 0.5 * sigma));
    } else {
      r = composite_gl(opt.order, int(std::ceil(R / (0.5 * sigma))), 0.0, R);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += r.w[i] * term(r.x[i]);
    return s;
  }

  const SphereRule sph = sphere_rule(d, opt.sphere_theta, opt.sphere_phi);
  double s = 0.0;
  if (W <= 4.0 * sigma) {
    // polar coordinates around v absorb the |v - v*|^gamma singularity
    const double Rv = W + R;
    const double h0 = 1e-12 * Rv;
    const Rule1D r = graded_gl(opt.order, 0.0, Rv, h0, 2.0, 0.5 * sigma);
    for (std::size_t i = 0; i < r.size(); ++i) {
      double ring = 0.0;
      for (std::size_t a = 0; a < sph.size(); ++a) ring += sph.w[a] * f(v + r.x[i] * sph.nodes[a]);
      s += r.w[i] * std::pow(r.x[i], gamma + d - 1) * ring;
    }
    s += f(v) * sphere_area(d - 1) * std::pow(h0, gamma + d) / (gamma + d);
  } else {
    const Rule1D r = composite_gl(opt.order, int(std::ceil(R / (0.5 * sigma))), 0.0, R);
    for (std::size_t i = 0; i < r.size(); ++i) {
      double ring = 0.0;
      for (std::size_t a = 0; a < sph.size(); ++a) {
        const Vec x = c + r.x[i] * sph.nodes[a];
        ring += sph.w[a] * std::pow(distance(v, x), gamma) * f(x);
      }
      s += r.w[i] * std::pow(r.x[i], d - 1) * ring;
    }
  }
  return s;
}

double cutoff_loss_rate(const DensityField& f, const Vec& v, const KernelSpec& spec,
                        const ConvolutionOptions& opt) {
  require(spec.cutoff, Errc::InvalidParameter, "loss rate needs a cutoff kernel");
  return spec.angular_integral() * potential_convolution(f, v, spec.gamma, opt);
}

double duhamel_factor(const LossHistory& h, double t1, double t2) {
  require(t1 <= t2, Errc::InvalidParameter, "need t1 <= t2");
  if (t1 == t2) return 1.0;
  require(h.t.size() == h.L.size() && h.t.size() >= 2, Errc::HistoryGap,
          "loss history needs at least two samples");
  for (std::size_t i = 1; i < h.t.size(); ++i)
    require(h.t[i] > h.t[i - 1], Errc::InvalidParameter, "history times must increase");
  require(h.t.front() <= t1 && h.t.back() >= t2, Errc::HistoryGap,
          "loss history does not cover [t1, t2]");
  auto interp = [&](std::size_t i, double t) {
    const double a = (t - h.t[i]) / (h.t[i + 1] - h.t[i]);
    return h.L[i] + a * (h.L[i + 1] - h.L[i]);
  };
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < h.t.size(); ++i) {
    const double lo = std::max(t1, h.t[i]), hi = std::min(t2, h.t[i + 1]);
    if (hi <= lo) continue;
    integral += 0.5 * (hi - lo) * (interp(i, lo) + interp(i, hi));
  }
  return std::exp(-integral);
}

double duhamel_lower_bound(double C, double t1, double t2, double R, double gamma) {
  require(t1 <= t2 && C >= 0.0 && R > 0.0, Errc::InvalidParameter, "bad bound parameters");
  return std::exp(-C * (t2 - t1) * (1.0 + std::pow(R, gamma)));
}

}  // namespace kten
