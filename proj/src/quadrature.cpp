#include "kten/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "kten/error.hpp"

namespace kten {

void Rule1D::append(const Rule1D& o) {
  x.insert(x.end(), o.x.begin(), o.x.end());
  w.insert(w.end(), o.w.begin(), o.w.end());
}

namespace {

// Boost stores the nonnegative half of the symmetric rule.
template <unsigned N>
Rule1D boost_rule(double a, double b) {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& ab = G::abscissa();
  const auto& wt = G::weights();
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  Rule1D r;
  r.x.reserve(N);
  r.w.reserve(N);
  for (std::size_t i = ab.size(); i-- > 0;) {
    if (ab[i] == 0.0) continue;
    r.x.push_back(c - h * ab[i]);
    r.w.push_back(h * wt[i]);
  }
  for (std::size_t i = 0; i < ab.size(); ++i) {
    r.x.push_back(c + h * ab[i]);
    r.w.push_back(h * wt[i]);
  }
  return r;
}

}  // namespace

Rule1D gauss_legendre(int n, double a, double b) {
  switch (n) {
    case 2: return boost_rule<2>(a, b);
    case 4: return boost_rule<4>(a, b);
    case 6: return boost_rule<6>(a, b);
    case 8: return boost_rule<8>(a, b);
    case 10: return boost_rule<10>(a, b);
    case 12: return boost_rule<12>(a, b);
    case 16: return boost_rule<16>(a, b);
    case 20: return boost_rule<20>(a, b);
    case 24: return boost_rule<24>(a, b);
    case 32: return boost_rule<32>(a, b);
    case 48: return boost_rule<48>(a, b);
    case 64: return boost_rule<64>(a, b);
    default: fail(Errc::InvalidParameter, "unsupported Gauss-Legendre order " + std::to_string(n));
  }
}

Rule1D composite_gl(int order, int panels, double a, double b) {
  Rule1D r;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) r.append(gauss_legendre(order, a + p * h, a + (p + 1) * h));
  return r;
}

Rule1D graded_gl(int order, double a, double b, double h0, double ratio, double hmax) {
  require(b > a && h0 > 0.0 && ratio > 1.0, Errc::InvalidParameter, "bad graded mesh");
  Rule1D r;
  double lo = a + h0;
  if (lo >= b) return gauss_legendre(order, a, b);
  double h = h0 * (ratio - 1.0);
  while (lo < b) {
    const double hi = std::min(b, lo + std::min(hmax, std::max(h, 1e-300)));
    // avoid a sliver at the end
    const double end = (b - hi < 0.25 * (hi - lo)) ? b : hi;
    r.append(gauss_legendre(order, lo, end));
    lo = end;
    h *= ratio;
  }
  return r;
}

Rule1D graded_gl_right(int order, double a, double b, double h0, double ratio, double hmax) {
  Rule1D m = graded_gl(order, -b, -a, h0, ratio, hmax);
  Rule1D r;
  for (std::size_t i = m.size(); i-- > 0;) {
    r.x.push_back(-m.x[i]);
    r.w.push_back(m.w[i]);
  }
  return r;
}

SphereRule sphere_rule(int d, int n_theta, int n_phi) {
  require(n_phi >= 2 && n_phi % 2 == 0, Errc::InvalidParameter, "n_phi must be even");
  SphereRule s;
  const double two_pi = 2.0 * std::numbers::pi;
  if (d == 2) {
    for (int k = 0; k < n_phi; ++k) {
      const double t = two_pi * k / n_phi;
      s.nodes.push_back(Vec{std::cos(t), std::sin(t)});
      s.w.push_back(two_pi / n_phi);
    }
    return s;
  }
  require(d == 3, Errc::InvalidParameter, "sphere rule supports d = 2, 3");
  require(n_theta % 2 == 0, Errc::InvalidParameter, "n_theta must be even");
  const Rule1D z = gauss_legendre(n_theta, -1.0, 1.0);
  // First half, then antipodes in the same order.
  std::vector<Vec> half;
  std::vector<double> hw;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z.x[i] < 0.0) continue;
    const double st = std::sqrt(std::max(0.0, 1.0 - z.x[i] * z.x[i]));
    for (int k = 0; k < n_phi; ++k) {
      const double t = two_pi * k / n_phi;
      half.push_back(Vec{st * std::cos(t), st * std::sin(t), z.x[i]});
      hw.push_back(z.w[i] * two_pi / n_phi);
    }
  }
  for (std::size_t i = 0; i < half.size(); ++i) {
    s.nodes.push_back(half[i]);
    s.w.push_back(hw[i]);
  }
  for (std::size_t i = 0; i < half.size(); ++i) {
    s.nodes.push_back(-half[i]);
    s.w.push_back(hw[i]);
  }
  return s;
}

SphereRule subsphere_rule(const Vec& normal, int n) {
  const PlaneBasis pb = orthogonal_basis(normal);
  SphereRule s;
  if (normal.dim() == 2) {
    s.nodes = {pb.e[0], -pb.e[0]};
    s.w = {1.0, 1.0};
    return s;
  }
  const double two_pi = 2.0 * std::numbers::pi;
  for (int k = 0; k < n; ++k) {
    const double t = two_pi * k / n;
    s.nodes.push_back(std::cos(t) * pb.e[0] + std::sin(t) * pb.e[1]);
    s.w.push_back(two_pi / n);
  }
  return s;
}

}  // namespace kten
