#include "kten/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace kten {

Space::Space(int d) : d_(d) {
  require(d == 2 || d == 3, Errc::InvalidParameter,
          "dimension must be 2 or 3, got " + std::to_string(d));
}

void Space::check(const Vec& v) const {
  require(v.dim() == d_, Errc::InvalidParameter, "vector dimension mismatch");
  require(v.finite(), Errc::InvalidParameter, "non-finite vector component");
}

double sphere_area(int k) {
  // |S^k| = 2 pi^{(k+1)/2} / Gamma((k+1)/2)
  const double h = 0.5 * (k + 1);
  return 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
}

double ball_volume(int k) {
  const double h = 0.5 * k;
  return std::pow(std::numbers::pi, h) / std::tgamma(h + 1.0);
}

RestitutionParams RestitutionParams::from_alpha(double alpha) {
  require(std::isfinite(alpha) && alpha > 0.0 && alpha < 1.0, Errc::InvalidParameter,
          "restitution alpha must lie in (0, 1)");
  return {alpha, 0.5 * (1.0 + alpha)};
}

RestitutionParams RestitutionParams::from_beta(double beta) {
  require(std::isfinite(beta) && beta > 0.5 && beta < 1.0, Errc::InvalidParameter,
          "beta must lie in (1/2, 1), got " + std::to_string(beta));
  return {2.0 * beta - 1.0, beta};
}

MassPair::MassPair(double mi, double mj) : m_i(mi), m_j(mj) {
  require(std::isfinite(mi) && std::isfinite(mj) && mi > 0.0 && mj > 0.0,
          Errc::InvalidParameter, "masses must be positive and finite");
}

namespace {

void check_unit(const Vec& n, Errc code) {
  require(std::abs(norm(n) - 1.0) <= 1e-12, code, "direction is not a unit vector");
}

}  // namespace

PostCollision inelastic_post_sigma(const Vec& v, const Vec& v_star, const Vec& sigma,
                                   const RestitutionParams& p) {
  check_unit(sigma, Errc::InvalidParameter);
  const Vec g = v - v_star;
  const double gn = norm(g);
  if (gn == 0.0) return {v, v_star, true};
  const double b = p.beta;
  const Vec mid = 0.5 * (v + v_star);
  const Vec shift = (0.5 * (1.0 - b)) * g + (0.5 * b * gn) * sigma;
  return {mid + shift, mid - shift, false};
}

PostCollision inelastic_post_n(const Vec& v, const Vec& v_star, const Vec& n,
                               const RestitutionParams& p) {
  check_unit(n, Errc::NonUnitNormal);
  const Vec g = v - v_star;
  if (norm2(g) == 0.0) return {v, v_star, true};
  const Vec dv = (p.beta * dot(g, n)) * n;
  return {v - dv, v_star + dv, false};
}

PostCollision mixture_post_sigma(const Vec& v, const Vec& v_star, const Vec& sigma,
                                 const MassPair& m) {
  check_unit(sigma, Errc::InvalidParameter);
  const Vec g = v - v_star;
  const double gn = norm(g);
  if (gn == 0.0) return {v, v_star, true};
  const double M = m.total();
  const Vec cm = (m.m_i / M) * v + (m.m_j / M) * v_star;
  return {cm + (m.m_j / M * gn) * sigma, cm - (m.m_i / M * gn) * sigma, false};
}

PostCollision mixture_post_n(const Vec& v, const Vec& v_star, const Vec& n, const MassPair& m) {
  check_unit(n, Errc::NonUnitNormal);
  const Vec g = v - v_star;
  if (norm2(g) == 0.0) return {v, v_star, true};
  const double gn = dot(g, n);
  const double M = m.total();
  return {v - (2.0 * m.m_j / M * gn) * n, v_star + (2.0 * m.m_i / M * gn) * n, false};
}

Vec normal_from_sigma(const Vec& v, const Vec& v_prime) {
  const Vec dv = v - v_prime;
  const double len = norm(dv);
  require(len > 0.0, Errc::ZeroRelativeVelocity, "grazing collision has no normal");
  return dv / len;
}

InelasticAux aux_points_inelastic(const Vec& v, const Vec& v_star, const Vec& v_prime,
                                  const RestitutionParams& p) {
  const double ib = 1.0 / p.beta;
  const Vec P = ib * v_prime - (ib - 1.0) * v;
  const Vec Q = (1.0 - p.beta) * v + p.beta * v_star;
  return {P, Q, dot(P - v, P - v_star), dot(v_prime - Q, v_prime - v)};
}

MixtureAux aux_points_mixture(const Vec& v, const Vec& v_star, const Vec& v_prime,
                              const Vec& v_star_prime, const MassPair& m) {
  require(m.m_i != m.m_j, Errc::EqualMasses, "equal masses use the mono-species path");
  const double M = m.total(), mi = m.m_i, mj = m.m_j;
  MixtureAux out{};
  if (mi < mj) {
    out.light_on_heavy = true;
    out.first = (M / (2 * mj)) * v + ((mj - mi) / (2 * mj)) * v_prime;
    out.second = (2 * mj / M) * v_star_prime - ((mj - mi) / M) * v_prime;
    out.residual_first = dot(out.first - v_prime, out.first - v_star_prime);
    out.residual_second = dot(v - out.second, v - v_prime);
  } else {
    out.light_on_heavy = false;
    out.first = (M / (2 * mj)) * v_prime - ((mi - mj) / (2 * mj)) * v;
    out.second = ((mi - mj) / M) * v + (2 * mj / M) * v_star;
    out.residual_first = dot(out.first - v, out.first - v_star);
    out.residual_second = dot(out.second - v_prime, v - v_prime);
  }
  return out;
}

namespace {

HalfAngle normalize_half(double c, double s) {
  // Rounding can push c^2 + s^2 slightly off 1; renormalize.
  const double r = std::hypot(c, s);
  return {c / r, s / r};
}

}  // namespace

HalfAngle half_angle_inelastic(const Vec& v, const Vec& v_star, const Vec& v_prime,
                               const RestitutionParams& p) {
  const double scale = p.beta * distance(v, v_star);
  require(scale > 0.0, Errc::ZeroRelativeVelocity, "half angle undefined for v == v_star");
  const Vec Q = (1.0 - p.beta) * v + p.beta * v_star;
  return normalize_half(distance(Q, v_prime) / scale, distance(v, v_prime) / scale);
}

HalfAngle half_angle_mixture(const Vec& v, const Vec& v_star, const Vec& v_prime,
                             const MassPair& m) {
  const double scale = m.chi() * distance(v, v_star);
  require(scale > 0.0, Errc::ZeroRelativeVelocity, "half angle undefined for v == v_star");
  const double M = m.total();
  double c;
  if (m.m_i <= m.m_j) {
    // v*' recovered from momentum conservation
    const Vec vsp = v_star + (m.m_i / m.m_j) * (v - v_prime);
    const Vec Q = m.chi() * vsp - ((m.m_j - m.m_i) / M) * v_prime;
    c = distance(v, Q);
  } else {
    const Vec S = ((m.m_i - m.m_j) / M) * v + m.chi() * v_star;
    c = distance(S, v_prime);
  }
  return normalize_half(c / scale, distance(v, v_prime) / scale);
}

}  // namespace kten
