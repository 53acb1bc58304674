#pragma once

#include "kten/error.hpp"
#include "kten/vec.hpp"

namespace kten {

// Dimension context, validated once. Only d = 2 and d = 3 are supported.
class Space {
 public:
  explicit Space(int d);
  int d() const { return d_; }
  Vec zero() const { return Vec(d_); }
  void check(const Vec& v) const;  // throws InvalidParameter on dim or finiteness

 private:
  int d_;
};

// Area of the unit sphere S^{k}; |S^0| = 2 (counting measure on two points).
double sphere_area(int k);
// Volume of the unit ball in R^k.
double ball_volume(int k);

struct RestitutionParams {
  double alpha;
  double beta;
  static RestitutionParams from_alpha(double alpha);  // requires 0 < alpha < 1
  static RestitutionParams from_beta(double beta);    // requires 1/2 < beta < 1
};

struct MassPair {
  double m_i;
  double m_j;
  MassPair(double mi, double mj);
  double total() const { return m_i + m_j; }
  // 2 m_j / (m_i + m_j): the scattering amplitude seen by species i.
  double chi() const { return 2.0 * m_j / (m_i + m_j); }
};

struct PostCollision {
  Vec v_prime;
  Vec v_star_prime;
  bool degenerate = false;  // |v - v_star| == 0; inputs returned unchanged
};

PostCollision inelastic_post_sigma(const Vec& v, const Vec& v_star, const Vec& sigma,
                                   const RestitutionParams& p);
PostCollision inelastic_post_n(const Vec& v, const Vec& v_star, const Vec& n,
                               const RestitutionParams& p);
PostCollision mixture_post_sigma(const Vec& v, const Vec& v_star, const Vec& sigma,
                                 const MassPair& m);
PostCollision mixture_post_n(const Vec& v, const Vec& v_star, const Vec& n, const MassPair& m);

// Unit normal n that reproduces a sigma-form collision in the n-form.
Vec normal_from_sigma(const Vec& v, const Vec& v_prime);

struct InelasticAux {
  Vec P;
  Vec Q;
  double residual_P;  // <P - v, P - v_star>
  double residual_Q;  // <v' - Q, v' - v>
};

InelasticAux aux_points_inelastic(const Vec& v, const Vec& v_star, const Vec& v_prime,
                                  const RestitutionParams& p);

struct MixtureAux {
  bool light_on_heavy;  // m_i < m_j: (first, second) = (P, Q); otherwise (R, S)
  Vec first;
  Vec second;
  // light_on_heavy: <P - v', P - v*'> and <v - Q, v - v'>
  // heavy_on_light: <R - v, R - v*>   and <S - v', v - v'>
  double residual_first;
  double residual_second;
};

MixtureAux aux_points_mixture(const Vec& v, const Vec& v_star, const Vec& v_prime,
                              const Vec& v_star_prime, const MassPair& m);

struct HalfAngle {
  double cos_half;
  double sin_half;
};

HalfAngle half_angle_inelastic(const Vec& v, const Vec& v_star, const Vec& v_prime,
                               const RestitutionParams& p);
HalfAngle half_angle_mixture(const Vec& v, const Vec& v_star, const Vec& v_prime,
                             const MassPair& m);

}  // namespace kten
