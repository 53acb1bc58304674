#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <initializer_list>
#include <ostream>

namespace kten {

/// Velocity-space vector of runtime dimension 2 or 3.
///
/// Storage is fixed-size so vectors stay trivially copyable in the particle
/// loops; the active dimension travels with the value.
class Vec {
 public:
  static constexpr int kMaxDim = 3;

  Vec() = default;
  explicit Vec(int dim) : dim_(dim) { assert(dim >= 1 && dim <= kMaxDim); }
  Vec(std::initializer_list<double> xs) : dim_(static_cast<int>(xs.size())) {
    assert(dim_ >= 1 && dim_ <= kMaxDim);
    int i = 0;
    for (double x : xs) c_[i++] = x;
  }

  static Vec axis(int dim, int k, double length = 1.0) {
    Vec v(dim);
    v[k] = length;
    return v;
  }

  int dim() const { return dim_; }
  double operator[](int i) const { return c_[i]; }
  double& operator[](int i) { return c_[i]; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < dim_; ++i) c_[i] += o.c_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < dim_; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Vec& operator*=(double a) {
    for (int i = 0; i < dim_; ++i) c_[i] *= a;
    return *this;
  }
  Vec& operator/=(double a) { return *this *= (1.0 / a); }

  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(Vec a, double s) { return a *= s; }
  friend Vec operator*(double s, Vec a) { return a *= s; }
  friend Vec operator/(Vec a, double s) { return a /= s; }
  friend Vec operator-(Vec a) { return a *= -1.0; }

  friend bool operator==(const Vec& a, const Vec& b) {
    if (a.dim_ != b.dim_) return false;
    for (int i = 0; i < a.dim_; ++i)
      if (a.c_[i] != b.c_[i]) return false;
    return true;
  }

  bool finite() const {
    for (int i = 0; i < dim_; ++i)
      if (!std::isfinite(c_[i])) return false;
    return true;
  }

 private:
  std::array<double, kMaxDim> c_{};
  int dim_ = 0;
};

inline double dot(const Vec& a, const Vec& b) {
  assert(a.dim() == b.dim());
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return dot(a, a); }
inline double norm(const Vec& a) { return std::sqrt(norm2(a)); }
inline double distance(const Vec& a, const Vec& b) { return norm(a - b); }

inline Vec normalized(const Vec& a) { return a / norm(a); }

inline std::ostream& operator<<(std::ostream& os, const Vec& v) {
  os << '(';
  for (int i = 0; i < v.dim(); ++i) os << (i ? ", " : "") << v[i];
  return os << ')';
}

/// Orthonormal basis of the hyperplane orthogonal to a unit vector.
/// Returns d-1 vectors; for d = 2 the single vector is the +90 degree rotation.
struct PlaneBasis {
  std::array<Vec, Vec::kMaxDim - 1> e{};
  int count = 0;
};

inline PlaneBasis orthogonal_basis(const Vec& n) {
  PlaneBasis pb;
  const int d = n.dim();
  if (d == 2) {
    pb.e[0] = Vec{-n[1], n[0]};
    pb.count = 1;
    return pb;
  }
  // pick the coordinate axis least aligned with n
  int k = 0;
  for (int i = 1; i < d; ++i)
    if (std::abs(n[i]) < std::abs(n[k])) k = i;
  Vec t = Vec::axis(d, k);
  t -= dot(t, n) * n;
  t = normalized(t);
  Vec w(d);
  w[0] = n[1] * t[2] - n[2] * t[1];
  w[1] = n[2] * t[0] - n[0] * t[2];
  w[2] = n[0] * t[1] - n[1] * t[0];
  pb.e[0] = t;
  pb.e[1] = w;
  pb.count = 2;
  return pb;
}

}  // namespace kten
