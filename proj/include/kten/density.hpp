#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "kten/vec.hpp"

namespace kten {

// Velocity-space density f(v) >= 0. Implementations must be safe for
// concurrent evaluation.
class DensityField {
 public:
  virtual ~DensityField() = default;
  virtual double operator()(const Vec& v) const = 0;
  virtual int dim() const = 0;
  virtual double mass() const = 0;          // M_0 = int f
  virtual double energy() const = 0;        // E_0 = int f |v|^2
  virtual Vec center() const = 0;           // where the bulk sits
  virtual double scale() const = 0;         // per-component spread
  virtual bool analytic() const = 0;
  virtual bool isotropic() const { return false; }  // radially symmetric about center()
};

// M (2 pi T)^{-d/2} exp(-|v - c|^2 / 2T)
class GaussianDensity final : public DensityField {
 public:
  GaussianDensity(int d, double mass = 1.0, double temperature = 1.0, Vec center = Vec());
  double operator()(const Vec& v) const override;
  int dim() const override { return d_; }
  double mass() const override { return mass_; }
  double energy() const override;
  Vec center() const override { return c_; }
  double scale() const override { return std::sqrt(T_); }
  bool analytic() const override { return true; }
  bool isotropic() const override { return true; }

 private:
  int d_;
  double mass_, T_, norm_;
  Vec c_;
};

class ZeroDensity final : public DensityField {
 public:
  explicit ZeroDensity(int d) : d_(d) {}
  double operator()(const Vec&) const override { return 0.0; }
  int dim() const override { return d_; }
  double mass() const override { return 0.0; }
  double energy() const override { return 0.0; }
  Vec center() const override { return Vec(d_); }
  double scale() const override { return 1.0; }
  bool analytic() const override { return true; }

 private:
  int d_;
};

// Piecewise-constant density from particle samples on a uniform cubic grid
// covering [-L, L]^d; each particle carries `weight`.
class HistogramDensity final : public DensityField {
 public:
  HistogramDensity(const std::vector<Vec>& samples, double weight, double half_width, int bins);
  double operator()(const Vec& v) const override;
  int dim() const override { return d_; }
  double mass() const override { return mass_; }
  double energy() const override { return energy_; }
  Vec center() const override { return c_; }
  double scale() const override { return scale_; }
  bool analytic() const override { return false; }

 private:
  int d_, bins_;
  double L_, h_, mass_, energy_, scale_;
  Vec c_;
  std::vector<double> f_;
};

}  // namespace kten
