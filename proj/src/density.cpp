#include "kten/density.hpp"

#include <cmath>
#include <numbers>

#include "kten/error.hpp"

namespace kten {

GaussianDensity::GaussianDensity(int d, double mass, double temperature, Vec center)
    : d_(d), mass_(mass), T_(temperature), c_(center.dim() == 0 ? Vec(d) : center) {
  require(d == 2 || d == 3, Errc::InvalidParameter, "dimension must be 2 or 3");
  require(mass >= 0.0 && temperature > 0.0, Errc::InvalidParameter,
          "Gaussian needs mass >= 0 and temperature > 0");
  require(c_.dim() == d, Errc::InvalidParameter, "center dimension mismatch");
  norm_ = mass_ * std::pow(2.0 * std::numbers::pi * T_, -0.5 * d_);
}

double GaussianDensity::operator()(const Vec& v) const {
  return norm_ * std::exp(-0.5 * norm2(v - c_) / T_);
}

double GaussianDensity::energy() const { return mass_ * (d_ * T_ + norm2(c_)); }

HistogramDensity::HistogramDensity(const std::vector<Vec>& samples, double weight,
                                   double half_width, int bins)
    : bins_(bins), L_(half_width) {
  require(!samples.empty(), Errc::InvalidParameter, "histogram needs samples");
  require(half_width > 0.0 && bins > 0, Errc::InvalidParameter, "bad histogram grid");
  d_ = samples.front().dim();
  h_ = 2.0 * L_ / bins_;
  std::size_t cells = 1;
  for (int k = 0; k < d_; ++k) cells *= std::size_t(bins_);
  f_.assign(cells, 0.0);
  c_ = Vec(d_);
  mass_ = 0.0;
  energy_ = 0.0;
  for (const Vec& v : samples) {
    mass_ += weight;
    energy_ += weight * norm2(v);
    c_ += weight * v;
    std::size_t idx = 0;
    bool inside = true;
    for (int k = 0; k < d_; ++k) {
      const double t = std::floor((v[k] + L_) / h_);
      if (t < 0 || t >= bins_) {
        inside = false;
        break;
      }
      idx = idx * std::size_t(bins_) + std::size_t(t);
    }
    if (inside) f_[idx] += weight;
  }
  c_ /= mass_;
  const double cell_vol = std::pow(h_, d_);
  for (double& x : f_) x /= cell_vol;
  scale_ = std::sqrt(std::max(1e-300, (energy_ / mass_ - norm2(c_)) / d_));
}

double HistogramDensity::operator()(const Vec& v) const {
  std::size_t idx = 0;
  for (int k = 0; k < d_; ++k) {
    const double t = std::floor((v[k] + L_) / h_);
    if (t < 0 || t >= bins_) return 0.0;
    idx = idx * std::size_t(bins_) + std::size_t(t);
  }
  return f_[idx];
}

}  // namespace kten
