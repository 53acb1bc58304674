#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "kten/vec.hpp"

namespace kten {

struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
  std::size_t size() const { return x.size(); }
  void append(const Rule1D& o);
};

// Gauss-Legendre rule mapped to [a, b]. Supported orders: 2, 4, 6, 8, 10, 12,
// 16, 20, 24, 32, 48, 64.
Rule1D gauss_legendre(int n, double a, double b);

// Composite Gauss-Legendre with `panels` equal panels on [a, b].
Rule1D composite_gl(int order, int panels, double a, double b);

// Panels whose widths grow geometrically away from `a` (ratio > 1), capped at
// hmax, covering [a + h0, b]; the sliver [a, a + h0] is left to the caller.
Rule1D graded_gl(int order, double a, double b, double h0, double ratio,
                 double hmax = std::numeric_limits<double>::infinity());

// Same grading mirrored: panels shrink toward `b`.
Rule1D graded_gl_right(int order, double a, double b, double h0, double ratio,
                       double hmax = std::numeric_limits<double>::infinity());

// Rule on the unit sphere S^{d-1} (d = 2 or 3) with weights summing to its area.
// Node sets are symmetric under x -> -x, and node i+n/2 is the antipode of node i.
struct SphereRule {
  std::vector<Vec> nodes;
  std::vector<double> w;
  std::size_t size() const { return nodes.size(); }
};

// d = 2: n_phi equispaced angles (n_phi even). d = 3: Gauss-Legendre in cos(theta)
// (n_theta even) times n_phi equispaced azimuths.
SphereRule sphere_rule(int d, int n_theta, int n_phi);

// Rule on the unit sphere of the (d-1)-dimensional subspace orthogonal to `normal`.
// d = 3: a circle with n nodes; d = 2: the two points +-e (weights 1 each).
SphereRule subsphere_rule(const Vec& normal, int n);

}  // namespace kten
