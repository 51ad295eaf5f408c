#pragma once
// 1D quadrature rules and a small cubic interpolation table.

#include <functional>
#include <vector>

namespace susy::quadrature {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre on [-1, 1]; nodes by Newton iteration on P_n.
const Rule& gauss_legendre(int n);

// Gauss-Hermite with weight exp(-x^2); Golub-Welsch.
const Rule& gauss_hermite(int n);

// Affine rescale of a rule to [a, b].
Rule rescaled(const Rule& r, double a, double b);

double integrate(const Rule& r, const std::function<double(double)>& f);

// Natural cubic spline on an increasing grid.
class Spline {
 public:
  Spline() = default;
  Spline(std::vector<double> x, std::vector<double> y);
  double operator()(double t) const;  // clamps outside the grid
  bool empty() const { return x_.empty(); }

 private:
  std::vector<double> x_, y_, m_;  // m_: second derivatives
};

}  // namespace susy::quadrature
