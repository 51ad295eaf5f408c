#include "susy/disorder.hpp"

#include "susy/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace susy::disorder {

namespace {

constexpr int kBumpNodes = 64;

// past this the true transform is below e^{-37}, smaller than the quadrature
// noise floor; report exact zero instead of noise
constexpr double kBumpCutoff = 700.0;

// e^{iwt} over w in [-1,1] needs O(|t|) nodes; bucket to keep the rule cache
// small.
int bump_nodes_for(double t) {
  double need = kBumpNodes + std::abs(t);
  int bucket = 64 * static_cast<int>(std::ceil(need / 64.0));
  return std::min(bucket, 1024);
}

// normalization of exp(-1/(1-w^2)) on (-1,1)
double bump_norm() {
  static const double c = [] {
    auto rule = quadrature::rescaled(quadrature::gauss_legendre(kBumpNodes), -1.0, 1.0);
    double s = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      double w = rule.nodes[j];
      s += rule.weights[j] * std::exp(-1.0 / (1.0 - w * w));
    }
    return 1.0 / s;
  }();
  return c;
}

double bump_density(double w) {
  if (std::abs(w) >= 1.0) return 0.0;
  return bump_norm() * std::exp(-1.0 / (1.0 - w * w));
}

// d^k/dt^k of exp(-a t^2 / 2): g_k = -a (t g_{k-1} + (k-1) g_{k-2})
template <typename T>
T gaussian_ft_deriv(double a, int k, T t) {
  T gm2 = std::exp(-0.5 * a * t * t);
  if (k == 0) return gm2;
  T gm1 = -a * t * gm2;
  for (int j = 2; j <= k; ++j) {
    T g = -a * (t * gm1 + static_cast<double>(j - 1) * gm2);
    gm2 = gm1;
    gm1 = g;
  }
  return gm1;
}

}  // namespace

double Disorder::nu(double w) const {
  if (kind == Kind::gaussian) {
    double x = w / sigma;
    return std::exp(-0.5 * x * x) / (sigma * std::sqrt(2.0 * std::numbers::pi));
  }
  return bump_density(w);
}

double Disorder::nuhat(double t) const { return nuhat_deriv(0, t); }

double Disorder::nuhat_deriv(int k, double t) const {
  if (k < 0) throw std::invalid_argument("nuhat_deriv: negative order");
  if (kind == Kind::gaussian) return gaussian_ft_deriv(sigma * sigma, k, t);
  if (std::abs(t) > kBumpCutoff) return 0.0;
  // d^k/dt^k int cos(w t) nu(w) dw = int w^k cos(w t + k pi/2) nu(w) dw
  auto rule =
      quadrature::rescaled(quadrature::gauss_legendre(bump_nodes_for(t)), -1.0, 1.0);
  double s = 0.0;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    double w = rule.nodes[j];
    s += rule.weights[j] * std::pow(w, k) *
         std::cos(w * t + 0.5 * k * std::numbers::pi) * bump_density(w);
  }
  return s;
}

cplx Disorder::nuhat_c(int k, cplx t) const {
  if (k < 0) throw std::invalid_argument("nuhat_c: negative order");
  if (kind == Kind::gaussian) return gaussian_ft_deriv(sigma * sigma, k, t);
  if (std::abs(t) > kBumpCutoff) return cplx(0.0, 0.0);
  auto rule = quadrature::rescaled(
      quadrature::gauss_legendre(bump_nodes_for(std::abs(t))), -1.0, 1.0);
  const cplx i(0.0, 1.0);
  cplx s(0.0, 0.0);
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    double w = rule.nodes[j];
    s += rule.weights[j] * std::pow(i * w, k) * std::exp(i * w * t) * bump_density(w);
  }
  return s;
}

double Disorder::moment(int k) const {
  if (k < 0) throw std::invalid_argument("moment: negative order");
  if (k % 2 == 1) return 0.0;  // both densities are even
  if (kind == Kind::gaussian) {
    double m = 1.0;  // (k-1)!! sigma^k
    for (int j = k - 1; j > 0; j -= 2) m *= j;
    return m * std::pow(sigma, k);
  }
  auto rule = quadrature::rescaled(quadrature::gauss_legendre(kBumpNodes), -1.0, 1.0);
  double s = 0.0;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j)
    s += rule.weights[j] * std::pow(rule.nodes[j], k) * bump_density(rule.nodes[j]);
  return s;
}

double Disorder::support_radius() const {
  return kind == Kind::gaussian ? 10.0 * sigma : 1.0;
}

Disorder gaussian(double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("gaussian: sigma must be positive");
  return Disorder{Kind::gaussian, sigma};
}

Disorder bump() { return Disorder{Kind::bump, 0.0}; }

namespace {
double binom(int n, int k) {
  double b = 1.0;
  for (int j = 1; j <= k; ++j) b *= static_cast<double>(n - k + j) / j;
  return b;
}
}  // namespace

cplx FProfile::deriv(int k, double t) const {
  cplx s(0.0, 0.0);
  cplx zp(1.0, 0.0);
  for (int j = 0; j <= k; ++j) {
    s += binom(k, j) * zp * d.nuhat_deriv(k - j, t);
    zp *= zeta;
  }
  return s * std::exp(zeta * t);
}

cplx FProfile::deriv_c(int k, cplx t) const {
  cplx s(0.0, 0.0);
  cplx zp(1.0, 0.0);
  for (int j = 0; j <= k; ++j) {
    s += binom(k, j) * zp * d.nuhat_c(k - j, t);
    zp *= zeta;
  }
  return s * std::exp(zeta * t);
}

FProfile f_profile(const Disorder& d, cplx z, double gamma) {
  if (gamma <= 0.0) throw std::invalid_argument("f_profile: gamma must be positive");
  return FProfile{d, z / gamma};
}

}  // namespace susy::disorder
