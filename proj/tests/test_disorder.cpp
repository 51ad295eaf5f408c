#include <doctest.h>

#include "susy/disorder.hpp"
#include "susy/quadrature.hpp"

#include <cmath>
#include <complex>

using namespace susy::disorder;

namespace {
double quad_nu(const Disorder& d, int k) {
  auto rule = susy::quadrature::rescaled(susy::quadrature::gauss_legendre(200),
                                         -d.support_radius(), d.support_radius());
  double s = 0.0;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j)
    s += rule.weights[j] * std::pow(rule.nodes[j], k) * d.nu(rule.nodes[j]);
  return s;
}
}  // namespace

TEST_CASE("densities are normalized and even") {
  for (auto d : {gaussian(1.0), gaussian(0.7), bump()}) {
    CHECK(quad_nu(d, 0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(d.nuhat(0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.nu(0.4) == doctest::Approx(d.nu(-0.4)).epsilon(1e-14));
    CHECK(std::abs(d.moment(3)) < 1e-14);
  }
}

TEST_CASE("gaussian transform is the gaussian") {
  auto d = gaussian(1.3);
  for (double t : {0.0, 0.5, 2.0, -1.7})
    CHECK(d.nuhat(t) == doctest::Approx(std::exp(-0.5 * 1.3 * 1.3 * t * t)).epsilon(1e-14));
  CHECK(d.moment(2) == doctest::Approx(1.3 * 1.3).epsilon(1e-14));
  CHECK(d.moment(4) == doctest::Approx(3.0 * std::pow(1.3, 4)).epsilon(1e-14));
}

TEST_CASE("bump transform matches the moment series at small t") {
  auto d = bump();
  for (double t : {0.0, 0.05, 0.2}) {
    double series = 0.0, tp = 1.0;
    for (int j = 0; j <= 8; ++j) {
      series += (j % 2 ? -1.0 : 1.0) * d.moment(2 * j) * tp / std::tgamma(2.0 * j + 1.0);
      tp *= t * t;
    }
    CHECK(d.nuhat(t) == doctest::Approx(series).epsilon(1e-10));
  }
  // transform moments against direct quadrature of nu (different rules)
  CHECK(d.moment(2) == doctest::Approx(quad_nu(d, 2)).epsilon(1e-10));
  CHECK(-d.nuhat_deriv(2, 0.0) == doctest::Approx(d.moment(2)).epsilon(1e-10));
}

TEST_CASE("derivatives agree with finite differences") {
  double h = 1e-5;
  for (auto d : {gaussian(1.0), bump()})
    for (int k : {1, 2, 3})
      for (double t : {0.3, 1.1}) {
        double fd = (d.nuhat_deriv(k - 1, t + h) - d.nuhat_deriv(k - 1, t - h)) / (2 * h);
        CHECK(d.nuhat_deriv(k, t) == doctest::Approx(fd).epsilon(1e-7));
      }
}

TEST_CASE("bump transform stays accurate at large argument") {
  // oscillatory quadrature sanity: integration by parts says |nuhat(t)| <= C/t^2
  auto d = bump();
  CHECK(std::abs(d.nuhat(500.0)) < 1e-3);
  // brute-force oracle with a much denser rule
  double t = 80.0;
  auto rule = susy::quadrature::rescaled(susy::quadrature::gauss_legendre(4096), -1.0, 1.0);
  double dense = 0.0, norm = 0.0;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    double w = rule.nodes[j];
    double nu = std::abs(w) < 1.0 ? std::exp(-1.0 / (1.0 - w * w)) : 0.0;
    dense += rule.weights[j] * std::cos(w * t) * nu;
    norm += rule.weights[j] * nu;
  }
  // both rules are converged; the floor is the absolute rounding noise
  CHECK(std::abs(d.nuhat(t) - dense / norm) < 1e-12);
}

TEST_CASE("profile derivatives follow the Leibniz rule") {
  auto f = f_profile(gaussian(1.0), cplx(-0.1, 0.3), 2.0);
  double h = 1e-5;
  for (int k : {1, 2})
    for (double t : {0.0, 0.8}) {
      cplx fd = (f.deriv(k - 1, t + h) - f.deriv(k - 1, t - h)) / (2 * h);
      CHECK(std::abs(f.deriv(k, t) - fd) < 1e-7);
    }
  // complex-argument variant agrees on the real axis
  CHECK(std::abs(f.deriv_c(2, cplx(0.8, 0.0)) - f.deriv(2, 0.8)) < 1e-12);
}
