#pragma once
// Single-site disorder densities nu and their Fourier transforms. Two kinds:
// a centred Gaussian and the normalized smooth bump exp(-1/(1-w^2)) on
// (-1,1). nuhat_deriv gives d^k/dt^k of nuhat(t) = int e^{i w t} nu(w) dw;
// FProfile wraps f(t) = e^{zeta t} nuhat(t) and its derivatives, the
// single-site radial profile the supersymmetric integrands are built from.

#include <complex>
#include <vector>

namespace susy::disorder {

using cplx = std::complex<double>;

enum class Kind { gaussian, bump };

struct Disorder {
  Kind kind = Kind::gaussian;
  double sigma = 1.0;  // gaussian width; unused for bump

  double nu(double w) const;                  // probability density
  double nuhat(double t) const;               // real since nu is even
  double nuhat_deriv(int k, double t) const;  // d^k/dt^k nuhat
  cplx nuhat_c(int k, cplx t) const;          // complex argument variant
  double moment(int k) const;                 // int w^k nu(w) dw
  double support_radius() const;              // nu negligible beyond this
};

Disorder gaussian(double sigma = 1.0);
Disorder bump();

// f(t) = e^{zeta t} nuhat(t) with zeta = z / gamma; deriv(k, t) by the
// Leibniz rule. decay_rate gives W with |f(t)| <~ C e^{-W t} for t >= 0.
struct FProfile {
  Disorder d;
  cplx zeta{0.0, 0.0};

  cplx value(double t) const { return deriv(0, t); }
  cplx deriv(int k, double t) const;
  cplx deriv_c(int k, cplx t) const;
};

FProfile f_profile(const Disorder& d, cplx z, double gamma);

}  // namespace susy::disorder
