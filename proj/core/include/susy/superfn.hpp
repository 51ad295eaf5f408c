#pragma once
// Superfunctions: maps from bosonic points to Grassmann elements, with the
// flat measure prod (1/pi) dphi1 dphi2 per (site, colour), numerical
// superintegration, the super Fourier transform and the supersymmetry
// generator.

#include "susy/grassmann.hpp"
#include "susy/rng.hpp"

#include <complex>
#include <functional>
#include <vector>

namespace susy::superfn {

using grassmann::cplx;
using grassmann::ContextPtr;
using grassmann::Element;
using grassmann::Family;
using grassmann::Site;

struct SiteColour {
  Site site{0, 0, 0};
  int colour = 0;
  friend auto operator<=>(const SiteColour&, const SiteColour&) = default;
};

// Ordered list of bosonic degrees of freedom (one complex phi+ per entry,
// phi- is the conjugate on the real slice).
class BosonicLayout {
 public:
  BosonicLayout() = default;
  explicit BosonicLayout(std::vector<SiteColour> entries);
  std::size_t size() const { return entries_.size(); }
  const SiteColour& entry(std::size_t i) const { return entries_[i]; }
  const std::vector<SiteColour>& entries() const { return entries_; }
  std::size_t index(const SiteColour& sc) const;  // throws when absent

  // psi-family Grassmann context with both charges per entry.
  ContextPtr context(Family fam = Family::psi) const;

 private:
  std::vector<SiteColour> entries_;
};

struct BosonicPoint {
  std::vector<cplx> phi;  // phi+ values aligned with a BosonicLayout
  static BosonicPoint zero(std::size_t n) { return BosonicPoint{std::vector<cplx>(n, cplx{})}; }
};

// Radial envelope: |coefficients of f(phi)| <= amplitude * prod_i profile(|phi_i|^2).
struct Envelope {
  double amplitude = 1.0;
  std::function<double(double)> profile;  // decreasing, integrable against r dr
};

struct SuperFunction {
  BosonicLayout layout;
  ContextPtr ctx;  // Grassmann context of the values
  std::function<Element(const BosonicPoint&)> eval;
  Envelope envelope;
  Family fermion_family = Family::psi;  // family paired with the layout
};

enum class IntegratorKind { gauss_legendre, monte_carlo, importance };

struct Integrator {
  IntegratorKind kind = IntegratorKind::gauss_legendre;
  int nodes = 32;            // per real dimension (quadrature)
  long samples = 100000;     // Monte Carlo
  std::uint64_t seed = 1;
  double radius = 0.0;       // 0: derive from the envelope
  int threads = 1;
  bool estimate_error = true;  // quadrature only: second coarse pass
};

struct IntegralResult {
  cplx value{};
  double error = 0.0;  // MC standard error, or a node-refinement estimate
};

// Truncation radius R with envelope tail mass below tol (per complex plane).
double envelope_radius(const Envelope& env, double tol = 1e-12);

// Draw |phi| from the normalized radial density profile(r^2) r dr via an
// inverse-CDF table; returns radius and the density value at it.
class RadialSampler {
 public:
  RadialSampler(const Envelope& env, double radius, int table = 512);
  double sample(double u, double* density) const;
  double density_at(double r) const;

 private:
  std::vector<double> r_, cdf_;
  std::vector<double> pdf_;
  double norm_ = 1.0;
};

struct ElementIntegral {
  Element value;
  double error = 0.0;
};

// Flat bosonic integration of an element-valued integrand; no Berezin step.
// Integrand values are re-expressed on value_ctx, so per-call contexts with
// the same generator set are fine.
ElementIntegral integrate_element(const BosonicLayout& layout, const Envelope& env,
                                  const ContextPtr& value_ctx,
                                  const std::function<Element(const BosonicPoint&)>& f,
                                  const Integrator& how);

// int dPhi f: Berezin integral over all psi generators of the layout composed
// with the flat bosonic integral. Scalar result (remaining Grassmann content,
// if any, must integrate pointwise; the scalar part is returned and any
// nonscalar residue raises).
IntegralResult super_integrate(const SuperFunction& f, const Integrator& how);

// Super Fourier transform evaluated at a dual bosonic point kappa together
// with the eta-family Grassmann content.
SuperFunction super_fourier(const SuperFunction& f, const Integrator& how);

// ||Q_Phi f|| at a bosonic point, bosonic derivatives by central differences
// with step h, Grassmann derivatives exact.
double susy_residual(const SuperFunction& f, const BosonicPoint& p, double h = 1e-4);

struct LocalizationCheck {
  cplx integral;
  cplx at_zero;
  double discrepancy;
  double integration_error;
};
LocalizationCheck localization_check(const SuperFunction& f, const Integrator& how);

}  // namespace susy::superfn
