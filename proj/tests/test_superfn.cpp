#include <doctest.h>

#include "susy/superfn.hpp"

#include <bit>
#include <cmath>
#include <functional>
#include <vector>

namespace grassmann = susy::grassmann;
using namespace susy::superfn;
using susy::grassmann::berezin_family;
using susy::grassmann::Charge;
using susy::grassmann::Element;
using susy::grassmann::GeneratorIndex;

namespace {

BosonicLayout one_site(int colours) {
  std::vector<SiteColour> e;
  for (int c = 0; c < colours; ++c) e.push_back(SiteColour{{0, 0, 0}, c});
  return BosonicLayout(e);
}

// f(Phi) = sum_k g^{(k)}(phi+ phi-) n^k / k!,  n = sum_sigma psi+ psi-.
// Such functions of Phi+Phi- are supersymmetric.
SuperFunction superscalar(const BosonicLayout& layout,
                          std::vector<std::function<double(double)>> g_derivs,
                          Envelope env) {
  SuperFunction f;
  f.layout = layout;
  f.ctx = layout.context();
  f.envelope = std::move(env);
  auto ctx = f.ctx;
  Element n(ctx);
  for (const auto& e : layout.entries()) {
    Element gp = Element::generator(ctx, {Family::psi, e.site, e.colour, Charge::plus});
    Element gm = Element::generator(ctx, {Family::psi, e.site, e.colour, Charge::minus});
    n += gp * gm;
  }
  // n^k / k!, independent of the bosonic point
  auto npows = std::make_shared<std::vector<Element>>();
  Element npow(ctx, 1.0);
  double fact = 1.0;
  for (std::size_t k = 0; k < g_derivs.size(); ++k) {
    if (k > 0) {
      npow = npow * n;
      fact *= k;
      if (npow.is_zero()) break;
    }
    npows->push_back(npow * grassmann::cplx(1.0 / fact, 0.0));
  }
  f.eval = [ctx, npows, g = std::move(g_derivs)](const BosonicPoint& p) {
    double t = 0.0;
    for (auto v : p.phi) t += std::norm(v);
    Element out(ctx);
    for (std::size_t k = 0; k < npows->size(); ++k)
      out += (*npows)[k] * grassmann::cplx(g[k](t), 0.0);
    return out;
  };
  return f;
}

Envelope exp_envelope(double rate) {
  return Envelope{1.0, [rate](double r2) { return std::exp(-rate * r2); }};
}

Element flip_fermions(const Element& e) {
  Element out(e.context());
  for (const auto& [m, c] : e.coefficients())
    out.set(m, (std::popcount(m) % 2 == 0) ? c : -c);
  return out;
}

}  // namespace

TEST_CASE("supersymmetric localization, one colour") {
  auto f = superscalar(one_site(1),
                       {[](double t) { return std::exp(-t); },
                        [](double t) { return -std::exp(-t); }},
                       exp_envelope(1.0));
  Integrator gl;
  gl.nodes = 48;
  auto check = localization_check(f, gl);
  CHECK(std::abs(check.at_zero - 1.0) < 1e-14);
  CHECK(check.discrepancy < 1e-8);
}

TEST_CASE("supersymmetric localization, two colours") {
  std::vector<std::function<double(double)>> g{
      [](double t) { return std::exp(-0.5 * t * t); },
      [](double t) { return -t * std::exp(-0.5 * t * t); },
      [](double t) { return (t * t - 1.0) * std::exp(-0.5 * t * t); }};
  Envelope env{1.0, [](double r2) { return std::exp(-0.5 * r2 * r2); }};
  auto f = superscalar(one_site(2), g, env);
  Integrator gl;
  gl.nodes = 40;
  auto check = localization_check(f, gl);
  CHECK(check.discrepancy < 1e-6);
}

TEST_CASE("susy residual vanishes exactly on functions of Phi+Phi-") {
  auto f = superscalar(one_site(1),
                       {[](double t) { return std::exp(-t); },
                        [](double t) { return -std::exp(-t); }},
                       exp_envelope(1.0));
  BosonicPoint p{{grassmann::cplx(0.4, -0.7)}};
  CHECK(susy_residual(f, p) < 1e-7);

  // breaking supersymmetry must show up
  SuperFunction broken = f;
  auto ctx = f.ctx;
  broken.eval = [ctx](const BosonicPoint& q) { return Element(ctx, std::norm(q.phi[0])); };
  CHECK(susy_residual(broken, p) > 0.1);
}

TEST_CASE("monte carlo agrees with quadrature") {
  auto f = superscalar(one_site(1),
                       {[](double t) { return std::exp(-t); },
                        [](double t) { return -std::exp(-t); }},
                       exp_envelope(1.0));
  Integrator gl;
  gl.nodes = 48;
  auto exact = super_integrate(f, gl);

  Integrator mc;
  mc.kind = IntegratorKind::importance;
  mc.samples = 200000;
  mc.seed = 42;
  auto est = super_integrate(f, mc);
  CHECK(std::abs(est.value - exact.value) < 5.0 * est.error + 1e-10);

  // reproducible regardless of thread count
  mc.threads = 4;
  auto est4 = super_integrate(f, mc);
  CHECK(est4.value == est.value);
  CHECK(est4.error == est.error);
}

TEST_CASE("super fourier transform is supersymmetric and inverts at zero") {
  double a = 1.0;
  auto f = superscalar(one_site(1),
                       {[a](double t) { return std::exp(-a * t); },
                        [a](double t) { return -a * std::exp(-a * t); }},
                       exp_envelope(a));
  Integrator inner;
  inner.nodes = 64;
  SuperFunction fh = super_fourier(f, inner);
  fh.envelope = exp_envelope(1.0 / a);

  // value at zero is the plain superintegral = f(0) = 1 by localization
  Element at0 = fh.eval(BosonicPoint::zero(1));
  CHECK(std::abs(at0.scalar_part() - 1.0) < 1e-8);

  // the transform localizes too
  Integrator outer;
  outer.nodes = 48;
  auto check = localization_check(fh, outer);
  CHECK(check.discrepancy < 1e-6);
}

TEST_CASE("plancherel pairing on gaussian pairs") {
  Integrator inner;
  inner.nodes = 56;
  Integrator outer;
  outer.nodes = 32;
  outer.estimate_error = false;
  for (auto [a, b] : {std::pair{1.0, 2.0}, std::pair{0.7, 1.3}}) {
    auto make = [&](double r) {
      return superscalar(one_site(1),
                         {[r](double t) { return std::exp(-r * t); },
                          [r](double t) { return -r * std::exp(-r * t); }},
                         exp_envelope(r));
    };
    auto f = make(a);
    auto g = make(b);

    // lhs: int dPhi f g, a supersymmetric product, so it equals 1
    SuperFunction fg = f;
    auto fe = f.eval, ge = g.eval;
    auto fctx = f.ctx;
    fg.eval = [fe, ge, fctx](const BosonicPoint& p) { return fe(p) * ge(p).in_context(fctx); };
    fg.envelope = exp_envelope(a + b);
    Integrator gl;
    gl.nodes = 48;
    auto lhs = super_integrate(fg, gl);
    CHECK(std::abs(lhs.value - 1.0) < 1e-9);

    auto fh = super_fourier(f, inner);
    auto gh = super_fourier(g, inner);
    fh.envelope = exp_envelope(1.0 / a);

    SuperFunction pair = fh;
    auto fhe = fh.eval, ghe = gh.eval;
    auto pctx = fh.ctx;
    pair.eval = [fhe, ghe, pctx](const BosonicPoint& p) {
      BosonicPoint m = p;
      for (auto& v : m.phi) v = -v;
      return fhe(p).in_context(pctx) * flip_fermions(ghe(m)).in_context(pctx);
    };
    pair.envelope = exp_envelope(1.0 / a + 1.0 / b);
    auto rhs = super_integrate(pair, outer);
    CHECK(std::abs(rhs.value - lhs.value) <= 1e-6 * std::abs(lhs.value));
  }
}
