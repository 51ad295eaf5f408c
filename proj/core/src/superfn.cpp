#include "susy/superfn.hpp"

#include "susy/quadrature.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace susy::superfn {

using grassmann::Charge;
using grassmann::Context;
using grassmann::GeneratorIndex;
using grassmann::VariableKey;

BosonicLayout::BosonicLayout(std::vector<SiteColour> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end());
  if (std::adjacent_find(entries_.begin(), entries_.end()) != entries_.end())
    throw std::invalid_argument("duplicate bosonic entry");
}

std::size_t BosonicLayout::index(const SiteColour& sc) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), sc);
  if (it == entries_.end() || *it != sc) throw std::invalid_argument("entry not in layout");
  return static_cast<std::size_t>(it - entries_.begin());
}

ContextPtr BosonicLayout::context(Family fam) const {
  std::vector<GeneratorIndex> gens;
  for (const auto& e : entries_)
    for (Charge q : {Charge::plus, Charge::minus})
      gens.push_back(GeneratorIndex{fam, e.site, e.colour, q});
  return Context::make(std::move(gens));
}

double envelope_radius(const Envelope& env, double tol) {
  if (!env.profile) throw std::invalid_argument("envelope has no profile");
  // total mass and tail by doubling; profile is decreasing
  auto mass_between = [&](double a, double b) {
    const auto& rule = quadrature::gauss_legendre(64);
    auto sc = quadrature::rescaled(rule, a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < sc.nodes.size(); ++i)
      s += sc.weights[i] * env.profile(sc.nodes[i] * sc.nodes[i]) * sc.nodes[i];
    return s;
  };
  double total = 0.0, r = 1.0;
  for (int k = 0; k < 60; ++k) {
    double add = mass_between(k == 0 ? 0.0 : r / 2.0, r);
    total += add;
    if (k > 2 && add < tol * total) break;
    r *= 2.0;
  }
  // shrink back to the smallest radius keeping the tail below tol
  double lo = 0.0, hi = r;
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    double tail = total - mass_between(0.0, mid);
    (tail > tol * total ? lo : hi) = mid;
  }
  return hi;
}

RadialSampler::RadialSampler(const Envelope& env, double radius, int table) {
  r_.resize(table + 1);
  pdf_.resize(table + 1);
  cdf_.resize(table + 1);
  double h = radius / table;
  for (int i = 0; i <= table; ++i) {
    r_[i] = i * h;
    pdf_[i] = std::max(env.profile(r_[i] * r_[i]), 0.0) * r_[i];
  }
  cdf_[0] = 0.0;
  for (int i = 1; i <= table; ++i)
    cdf_[i] = cdf_[i - 1] + 0.5 * h * (pdf_[i - 1] + pdf_[i]);
  norm_ = cdf_.back();
  if (!(norm_ > 0.0)) throw std::invalid_argument("envelope has zero mass");
  for (auto& c : cdf_) c /= norm_;
}

double RadialSampler::sample(double u, double* density) const {
  auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  std::size_t hi = std::min<std::size_t>(cdf_.size() - 1,
                                         std::max<std::size_t>(1, it - cdf_.begin()));
  std::size_t lo = hi - 1;
  double span = cdf_[hi] - cdf_[lo];
  double t = span > 0.0 ? (u - cdf_[lo]) / span : 0.5;
  double r = r_[lo] + t * (r_[hi] - r_[lo]);
  if (density) *density = density_at(r);
  return r;
}

double RadialSampler::density_at(double r) const {
  double h = r_[1] - r_[0];
  std::size_t i = std::min<std::size_t>(pdf_.size() - 2, static_cast<std::size_t>(r / h));
  double t = (r - r_[i]) / h;
  return ((1.0 - t) * pdf_[i] + t * pdf_[i + 1]) / norm_;
}

namespace {

struct ElementAccum {
  Element sum;
  double sum_sq = 0.0;  // sum of squared norms, for a crude error bar
  long n = 0;
};

Element on_ctx(Element v, const ContextPtr& ctx) {
  return v.context() == ctx ? v : v.in_context(ctx);
}

// Tensor-product Gauss-Legendre over [-R, R]^(2m) with the flat measure.
// Sliced over the last dimension; slice results merge in index order, so the
// value does not depend on the thread count.
Element gl_pass(const BosonicLayout& layout, const ContextPtr& ctx,
                const std::function<Element(const BosonicPoint&)>& f, double R, int nodes,
                int threads) {
  const std::size_t m = layout.size();
  const std::size_t dims = 2 * m;
  auto rule = quadrature::rescaled(quadrature::gauss_legendre(nodes), -R, R);
  const double pi_pow = std::pow(M_PI, -static_cast<double>(m));

  auto slice = [&](std::size_t last, Element& out) {
    std::vector<std::size_t> idx(dims, 0);
    idx[dims - 1] = last;
    Element acc(ctx);
    BosonicPoint p = BosonicPoint::zero(m);
    while (true) {
      double w = pi_pow;
      for (std::size_t d = 0; d < dims; ++d) w *= rule.weights[idx[d]];
      for (std::size_t j = 0; j < m; ++j)
        p.phi[j] = cplx(rule.nodes[idx[2 * j]], rule.nodes[idx[2 * j + 1]]);
      acc += on_ctx(f(p), ctx) * cplx(w, 0.0);
      std::size_t d = 0;
      for (; d + 1 < dims; ++d) {
        if (++idx[d] < rule.nodes.size()) break;
        idx[d] = 0;
      }
      if (d + 1 == dims) break;
    }
    out = acc;
  };

  std::vector<Element> parts(rule.nodes.size(), Element(ctx));
  if (dims == 1) {
    // degenerate, should not happen (dims is even), handled for safety
    threads = 1;
  }
  int nthreads = std::max(1, threads);
  if (nthreads == 1) {
    for (std::size_t last = 0; last < rule.nodes.size(); ++last) slice(last, parts[last]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (std::size_t last = next.fetch_add(1); last < rule.nodes.size();
             last = next.fetch_add(1))
          slice(last, parts[last]);
      });
    for (auto& th : pool) th.join();
  }
  Element acc(ctx);
  for (const auto& part : parts) acc += part;
  return acc;
}

}  // namespace

ElementIntegral integrate_element(const BosonicLayout& layout, const Envelope& env,
                                  const ContextPtr& value_ctx,
                                  const std::function<Element(const BosonicPoint&)>& f,
                                  const Integrator& how) {
  const std::size_t m = layout.size();
  if (m == 0) return {f(BosonicPoint::zero(0)), 0.0};
  double R = how.radius > 0.0 ? how.radius : envelope_radius(env);

  if (how.kind == IntegratorKind::gauss_legendre) {
    if (2 * m > 4 && std::pow(static_cast<double>(how.nodes), 2.0 * m) > 5e8)
      throw std::invalid_argument("quadrature dimension too high, use Monte Carlo");
    Element full = gl_pass(layout, value_ctx, f, R, how.nodes, how.threads);
    if (!how.estimate_error) return {full, 0.0};
    int coarse = std::max(4, (2 * how.nodes) / 3);
    Element half = gl_pass(layout, value_ctx, f, R, coarse, how.threads);
    return {full, (full - half).norm()};
  }

  // Monte Carlo paths, blocked for thread-count independent reduction.
  const long n = how.samples;
  const long block = 4096;
  const long nblocks = (n + block - 1) / block;
  RadialSampler sampler(env, R, 1024);
  const bool importance = how.kind == IntegratorKind::importance;

  auto run_block = [&](long b, ElementAccum& out) {
    Element s(value_ctx);
    double ssq = 0.0;
    long lo = b * block, hi = std::min(n, lo + block);
    for (long i = lo; i < hi; ++i) {
      rng::Stream st(how.seed, static_cast<std::uint64_t>(i));
      BosonicPoint p = BosonicPoint::zero(m);
      double w = 1.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (importance) {
          double dens = 0.0;
          double r = sampler.sample(st.uniform(), &dens);
          double th = st.uniform(0.0, 2.0 * M_PI);
          p.phi[j] = std::polar(r, th);
          // area density = dens/(2 pi r); flat measure carries 1/pi
          w *= (dens > 0.0 ? (2.0 * r) / dens : 0.0);
        } else {
          double x = st.uniform(-R, R), y = st.uniform(-R, R);
          p.phi[j] = cplx(x, y);
          w *= (4.0 * R * R) / M_PI;
        }
      }
      Element v = on_ctx(f(p), value_ctx) * cplx(w, 0.0);
      ssq += v.norm() * v.norm();
      s += v;
    }
    out.sum = s;
    out.sum_sq = ssq;
    out.n = hi - lo;
  };

  std::vector<ElementAccum> blocks(static_cast<std::size_t>(nblocks));
  int nthreads = std::max(1, how.threads);
  if (nthreads == 1) {
    for (long b = 0; b < nblocks; ++b) run_block(b, blocks[static_cast<std::size_t>(b)]);
  } else {
    std::vector<std::thread> pool;
    std::atomic<long> next{0};
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (long b = next.fetch_add(1); b < nblocks; b = next.fetch_add(1))
          run_block(b, blocks[static_cast<std::size_t>(b)]);
      });
    for (auto& th : pool) th.join();
  }
  Element total(value_ctx);
  double total_sq = 0.0;
  for (const auto& blk : blocks) {
    total += blk.sum;
    total_sq += blk.sum_sq;
  }
  Element mean = total * cplx(1.0 / n, 0.0);
  double var = std::max(0.0, total_sq / n - mean.norm() * mean.norm());
  return {mean, std::sqrt(var / n)};
}

namespace {

Element integrate_fermions(const SuperFunction& f, const BosonicPoint& p) {
  Element val = f.eval(p);
  std::vector<VariableKey> vars;
  for (const auto& e : f.layout.entries())
    vars.push_back(VariableKey{f.fermion_family, e.site, e.colour});
  return berezin(val, vars);
}

}  // namespace

IntegralResult super_integrate(const SuperFunction& f, const Integrator& how) {
  ContextPtr residual;
  {
    Element probe = integrate_fermions(f, BosonicPoint::zero(f.layout.size()));
    residual = probe.context();
    if (residual->size() != 0)
      throw std::invalid_argument("super_integrate needs a fully integrable context");
  }
  auto integrand = [&f](const BosonicPoint& p) { return integrate_fermions(f, p); };
  ElementIntegral r = integrate_element(f.layout, f.envelope, residual, integrand, how);
  return {r.value.scalar_part(), r.error};
}

SuperFunction super_fourier(const SuperFunction& f, const Integrator& how) {
  SuperFunction out;
  out.layout = f.layout;
  out.fermion_family = Family::eta;
  {
    Element probe = grassmann::fourier(f.eval(BosonicPoint::zero(f.layout.size())));
    out.ctx = probe.context();
  }
  // no a-priori decay certificate for the transform; callers override
  out.envelope.amplitude = 1.0;
  out.envelope.profile = [](double r2) { return std::exp(-0.5 * r2); };
  SuperFunction base = f;
  Integrator inner = how;
  inner.estimate_error = false;  // per-point transform values carry no error bar
  ContextPtr out_ctx = out.ctx;

  // transforms of the basis monomials, computed once
  auto table = std::make_shared<std::vector<Element>>();
  if (f.ctx->size() <= 12) {
    std::uint64_t count = std::uint64_t{1} << f.ctx->size();
    table->reserve(count);
    for (std::uint64_t mask = 0; mask < count; ++mask)
      table->push_back(
          grassmann::fourier(Element::monomial(f.ctx, mask, 1.0)).in_context(out_ctx));
  }

  out.eval = [base, inner, out_ctx, table](const BosonicPoint& kappa) {
    auto integrand = [&](const BosonicPoint& phi) {
      cplx phase_arg{};
      for (std::size_t j = 0; j < phi.phi.size(); ++j)
        phase_arg += kappa.phi[j] * std::conj(phi.phi[j]) + phi.phi[j] * std::conj(kappa.phi[j]);
      cplx phase = std::exp(cplx(0.0, -1.0) * phase_arg);
      if (table->empty()) return grassmann::fourier(base.eval(phi)) * phase;
      Element val = base.eval(phi);
      Element acc(out_ctx);
      for (const auto& [m, c] : val.coefficients()) acc += (*table)[m] * (c * phase);
      return acc;
    };
    return integrate_element(base.layout, base.envelope, out_ctx, integrand, inner).value;
  };
  return out;
}

double susy_residual(const SuperFunction& f, const BosonicPoint& p, double h) {
  Element q(f.ctx);
  const auto& entries = f.layout.entries();
  for (std::size_t j = 0; j < entries.size(); ++j) {
    // central differences in phi1, phi2
    BosonicPoint pp = p, pm = p;
    pp.phi[j] += h;
    pm.phi[j] -= h;
    Element d1 = (f.eval(pp) - f.eval(pm)) * cplx(1.0 / (2.0 * h), 0.0);
    pp = p;
    pm = p;
    pp.phi[j] += cplx(0.0, h);
    pm.phi[j] -= cplx(0.0, h);
    Element d2 = (f.eval(pp) - f.eval(pm)) * cplx(1.0 / (2.0 * h), 0.0);
    // d/dphi+ = (d1 - i d2)/2, d/dphi- = (d1 + i d2)/2
    Element dp = (d1 - d2 * cplx(0.0, 1.0)) * cplx(0.5, 0.0);
    Element dm = (d1 + d2 * cplx(0.0, 1.0)) * cplx(0.5, 0.0);

    GeneratorIndex gp{Family::psi, entries[j].site, entries[j].colour, Charge::plus};
    GeneratorIndex gm{Family::psi, entries[j].site, entries[j].colour, Charge::minus};
    Element fp = f.eval(p);
    q += Element::generator(f.ctx, gp) * dp;
    q += Element::generator(f.ctx, gm) * dm;
    q -= grassmann::derivative(fp, gp) * p.phi[j];
    q += grassmann::derivative(fp, gm) * std::conj(p.phi[j]);
  }
  return q.norm();
}

LocalizationCheck localization_check(const SuperFunction& f, const Integrator& how) {
  IntegralResult r = super_integrate(f, how);
  cplx f0 = f.eval(BosonicPoint::zero(f.layout.size())).scalar_part();
  return {r.value, f0, std::abs(r.value - f0), r.error};
}

}  // namespace susy::superfn
