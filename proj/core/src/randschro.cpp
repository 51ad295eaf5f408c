#include "susy/randschro.hpp"

#include "susy/quadrature.hpp"
#include "susy/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace susy::randschro {

using grassmann::berezin;
using grassmann::Charge;
using grassmann::Context;
using grassmann::Element;
using grassmann::Family;
using grassmann::GeneratorIndex;
using grassmann::VariableKey;
using superfn::BosonicLayout;
using superfn::BosonicPoint;
using superfn::Envelope;
using superfn::SiteColour;

namespace {

double site_dist(const Site& a, const Site& b) {
  double s = 0.0;
  for (int k = 0; k < 3; ++k) {
    double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

GeneratorIndex psi_gen(const Site& x, int colour, Charge c) {
  return grassmann::gen(Family::psi, x, colour, c);
}
GeneratorIndex eta_gen(const Site& x, int colour, Charge c) {
  return grassmann::gen(Family::eta, x, colour, c);
}

}  // namespace

int LatticeModel::nsites() const {
  int n = 1;
  for (int k = 0; k < D; ++k) n *= box[k];
  return n;
}

Site LatticeModel::site(int i) const {
  Site s{0, 0, 0};
  for (int k = 0; k < D; ++k) {
    s[k] = i % box[k];
    i /= box[k];
  }
  return s;
}

int LatticeModel::index(const Site& s) const {
  int i = 0;
  for (int k = D - 1; k >= 0; --k) {
    if (s[k] < 0 || s[k] >= box[k]) throw std::invalid_argument("site outside the box");
    i = i * box[k] + s[k];
  }
  for (int k = D; k < 3; ++k)
    if (s[k] != 0) throw std::invalid_argument("site outside the box");
  return i;
}

namespace {

// colour-diagonal hopping entry between two sites
double hop_entry(const LatticeModel& m, const Site& a, const Site& b) {
  if (a == b) return m.hopping == Hopping::laplacian ? 2.0 * m.D : 0.0;
  if (m.hopping == Hopping::laplacian) {
    int manhattan = 0;
    for (int k = 0; k < 3; ++k) manhattan += std::abs(a[k] - b[k]);
    return manhattan == 1 ? -1.0 : 0.0;
  }
  return m.hop_amp * std::exp(-m.hop_rate * site_dist(a, b));
}

}  // namespace

Eigen::MatrixXcd build_hamiltonian(const LatticeModel& m) {
  int ns = m.nsites(), S = m.ncolour;
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(ns * S, ns * S);
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < ns; ++j) {
      double h = hop_entry(m, m.site(i), m.site(j));
      if (h == 0.0) continue;
      for (int s = 0; s < S; ++s) H(i * S + s, j * S + s) = h;
    }
  return H;
}

namespace {

double draw_omega(const disorder::Disorder& d, rng::Stream& st) {
  if (d.kind == disorder::Kind::gaussian) return d.sigma * st.normal();
  // bump density peaks at w = 0 with value e^{-1}
  for (;;) {
    double w = st.uniform(-1.0, 1.0);
    double acc = std::exp(1.0 - 1.0 / (1.0 - w * w));
    if (st.uniform() < acc) return w;
  }
}

}  // namespace

McGreen mc_green(const LatticeModel& m, const disorder::Disorder& d, const SpectralPoint& pt,
                 const Site& x, const Site& y, long nsamples, std::uint64_t seed) {
  if (nsamples < 1) throw std::invalid_argument("mc_green: need at least one sample");
  Eigen::MatrixXcd H = build_hamiltonian(m);
  const int n = m.dim(), S = m.ncolour, ns = m.nsites();
  const int ix = m.index(x) * S, iy = m.index(y) * S;
  const cplx z = pt.z();

  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(S, S);
  Eigen::MatrixXd sum_re2 = Eigen::MatrixXd::Zero(S, S), sum_im2 = Eigen::MatrixXd::Zero(S, S);
  long resamples = 0;
  Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(n, S);
  for (int s = 0; s < S; ++s) rhs(iy + s, s) = 1.0;

  for (long i = 0; i < nsamples; ++i) {
    rng::Stream st(seed, static_cast<std::uint64_t>(i));
    for (int attempt = 0;; ++attempt) {
      if (attempt > 200) throw std::runtime_error("mc_green: persistent singular samples");
      Eigen::MatrixXcd A = H;
      for (int j = 0; j < ns; ++j) {
        double w = m.gamma * draw_omega(d, st);
        for (int s = 0; s < S; ++s) A(j * S + s, j * S + s) += w - z;
      }
      Eigen::MatrixXcd G = A.partialPivLu().solve(rhs);
      if (!G.allFinite() || (A * G - rhs).norm() > 1e-8 * std::max(1.0, G.norm())) {
        ++resamples;
        continue;
      }
      for (int a = 0; a < S; ++a)
        for (int b = 0; b < S; ++b) {
          cplx v = G(ix + a, b);
          sum(a, b) += v;
          sum_re2(a, b) += v.real() * v.real();
          sum_im2(a, b) += v.imag() * v.imag();
        }
      break;
    }
  }
  McGreen out;
  out.mean = sum / static_cast<double>(nsamples);
  out.err = Eigen::MatrixXd::Zero(S, S);
  for (int a = 0; a < S; ++a)
    for (int b = 0; b < S; ++b) {
      double vr = sum_re2(a, b) / nsamples - out.mean(a, b).real() * out.mean(a, b).real();
      double vi = sum_im2(a, b) / nsamples - out.mean(a, b).imag() * out.mean(a, b).imag();
      out.err(a, b) = std::sqrt(std::max(0.0, vr + vi) / nsamples);
    }
  out.resamples = resamples;
  out.samples = nsamples;
  return out;
}

Eigen::MatrixXcd quadrature_green(const LatticeModel& m, const disorder::Disorder& d,
                                  const SpectralPoint& pt, const Site& x, const Site& y,
                                  int nodes_per_dim, double shift) {
  Eigen::MatrixXcd H = build_hamiltonian(m);
  const int n = m.dim(), S = m.ncolour, ns = m.nsites();
  const int ix = m.index(x) * S, iy = m.index(y) * S;
  const cplx z = pt.z();
  const bool gauss = d.kind == disorder::Kind::gaussian;
  if (!gauss && pt.eps <= 0.0)
    throw std::invalid_argument("quadrature_green: bump disorder needs eps > 0");

  std::vector<cplx> nodes(nodes_per_dim);
  std::vector<cplx> factors(nodes_per_dim);
  if (gauss) {
    // contour shift t -> t - i b c; the one-signed anti-Hermitian part of
    // H - z keeps the resolvent pole-free along the deformation
    const auto& gh = quadrature::gauss_hermite(nodes_per_dim);
    double c = shift, s2 = d.sigma * d.sigma;
    for (int j = 0; j < nodes_per_dim; ++j) {
      double s = d.sigma * std::numbers::sqrt2 * gh.nodes[j];
      nodes[j] = cplx(s, -pt.branch * c);
      factors[j] = gh.weights[j] / std::sqrt(std::numbers::pi) *
                   std::exp(cplx(c * c / (2.0 * s2), pt.branch * c * s / s2));
    }
  } else {
    auto gl = quadrature::rescaled(quadrature::gauss_legendre(nodes_per_dim), -1.0, 1.0);
    for (int j = 0; j < nodes_per_dim; ++j) {
      nodes[j] = gl.nodes[j];
      factors[j] = gl.weights[j] * d.nu(gl.nodes[j]);
    }
  }

  Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(n, S);
  for (int s = 0; s < S; ++s) rhs(iy + s, s) = 1.0;
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(S, S);
  std::vector<int> idx(static_cast<std::size_t>(ns), 0);
  for (;;) {
    cplx w(1.0, 0.0);
    Eigen::MatrixXcd A = H;
    for (int j = 0; j < ns; ++j) {
      w *= factors[idx[j]];
      for (int s = 0; s < S; ++s) A(j * S + s, j * S + s) += m.gamma * nodes[idx[j]] - z;
    }
    acc += w * A.partialPivLu().solve(rhs).block(ix, 0, S, S);
    int k = 0;
    for (; k < ns; ++k) {
      if (++idx[k] < nodes_per_dim) break;
      idx[k] = 0;
    }
    if (k == ns) break;
  }
  return acc;
}

LdosResult mc_ldos(const LatticeModel& m, const disorder::Disorder& d, double E, double eps,
                   long nsamples, std::uint64_t seed) {
  SpectralPoint pt{E, eps, 0.0, +1};
  McGreen g = mc_green(m, d, pt, Site{0, 0, 0}, Site{0, 0, 0}, nsamples, seed);
  // rho is the mean over samples of the trace average; reuse the entrywise
  // statistics (imaginary parts only)
  double v = 0.0, e2 = 0.0;
  for (int s = 0; s < m.ncolour; ++s) {
    v += g.mean(s, s).imag();
    e2 += g.err(s, s) * g.err(s, s);
  }
  double c = 1.0 / (std::numbers::pi * m.ncolour);
  return {c * v, c * std::sqrt(e2), g.resamples};
}

double ldos_exact(const LatticeModel& m, double E, double eps) {
  Eigen::MatrixXd H = build_hamiltonian(m).real();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const int S = m.ncolour;
  double v = 0.0;
  for (int k = 0; k < m.dim(); ++k) {
    double lam = es.eigenvalues()[k];
    double lorentz = eps / ((E - lam) * (E - lam) + eps * eps);
    for (int s = 0; s < S; ++s) {
      double a = es.eigenvectors()(s, k);  // origin block occupies rows 0..S-1
      v += a * a * lorentz;
    }
  }
  return v / (std::numbers::pi * S);
}

Element f_site_element(const disorder::FProfile& f, const BosonicPoint& p,
                       const BosonicLayout& layout, const grassmann::ContextPtr& ctx,
                       const Site& x, int ncolour) {
  double u = 0.0;
  for (int s = 0; s < ncolour; ++s) u += std::norm(p.phi[layout.index({x, s})]);
  Element P(ctx);
  for (int s = 0; s < ncolour; ++s)
    P += Element::generator(ctx, psi_gen(x, s, Charge::plus)) *
         Element::generator(ctx, psi_gen(x, s, Charge::minus));
  Element out(ctx, f.deriv(0, u));
  Element Pk(ctx, 1.0);
  double fact = 1.0;
  for (int n = 1; n <= ncolour; ++n) {
    Pk = Pk * P;
    fact *= n;
    out += Pk * (f.deriv(n, u) / fact);
  }
  return out;
}

Envelope f_envelope(const disorder::FProfile& f, int nmax, int nplanes) {
  auto magnitude = [f, nmax](double t) {
    double m = 0.0;
    for (int n = 0; n <= nmax; ++n) m = std::max(m, std::abs(f.deriv(n, t)));
    return m;
  };
  Envelope env;
  if (f.d.kind == disorder::Kind::gaussian) {
    double lambda = 1.0 / std::max(1.0, f.d.sigma * f.d.sigma);
    double tmax = (lambda + std::abs(f.zeta) + 4.0) / (f.d.sigma * f.d.sigma) * 4.0 + 20.0;
    double A = 0.0;
    for (int i = 0; i <= 800; ++i) {
      double t = tmax * i / 800.0;
      A = std::max(A, magnitude(t) * std::exp(lambda * t));
    }
    env.amplitude = A;
    env.profile = [lambda](double u) { return std::exp(-lambda * u); };
  } else {
    // sum_i sqrt(u_i) <= sqrt(k t) for t = sum u_i over k planes
    double k = std::max(1, nplanes);
    double c = std::numbers::sqrt2 / (k + 1.0);
    double A = 0.0;
    for (int i = 0; i <= 2000; ++i) {
      double t = 800.0 * i / 2000.0;
      A = std::max(A, magnitude(t) * std::exp(c * std::sqrt(k * t)));
    }
    env.amplitude = A;
    env.profile = [c](double u) { return std::exp(-c * std::sqrt(std::max(0.0, u))); };
  }
  return env;
}

superfn::SuperFunction f_z(const disorder::Disorder& d, cplx z, double gamma, int ncolour) {
  superfn::SuperFunction F;
  std::vector<SiteColour> entries;
  for (int s = 0; s < ncolour; ++s) entries.push_back({Site{0, 0, 0}, s});
  F.layout = BosonicLayout(entries);
  F.ctx = F.layout.context(Family::psi);
  auto fp = std::make_shared<disorder::FProfile>(disorder::f_profile(d, z, gamma));
  BosonicLayout layout = F.layout;
  grassmann::ContextPtr ctx = F.ctx;
  int S = ncolour;
  F.eval = [fp, layout, ctx, S](const BosonicPoint& p) {
    return f_site_element(*fp, p, layout, ctx, Site{0, 0, 0}, S);
  };
  F.envelope = f_envelope(*fp, ncolour, ncolour);
  return F;
}

cplx hankel_radial(const std::function<cplx(double)>& h, double v, double u_max) {
  cplx s{};
  double a = 0.0, b = std::min(1.0, u_max);
  for (;;) {
    // the phase 2 sqrt(u v) advances by 2(sqrt(b)-sqrt(a)) sqrt(v) per panel
    double cycles = (std::sqrt(b) - std::sqrt(a)) * std::sqrt(std::max(v, 0.0)) / std::numbers::pi;
    int nodes = std::min(160, 16 + 6 * static_cast<int>(std::ceil(cycles)));
    auto rule = quadrature::rescaled(quadrature::gauss_legendre(nodes), a, b);
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      double u = rule.nodes[j];
      s += rule.weights[j] * std::cyl_bessel_j(0.0, 2.0 * std::sqrt(u * v)) * h(u);
    }
    if (b >= u_max) break;
    a = b;
    b = std::min(2.0 * b, u_max);
  }
  return s;
}

cplx radial_site_integral(const disorder::FProfile& f, int ncolour, double u_max) {
  const int S = ncolour;
  double fact = std::tgamma(static_cast<double>(S));
  cplx s{};
  // fixed panels; the profile oscillates with period ~2 pi in u
  double width = 4.0;
  for (double a = 0.0; a < u_max; a += width) {
    double b = std::min(a + width, u_max);
    auto rule = quadrature::rescaled(quadrature::gauss_legendre(24), a, b);
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      double u = rule.nodes[j];
      s += rule.weights[j] * f.deriv(S, u) * std::pow(u, S - 1) / fact;
    }
  }
  return (S % 2 ? -1.0 : 1.0) * s;
}

namespace {

double profile_umax(const disorder::FProfile& f) {
  return f.d.kind == disorder::Kind::gaussian ? 40.0 * f.d.sigma * f.d.sigma + 60.0 : 760.0;
}

}  // namespace

DualProfile::DualProfile(const disorder::FProfile& f, int nderiv, double vmax, int grid)
    : f_(f), nderiv_(nderiv) {
  double umax = profile_umax(f_);
  auto raw = [&](int k, double v) {
    return hankel_radial([&](double u) { return f_.deriv(k, u); }, v, umax);
  };
  if (vmax <= 0.0) {
    double m0 = 0.0;
    for (double v : {0.0, 1.0, 4.0})
      for (int k = 0; k <= nderiv_; ++k) m0 = std::max(m0, std::abs(raw(k, v)));
    vmax = 40.0;
    for (; vmax < 5000.0; vmax *= 2.0) {
      double tail = 0.0;
      for (int k = 0; k <= nderiv_; ++k)
        tail = std::max(tail, std::abs(raw(k, vmax)) + std::abs(raw(k, 0.7 * vmax)));
      if (tail < 1e-8 * m0) break;
    }
  }
  vmax_ = vmax;
  // uniform in sqrt(v): the Bessel oscillation is uniform on that scale
  std::vector<double> sg(grid + 1);
  double smax = std::sqrt(vmax_);
  for (int i = 0; i <= grid; ++i) sg[i] = smax * i / grid;
  re_.resize(nderiv_ + 1);
  im_.resize(nderiv_ + 1);
  for (int k = 0; k <= nderiv_; ++k) {
    std::vector<double> yr(grid + 1), yi(grid + 1);
    for (int i = 0; i <= grid; ++i) {
      cplx t = raw(k, sg[i] * sg[i]);
      yr[i] = t.real();
      yi[i] = t.imag();
    }
    re_[k] = quadrature::Spline(sg, yr);
    im_[k] = quadrature::Spline(sg, yi);
  }
}

cplx DualProfile::value(int k, double v) const {
  if (k < 0 || k > nderiv_) throw std::invalid_argument("DualProfile: derivative order");
  double s = std::sqrt(std::max(0.0, v));
  return {re_[k](s), im_[k](s)};
}

// ---------------------------------------------------------------------------
// cluster expansions

namespace {

grassmann::ContextPtr scalar_context() {
  static grassmann::ContextPtr ctx = Context::make({});
  return ctx;
}

// ordered tuples of N distinct entries from the candidate list
void for_tuples(const std::vector<Site>& cand, int N,
                const std::function<void(const std::vector<Site>&)>& fn) {
  std::vector<Site> tuple(N);
  std::vector<char> used(cand.size(), 0);
  std::function<void(int)> rec = [&](int k) {
    if (k == N) {
      fn(tuple);
      return;
    }
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (used[i]) continue;
      used[i] = 1;
      tuple[k] = cand[i];
      rec(k + 1);
      used[i] = 0;
    }
  };
  rec(0);
}

struct PieceResult {
  cplx value{};
  double err = 0.0;
  double mismatch = 0.0;  // dual only
  bool mc = false;        // which path produced err
};

// Evaluates int dp_T(s) of a superintegral, tensor quadrature or joint MC.
// `integrand` produces the full Grassmann-valued integrand for one decoupling
// configuration and bosonic point; `fermions` lists the Berezin variables.
PieceResult integrate_piece(
    const bbf::DecouplingMeasure& dp, const BosonicLayout& layout,
    const grassmann::ContextPtr& ctx, Family ferm_family, const Envelope& env,
    const std::function<Element(const bbf::GrowthOrder&, const std::vector<double>&,
                                const BosonicPoint&)>& integrand,
    const ClusterOptions& opt, std::uint64_t piece) {
  const int planes = static_cast<int>(layout.size());
  PieceResult out;

  auto run_tensor = [&](int bnodes, int snodes) -> cplx {
    auto inner = [&](const bbf::GrowthOrder& ord, const std::vector<double>& s) {
      superfn::SuperFunction F;
      F.layout = layout;
      F.ctx = ctx;
      F.fermion_family = ferm_family;
      F.envelope = env;
      F.eval = [&](const BosonicPoint& p) { return integrand(ord, s, p); };
      superfn::Integrator how;
      how.kind = superfn::IntegratorKind::gauss_legendre;
      how.nodes = bnodes;
      how.radius = opt.radius;
      how.threads = opt.threads;
      how.estimate_error = false;
      return Element(scalar_context(), superfn::super_integrate(F, how).value);
    };
    if (dp.tree.n == 1) {
      bbf::GrowthOrder trivial;
      return inner(trivial, {}).scalar_part();
    }
    return bbf::measure_expectation(dp, scalar_context(), snodes, inner).scalar_part();
  };

  if (planes <= opt.max_planes_tensor) {
    cplx v = run_tensor(opt.boson_nodes, opt.stage_nodes);
    cplx vc = run_tensor(std::max(6, (2 * opt.boson_nodes) / 3), std::max(2, opt.stage_nodes / 2));
    out.value = v;
    out.err = std::abs(v - vc);
    return out;
  }

  // joint Monte Carlo over (growth order, s, kappa/phi)
  double R = opt.radius > 0.0 ? opt.radius : superfn::envelope_radius(env);
  superfn::RadialSampler sampler(env, R, 1024);
  std::vector<VariableKey> vars;
  for (const auto& e : layout.entries()) vars.push_back({ferm_family, e.site, e.colour});
  rng::Stream st(opt.seed, piece);
  std::vector<double> s(static_cast<std::size_t>(dp.tree.n), 1.0);
  bbf::GrowthOrder trivial;
  cplx sum{};
  double sum2 = 0.0;
  for (long j = 0; j < opt.mc_samples; ++j) {
    const bbf::GrowthOrder* ord = &trivial;
    if (dp.tree.n > 1) ord = &dp.orders[bbf::sample_measure(dp, st, s)];
    BosonicPoint p = BosonicPoint::zero(layout.size());
    double w = 1.0;
    for (int k = 0; k < planes; ++k) {
      double dens = 0.0;
      double r = sampler.sample(st.uniform(), &dens);
      double th = st.uniform(0.0, 2.0 * std::numbers::pi);
      p.phi[k] = std::polar(r, th);
      w *= dens > 0.0 ? (2.0 * r) / dens : 0.0;
    }
    cplx v = berezin(integrand(*ord, s, p), vars).scalar_part() * w;
    sum += v;
    sum2 += std::norm(v);
  }
  out.value = sum / static_cast<double>(opt.mc_samples);
  double var = std::max(0.0, sum2 / opt.mc_samples - std::norm(out.value));
  out.err = std::sqrt(var / opt.mc_samples);
  out.mc = true;
  return out;
}

cplx ipow(cplx base, int n) {
  cplx r(1.0, 0.0);
  for (int k = 0; k < std::abs(n); ++k) r *= base;
  return n >= 0 ? r : 1.0 / r;
}

struct VertexSet {
  std::vector<Site> vs;  // per tree vertex
  bool far = false;      // some free site beyond r_cut
};

// shared enumeration: free vertices first, then x (and y when distinct)
std::vector<Site> box_sites(const LatticeModel& m) {
  std::vector<Site> s;
  for (int i = 0; i < m.nsites(); ++i) s.push_back(m.site(i));
  return s;
}

}  // namespace

ClusterTerm direct_cluster_term(const LatticeModel& m, const disorder::Disorder& d,
                                const SpectralPoint& pt, const Site& x, const Site& y, int N,
                                const ClusterOptions& opt, int sx, int sy) {
  const bool diag = x == y;
  const int n = N + 2 - (diag ? 1 : 0);
  const int S = m.ncolour;
  if (n > 8) throw std::invalid_argument("direct_cluster_term: order too high");

  disorder::FProfile fp = disorder::f_profile(d, cplx(0.0, 0.0), m.gamma);
  fp.zeta = pt.direct_w(hop_entry(m, x, x)) / m.gamma;
  Envelope env = f_envelope(fp, S, S);

  std::vector<Site> cand;
  for (const Site& c : box_sites(m)) {
    if (c == x || c == y) continue;
    cand.push_back(c);
  }
  auto is_far = [&](const Site& c) {
    return std::min(site_dist(c, x), site_dist(c, y)) > static_cast<double>(opt.r_cut);
  };

  // site constants of the neglected-tuple bound (monomial-weighted profile
  // integrals per insertion degree)
  std::vector<double> site_amp(2 * n + 3, 0.0);
  auto amp_for = [&](int deg) {
    if (site_amp[deg] == 0.0) site_amp[deg] = bounds::imb_integral(fp, deg, 0);
    return site_amp[deg];
  };

  ClusterTerm term;
  term.order = N;
  cplx total{};
  double err = 0.0, qerr = 0.0, merr = 0.0, tail = 0.0;
  long pieces = 0;
  std::uint64_t piece_id = 0;

  for (const bbf::Tree& tree : bbf::enumerate_trees(n)) {
    bbf::DecouplingMeasure dp = bbf::build_decoupling_measure(tree);
    std::vector<int> deg = bbf::coordination(tree);
    for_tuples(cand, N, [&](const std::vector<Site>& tuple) {
      std::vector<Site> vs(static_cast<std::size_t>(n));
      for (int k = 0; k < N; ++k) vs[k] = tuple[k];
      if (diag) {
        vs[n - 1] = x;
      } else {
        vs[n - 2] = x;
        vs[n - 1] = y;
      }
      // couplings along the tree; tuples with a broken edge vanish exactly
      double hprod = 1.0;
      for (auto [a, b] : tree.edges) hprod *= std::abs(hop_entry(m, vs[a], vs[b]));
      if (hprod == 0.0) return;
      bool far = false;
      for (int k = 0; k < N; ++k) far = far || is_far(tuple[k]);
      ++piece_id;
      if (far) {
        double b = 1.0, growth = 0.0;
        for (auto [a, bb] : tree.edges) b *= 2.0 * S * std::abs(hop_entry(m, vs[a], vs[bb]));
        for (int a = 0; a < n; ++a) {
          int src = (vs[a] == x ? 1 : 0) + (vs[a] == y ? 1 : 0);
          b *= amp_for(deg[a] + src);
        }
        for (int a = 0; a < n; ++a)
          for (int bb = a + 1; bb < n; ++bb)
            growth += 2.0 * S * std::abs(hop_entry(m, vs[a], vs[bb])) / m.gamma;
        tail += b * std::exp(growth);
        return;
      }

      BosonicLayout layout;
      {
        std::vector<SiteColour> entries;
        for (const Site& v : vs)
          for (int s = 0; s < S; ++s) entries.push_back({v, s});
        layout = BosonicLayout(entries);
      }
      grassmann::ContextPtr ctx = layout.context(Family::psi);
      Element src = Element::generator(ctx, psi_gen(x, sx, Charge::minus)) *
                    Element::generator(ctx, psi_gen(y, sy, Charge::plus));
      std::vector<std::vector<int>> pidx(vs.size(), std::vector<int>(S));
      for (std::size_t a = 0; a < vs.size(); ++a)
        for (int s = 0; s < S; ++s) pidx[a][s] = static_cast<int>(layout.index({vs[a], s}));
      std::vector<std::array<int, 2>> hpairs;
      std::vector<double> hval;
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
          double h = hop_entry(m, vs[a], vs[b]);
          if (h != 0.0) {
            hpairs.push_back({a, b});
            hval.push_back(h);
          }
        }
      const cplx cg = cplx(0.0, pt.branch) / m.gamma;

      auto pair_element = [&](int a, int b, double h, const BosonicPoint& p, cplx* scal) {
        Element v(ctx);
        for (int s = 0; s < S; ++s) {
          *scal += -h * (p.phi[pidx[a][s]] * std::conj(p.phi[pidx[b][s]]) +
                         p.phi[pidx[b][s]] * std::conj(p.phi[pidx[a][s]]));
          v += Element::generator(ctx, psi_gen(vs[a], s, Charge::plus)) *
                   Element::generator(ctx, psi_gen(vs[b], s, Charge::minus)) * cplx(-h, 0.0) +
               Element::generator(ctx, psi_gen(vs[b], s, Charge::plus)) *
                   Element::generator(ctx, psi_gen(vs[a], s, Charge::minus)) * cplx(-h, 0.0);
        }
        return v;
      };

      auto integrand = [&](const bbf::GrowthOrder& ord, const std::vector<double>& s,
                           const BosonicPoint& p) {
        Element W(ctx);
        cplx wscal{};
        for (std::size_t k = 0; k < hpairs.size(); ++k) {
          auto [a, b] = hpairs[k];
          double sig = n > 1 ? bbf::pair_coefficient(ord, s, a, b) : 1.0;
          cplx c = cg * sig;
          cplx sc{};
          Element v = pair_element(a, b, hval[k], p, &sc);
          wscal += c * sc;
          W += v * c;
        }
        Element out = grassmann::exp_even(W) * std::exp(wscal);
        for (auto [a, b] : tree.edges) {
          cplx sc{};
          Element v = pair_element(a, b, hop_entry(m, vs[a], vs[b]), p, &sc);
          out = out * (v + Element(ctx, sc));
        }
        for (const Site& v : vs) out = out * f_site_element(fp, p, layout, ctx, v, S);
        return out * src;
      };

      PieceResult r =
          integrate_piece(dp, layout, ctx, Family::psi, env, integrand, opt, piece_id);
      total += r.value;
      err += r.err;
      (r.mc ? merr : qerr) += r.err;
      ++pieces;
    });
  }

  double nfact = std::tgamma(N + 1.0);
  cplx pref = ipow(cplx(0.0, pt.branch) / m.gamma, n);
  term.g = total / nfact;
  term.contribution = pref * term.g;
  term.err = std::abs(pref) * err / nfact;
  term.quad_err = std::abs(pref) * qerr / nfact;
  term.mc_err = std::abs(pref) * merr / nfact;
  term.cutoff_tail = std::abs(pref) * tail / nfact;
  term.pieces = pieces;
  return term;
}

DualTerm dual_cluster_term(const LatticeModel& m, const disorder::Disorder& d,
                           const SpectralPoint& pt, const Site& x, const Site& y, int N,
                           const ClusterOptions& opt, int sx, int sy) {
  const bool diag = x == y;
  const int n = N + 2 - (diag ? 1 : 0);
  const int S = m.ncolour;
  if (S != 1) throw std::invalid_argument("dual_cluster_term: one colour only");
  if (n > 8) throw std::invalid_argument("dual_cluster_term: order too high");
  (void)sx;
  (void)sy;

  Eigen::MatrixXcd H = build_hamiltonian(m);
  Eigen::MatrixXcd C =
      (H - pt.z() * Eigen::MatrixXcd::Identity(m.dim(), m.dim())).partialPivLu().inverse();

  disorder::FProfile fp = disorder::f_profile(d, cplx(pt.beta, 0.0), m.gamma);
  DualProfile T(fp, 1);

  // decreasing hull of the transform magnitudes as the bosonic envelope
  Envelope env;
  {
    const int g = 240;
    auto pts = std::make_shared<std::vector<double>>(g + 1);
    double vmax = T.vmax();
    for (int i = g; i >= 0; --i) {
      double v = vmax * i / g;
      double mv = std::max(std::abs(T.value(0, v)), std::abs(T.value(1, v)));
      (*pts)[i] = i == g ? mv : std::max(mv, (*pts)[i + 1]);
    }
    env.amplitude = (*pts)[0];
    double floor_v = std::max((*pts)[g], 1e-14 * (*pts)[0]);
    env.profile = [pts, vmax, g, floor_v](double u) {
      if (u >= vmax) return floor_v * std::exp(-(std::sqrt(u) - std::sqrt(vmax)));
      double t = u / vmax * g;
      int i = std::min(g - 1, static_cast<int>(t));
      return (*pts)[i] + (t - i) * ((*pts)[i + 1] - (*pts)[i]);
    };
  }

  std::vector<Site> cand;
  for (const Site& c : box_sites(m)) {
    if (c == x || c == y) continue;
    cand.push_back(c);
  }
  auto is_far = [&](const Site& c) {
    return std::min(site_dist(c, x), site_dist(c, y)) > static_cast<double>(opt.r_cut);
  };
  // monomial-weighted integrals of the transform hull for the neglected tuples
  std::vector<double> site_amp(2 * n + 3, 0.0);
  auto amp_for = [&](int degree) {
    if (site_amp[degree] == 0.0) {
      double s = 0.0, vmax = T.vmax();
      const int g = 400;
      for (int i = 0; i <= g; ++i) {
        double v = vmax * i / g;
        double mv = std::max(std::abs(T.value(0, v)), std::abs(T.value(1, v)));
        s += (vmax / g) * mv * std::pow(v, degree / 2.0);
      }
      site_amp[degree] = s + 1.0;  // crude +1 covers the fermionic constant term
    }
    return site_amp[degree];
  };

  DualTerm out;
  out.term.order = N;
  cplx total{};
  double err = 0.0, qerr = 0.0, merr = 0.0, tail = 0.0, mismatch = 0.0;
  long pieces = 0;
  std::uint64_t piece_id = 0;

  for (const bbf::Tree& tree : bbf::enumerate_trees(n)) {
    bbf::DecouplingMeasure dp = bbf::build_decoupling_measure(tree);
    std::vector<int> deg = bbf::coordination(tree);
    for_tuples(cand, N, [&](const std::vector<Site>& tuple) {
      std::vector<Site> vs(static_cast<std::size_t>(n));
      for (int k = 0; k < N; ++k) vs[k] = tuple[k];
      if (diag) {
        vs[n - 1] = x;
      } else {
        vs[n - 2] = x;
        vs[n - 1] = y;
      }
      auto cova = [&](int a, int b) { return C(m.index(vs[a]), m.index(vs[b])); };
      bool far = false;
      for (int k = 0; k < N; ++k) far = far || is_far(tuple[k]);
      ++piece_id;
      if (far) {
        double b = 1.0, growth = 0.0;
        for (auto [a, bb] : tree.edges) b *= 2.0 * std::abs(cova(a, bb));
        for (int a = 0; a < n; ++a) {
          int src = (vs[a] == x ? 1 : 0) + (vs[a] == y ? 1 : 0);
          b *= amp_for(deg[a] + src);
        }
        for (int a = 0; a < n; ++a)
          for (int bb = a; bb < n; ++bb)
            growth += (bb == a ? 1.0 : 2.0) * m.gamma * std::abs(cova(a, bb));
        tail += b * std::exp(growth);
        return;
      }

      BosonicLayout layout;
      {
        std::vector<SiteColour> entries;
        for (const Site& v : vs) entries.push_back({v, 0});
        layout = BosonicLayout(entries);
      }
      grassmann::ContextPtr ctx = layout.context(Family::eta);
      std::vector<int> pidx(vs.size());
      for (std::size_t a = 0; a < vs.size(); ++a)
        pidx[a] = static_cast<int>(layout.index({vs[a], 0}));

      // per-site transformed factors via the exact fermionic Fourier kernel
      std::vector<Element> hat0(vs.size()), hat1(vs.size()), hat_src(vs.size());
      for (std::size_t a = 0; a < vs.size(); ++a) {
        auto mini = Context::make({psi_gen(vs[a], 0, Charge::plus), psi_gen(vs[a], 0, Charge::minus),
                                   eta_gen(vs[a], 0, Charge::plus), eta_gen(vs[a], 0, Charge::minus)});
        hat0[a] = grassmann::fourier(Element(mini, 1.0)).in_context(ctx);
        hat1[a] = grassmann::fourier(Element::generator(mini, psi_gen(vs[a], 0, Charge::plus)) *
                                     Element::generator(mini, psi_gen(vs[a], 0, Charge::minus)))
                      .in_context(ctx);
        // source-multiplied factors: psi-, psi+ or the diagonal psi- psi+
        Element base(mini, 1.0);
        if (vs[a] == x && vs[a] == y) {
          hat_src[a] = grassmann::fourier(Element::generator(mini, psi_gen(vs[a], 0, Charge::minus)) *
                                          Element::generator(mini, psi_gen(vs[a], 0, Charge::plus)))
                           .in_context(ctx);
        } else if (vs[a] == x) {
          hat_src[a] =
              grassmann::fourier(Element::generator(mini, psi_gen(vs[a], 0, Charge::minus)))
                  .in_context(ctx) *
              cplx(0.0, -1.0);
        } else if (vs[a] == y) {
          hat_src[a] =
              grassmann::fourier(Element::generator(mini, psi_gen(vs[a], 0, Charge::plus)))
                  .in_context(ctx) *
              cplx(0.0, 1.0);
        }
      }
      // realization 2 substitutes odd factors in place; when x sits after y in
      // the ascending product the slid derivative picks up one transposition
      double order_sign = 1.0;
      if (!diag) {
        std::size_t posx = 0, posy = 0;
        for (std::size_t a = 0; a < vs.size(); ++a) {
          if (vs[a] == x) posx = a;
          if (vs[a] == y) posy = a;
        }
        order_sign = posx > posy ? -1.0 : 1.0;
      }

      const cplx cg = cplx(0.0, pt.branch) * m.gamma;
      auto pair_element = [&](int a, int b, const BosonicPoint& p, cplx* scal) {
        cplx cab = cova(a, b), cba = cova(b, a);
        *scal += cab * p.phi[pidx[a]] * std::conj(p.phi[pidx[b]]) +
                 cba * p.phi[pidx[b]] * std::conj(p.phi[pidx[a]]);
        return Element::generator(ctx, eta_gen(vs[a], 0, Charge::plus)) *
                   Element::generator(ctx, eta_gen(vs[b], 0, Charge::minus)) * cab +
               Element::generator(ctx, eta_gen(vs[b], 0, Charge::plus)) *
                   Element::generator(ctx, eta_gen(vs[a], 0, Charge::minus)) * cba;
      };

      auto integrand = [&](const bbf::GrowthOrder& ord, const std::vector<double>& s,
                           const BosonicPoint& p, bool second) {
        Element W(ctx);
        cplx wscal{};
        for (int a = 0; a < n; ++a) {
          // self couplings stay at full strength
          cplx caa = cova(a, a);
          wscal += cg * caa * std::norm(p.phi[pidx[a]]);
          W += Element::generator(ctx, eta_gen(vs[a], 0, Charge::plus)) *
               Element::generator(ctx, eta_gen(vs[a], 0, Charge::minus)) * (cg * caa);
          for (int b = a + 1; b < n; ++b) {
            double sig = n > 1 ? bbf::pair_coefficient(ord, s, a, b) : 1.0;
            cplx sc{};
            Element v = pair_element(a, b, p, &sc);
            wscal += cg * sig * sc;
            W += v * (cg * sig);
          }
        }
        Element out = grassmann::exp_even(W) * std::exp(wscal);
        for (auto [a, b] : tree.edges) {
          cplx sc{};
          Element v = pair_element(a, b, p, &sc);
          out = out * (v + Element(ctx, sc));
        }
        auto site_hat = [&](std::size_t a) {
          double v = std::norm(p.phi[pidx[a]]);
          return hat0[a] * T.value(0, v) + hat1[a] * T.value(1, v);
        };
        if (!second) {
          Element prod(ctx, 1.0);
          for (std::size_t a = 0; a < vs.size(); ++a) prod = prod * site_hat(a);
          Element D = grassmann::derivative(prod, eta_gen(y, 0, Charge::minus));
          D = grassmann::derivative(D, eta_gen(x, 0, Charge::plus));
          return out * D;
        }
        Element prod(ctx, order_sign);
        for (std::size_t a = 0; a < vs.size(); ++a) {
          bool is_src = vs[a] == x || vs[a] == y;
          Element f = is_src ? hat_src[a] * T.value(0, std::norm(p.phi[pidx[a]])) : site_hat(a);
          prod = prod * f;
        }
        return out * prod;
      };

      auto bound1 = [&](const bbf::GrowthOrder& ord, const std::vector<double>& s,
                        const BosonicPoint& p) { return integrand(ord, s, p, false); };
      auto bound2 = [&](const bbf::GrowthOrder& ord, const std::vector<double>& s,
                        const BosonicPoint& p) { return integrand(ord, s, p, true); };
      PieceResult r1 = integrate_piece(dp, layout, ctx, Family::eta, env, bound1, opt, piece_id);
      PieceResult r2 = integrate_piece(dp, layout, ctx, Family::eta, env, bound2, opt, piece_id);
      total += r1.value;
      err += r1.err;
      (r1.mc ? merr : qerr) += r1.err;
      mismatch += std::abs(r1.value - r2.value);
      ++pieces;
    });
  }

  double nfact = std::tgamma(N + 1.0);
  cplx pref = -ipow(cplx(0.0, pt.branch) * m.gamma, N - (diag ? 1 : 0));
  out.term.g = total / nfact;
  out.term.contribution = pref * out.term.g;
  out.term.err = std::abs(pref) * err / nfact;
  out.term.quad_err = std::abs(pref) * qerr / nfact;
  out.term.mc_err = std::abs(pref) * merr / nfact;
  out.term.cutoff_tail = std::abs(pref) * tail / nfact;
  out.term.pieces = pieces;
  out.source_mismatch = std::abs(pref) * mismatch / nfact;
  return out;
}

ClusterGreen cluster_green(const LatticeModel& m, const disorder::Disorder& d,
                           const SpectralPoint& pt, const Site& x, const Site& y, int N_max,
                           Expansion which, const ClusterOptions& opt) {
  ClusterGreen out;
  for (int N = 0; N <= N_max; ++N) {
    ClusterTerm t = which == Expansion::direct
                        ? direct_cluster_term(m, d, pt, x, y, N, opt)
                        : dual_cluster_term(m, d, pt, x, y, N, opt).term;
    out.value += t.contribution;
    out.err += t.err + t.cutoff_tail;
    out.orders.push_back(t);
  }

  const bool diag = x == y;
  const double dist = site_dist(x, y);
  const double theta = 0.5;
  double certified_tail = std::numeric_limits<double>::infinity();
  bool certified = false;

  if (which == Expansion::direct) {
    bounds::FactorialBound imb = bounds::imb_record(d, pt.z(), m.gamma);
    double alpha = m.hopping == Hopping::laplacian ? 1.0 : m.hop_rate;
    double calC = m.hopping == Hopping::laplacian ? m.ncolour * std::exp(1.0)
                                                  : m.ncolour * m.hop_amp;
    bounds::StrongChain chain =
        bounds::strong_chain(imb, calC, alpha, m.D, m.ncolour, theta);
    double r = chain.ratio(m.gamma, pt.E);
    if (std::isfinite(r) && r < 1.0 && !chain.stripping.diverged) {
      double t0 = chain.order_bound(N_max + 1, m.gamma, pt.E, dist, diag);
      if (std::isfinite(t0)) {
        certified_tail = t0 / (1.0 - r);
        certified = true;
      }
    }
  } else {
    Eigen::VectorXd ev =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(build_hamiltonian(m).real())
            .eigenvalues();
    double delta = std::numeric_limits<double>::infinity();
    for (int k = 0; k < ev.size(); ++k) delta = std::min(delta, std::abs(ev[k] - pt.E));
    if (delta > 0.0) {
      Eigen::MatrixXcd C = (build_hamiltonian(m) -
                            pt.z() * Eigen::MatrixXcd::Identity(m.dim(), m.dim()))
                               .partialPivLu()
                               .inverse();
      double amp = 0.0, rate = std::sqrt(delta);
      int dpow = std::max(m.D - 2, 0);
      for (int i = 0; i < m.nsites(); ++i)
        for (int j = 0; j < m.nsites(); ++j) {
          double dd = site_dist(m.site(i), m.site(j));
          amp = std::max(amp, std::abs(C(i * m.ncolour, j * m.ncolour)) *
                                  std::exp(rate * dd) * (1.0 + std::pow(dd, dpow)));
        }
      bounds::FactorialBound idb = bounds::idb_record(d, pt.z(), m.gamma);
      bounds::WeakChain chain = bounds::weak_chain(idb, amp, delta, m.D, m.ncolour, theta);
      double r = chain.ratio(m.gamma);
      if (std::isfinite(chain.constant) && r < 1.0 && !chain.stripping.diverged) {
        double t0 = chain.order_bound(N_max + 1, m.gamma, dist, diag);
        if (std::isfinite(t0)) {
          certified_tail = t0 / (1.0 - r);
          certified = true;
        }
      }
    }
  }

  if (certified) {
    out.truncation = certified_tail;
    out.certified = true;
    return out;
  }
  // empirical geometric fallback from the last two non-vanishing orders
  double last = 0.0, prev = 0.0;
  for (const auto& t : out.orders) {
    double a = std::abs(t.contribution);
    if (a > 0.0) {
      prev = last;
      last = a;
    }
  }
  if (prev > 0.0 && last > 0.0 && last < prev) {
    double rhat = last / prev;
    out.truncation = last * 2.0 * rhat / (1.0 - rhat);
  } else {
    out.truncation = std::numeric_limits<double>::infinity();
    out.diverged = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// diagonal Taylor terms of the dual expansion (derivative-operator form)

namespace {

// truncated polynomial in the bosonic components with Grassmann coefficients;
// packed exponents, 4 bits per variable, variable 2a = phi+_a, 2a+1 = phi-_a
struct Jet {
  std::map<std::uint64_t, Element> terms;
};

int jet_exp(std::uint64_t key, int var) { return static_cast<int>((key >> (4 * var)) & 0xF); }
std::uint64_t jet_dec(std::uint64_t key, int var) { return key - (std::uint64_t{1} << (4 * var)); }

void jet_add(Jet& j, std::uint64_t key, const Element& e) {
  if (e.is_zero()) return;
  auto [it, fresh] = j.terms.emplace(key, e);
  if (!fresh) it->second += e;
}

Jet jet_mul(const Jet& a, const Jet& b) {
  Jet out;
  for (const auto& [ka, ea] : a.terms)
    for (const auto& [kb, eb] : b.terms) jet_add(out, ka + kb, ea * eb);
  return out;
}

// -c_ab d/dphi-_a d/dphi+_b  +  c_ab d/dpsi-_a d/dpsi+_b   (plus the mirrored
// pair for a != b); the rightmost derivative acts first
Jet jet_apply_halfpair(const Jet& j, int a, int b, cplx c, const std::vector<Site>& vs) {
  Jet out;
  for (const auto& [key, el] : j.terms) {
    int ema = jet_exp(key, 2 * a + 1), epb = jet_exp(key, 2 * b);
    if (ema > 0 && epb > 0) {
      cplx f = -c * static_cast<double>(ema) * static_cast<double>(epb);
      jet_add(out, jet_dec(jet_dec(key, 2 * a + 1), 2 * b), el * f);
    }
    Element de = grassmann::derivative(el, psi_gen(vs[b], 0, Charge::plus));
    de = grassmann::derivative(de, psi_gen(vs[a], 0, Charge::minus));
    jet_add(out, key, de * c);
  }
  return out;
}

Jet jet_apply_item(const Jet& j, int a, int b, cplx cab, cplx cba,
                   const std::vector<Site>& vs) {
  if (a == b) return jet_apply_halfpair(j, a, a, cab, vs);
  Jet first = jet_apply_halfpair(j, a, b, cab, vs);
  Jet second = jet_apply_halfpair(j, b, a, cba, vs);
  for (const auto& [k, e] : second.terms) jet_add(first, k, e);
  return first;
}

}  // namespace

cplx dual_taylor_term(const LatticeModel& m, const disorder::Disorder& d, double E, int N,
                      int l, const ClusterOptions& opt) {
  if (m.ncolour != 1) throw std::invalid_argument("dual_taylor_term: one colour only");
  const int n = N + 1;
  if (2 * n > 16 || l + N + 1 > 14)
    throw std::invalid_argument("dual_taylor_term: order too high");
  Eigen::MatrixXcd C =
      (build_hamiltonian(m) - cplx(E, 0.0) * Eigen::MatrixXcd::Identity(m.dim(), m.dim()))
          .partialPivLu()
          .inverse();
  disorder::FProfile fp = disorder::f_profile(d, cplx(0.0, 0.0), m.gamma);
  const Site origin{0, 0, 0};

  std::vector<Site> cand;
  for (const Site& c : box_sites(m)) {
    if (c == origin) continue;
    if (site_dist(c, origin) > static_cast<double>(opt.r_cut)) continue;
    cand.push_back(c);
  }

  const int jmax = l + N + 1;
  cplx total{};
  for (const bbf::Tree& tree : bbf::enumerate_trees(n)) {
    bbf::DecouplingMeasure dp = bbf::build_decoupling_measure(tree);
    for_tuples(cand, N, [&](const std::vector<Site>& tuple) {
      std::vector<Site> vs(static_cast<std::size_t>(n));
      for (int k = 0; k < N; ++k) vs[k] = tuple[k];
      vs[n - 1] = origin;
      auto cova = [&](int a, int b) { return C(m.index(vs[a]), m.index(vs[b])); };

      std::vector<GeneratorIndex> gens;
      for (const Site& v : vs)
        for (Charge q : {Charge::plus, Charge::minus}) gens.push_back(psi_gen(v, 0, q));
      grassmann::ContextPtr ctx = Context::make(gens);

      // site factor series sum_j u^j/j! (f^(j)(0) + f^(j+1)(0) psi+ psi-)
      Jet base;
      base.terms.emplace(0, Element(ctx, 1.0));
      for (int a = 0; a < n; ++a) {
        Jet fa;
        double fact = 1.0;
        for (int j = 0; j <= jmax; ++j) {
          if (j > 0) fact *= j;
          Element coeff(ctx, fp.deriv(j, 0.0) / fact);
          coeff += Element::generator(ctx, psi_gen(vs[a], 0, Charge::plus)) *
                   Element::generator(ctx, psi_gen(vs[a], 0, Charge::minus)) *
                   (fp.deriv(j + 1, 0.0) / fact);
          std::uint64_t key = (static_cast<std::uint64_t>(j) << (4 * (2 * a))) |
                              (static_cast<std::uint64_t>(j) << (4 * (2 * a + 1)));
          jet_add(fa, key, coeff);
        }
        base = jet_mul(base, fa);
      }
      {
        Element src = Element::generator(ctx, psi_gen(origin, 0, Charge::minus)) *
                      Element::generator(ctx, psi_gen(origin, 0, Charge::plus));
        for (auto& [k, e] : base.terms) e = e * src;
      }
      for (auto [a, b] : tree.edges) base = jet_apply_item(base, a, b, cova(a, b), cova(b, a), vs);

      // items of the exponent: unordered pairs with stage coefficients plus
      // the always-on self couplings
      struct Item {
        int a, b;
      };
      std::vector<Item> items;
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) items.push_back({a, b});

      std::vector<int> counts(items.size(), 0);
      std::function<void(std::size_t, int)> over = [&](std::size_t i, int left) {
        if (i + 1 == items.size()) {
          counts[i] = left;
          // multinomial weight and the measure expectation of the stage product
          double multi = std::tgamma(l + 1.0);
          for (int c : counts) multi /= std::tgamma(c + 1.0);
          double es = 1.0;
          if (n > 1) {
            bool needs = false;
            for (std::size_t k = 0; k < items.size(); ++k)
              needs = needs || (counts[k] > 0 && items[k].a != items[k].b);
            if (needs) {
              es = bbf::measure_expectation(
                       dp, scalar_context(), opt.stage_nodes,
                       [&](const bbf::GrowthOrder& ord, const std::vector<double>& s) {
                         double w = 1.0;
                         for (std::size_t k = 0; k < items.size(); ++k)
                           if (items[k].a != items[k].b)
                             w *= std::pow(bbf::pair_coefficient(ord, s, items[k].a, items[k].b),
                                           counts[k]);
                         return Element(scalar_context(), cplx(w, 0.0));
                       })
                       .scalar_part()
                       .real();
            }
          }
          Jet cur = base;
          for (std::size_t k = 0; k < items.size(); ++k)
            for (int c = 0; c < counts[k]; ++c)
              cur = jet_apply_item(cur, items[k].a, items[k].b, cova(items[k].a, items[k].b),
                                   cova(items[k].b, items[k].a), vs);
          auto it = cur.terms.find(0);
          if (it != cur.terms.end()) total += multi * es * it->second.scalar_part();
          counts[i] = 0;
          return;
        }
        for (int c = 0; c <= left; ++c) {
          counts[i] = c;
          over(i + 1, left - c);
        }
        counts[i] = 0;
      };
      if (items.empty()) {
        if (l == 0) {
          auto it = base.terms.find(0);
          if (it != base.terms.end()) total += it->second.scalar_part();
        }
      } else {
        over(0, l);
      }
    });
  }
  return total / std::tgamma(N + 1.0);
}

}  // namespace susy::randschro
