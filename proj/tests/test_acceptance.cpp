// Acceptance gate: one test case per criterion, one printed verdict line each.
// Tolerances are pinned here; the detail string carries measured/tolerance.

#include <doctest.h>

#include "susy/bounds.hpp"
#include "susy/randschro.hpp"
#include "susy/replica.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <complex>
#include <cstdio>
#include <string>
#include <vector>

using namespace susy;
using grassmann::cplx;
using grassmann::Site;
using rng::Stream;
namespace rs = susy::randschro;
namespace bd = susy::bounds;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double secs() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void verdict(int id, const char* name, const std::string& detail, bool pass, double secs) {
  std::printf("criterion %2d %-28s %-64s %6.1fs  %s\n", id, name, detail.c_str(), secs,
              pass ? "pass" : "FAIL");
  std::fflush(stdout);
  CHECK_MESSAGE(pass, "criterion ", id, " ", name, ": ", detail);
}

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

grassmann::ContextPtr psi_chain(int nsites) {
  std::vector<grassmann::GeneratorIndex> g;
  for (int i = 0; i < nsites; ++i)
    for (auto c : {grassmann::Charge::plus, grassmann::Charge::minus})
      g.push_back(grassmann::gen(grassmann::Family::psi, Site{i, 0, 0}, 0, c));
  return grassmann::Context::make(g);
}

grassmann::Element random_element(const grassmann::ContextPtr& ctx, Stream& st, int terms) {
  grassmann::Element e(ctx);
  for (int t = 0; t < terms; ++t)
    e += grassmann::Element::monomial(ctx, st.next_u64() & ctx->full_mask(),
                                      cplx(st.uniform(-1, 1), st.uniform(-1, 1)));
  return e;
}

rs::LatticeModel chain6(double gamma) {
  rs::LatticeModel m;
  m.D = 1;
  m.box = {6, 1, 1};
  m.gamma = gamma;
  return m;
}

// f(Phi) = g(phi+ phi-) + g'(phi+ phi-) psi+ psi- on one site, supersymmetric
superfn::SuperFunction gauss_pair_factor(double a) {
  superfn::SuperFunction f;
  f.layout = superfn::BosonicLayout({superfn::SiteColour{{0, 0, 0}, 0}});
  f.ctx = f.layout.context();
  f.envelope = {1.0, [a](double r2) { return std::exp(-a * r2); }};
  auto ctx = f.ctx;
  grassmann::Element top =
      grassmann::Element::generator(ctx, ctx->generator(0)) *
      grassmann::Element::generator(ctx, ctx->generator(1));
  f.eval = [ctx, top, a](const superfn::BosonicPoint& p) {
    double t = std::norm(p.phi[0]);
    grassmann::Element out(ctx, std::exp(-a * t));
    return out + top * cplx(-a * std::exp(-a * t), 0.0);
  };
  return f;
}

grassmann::Element flip_fermions(const grassmann::Element& e) {
  grassmann::Element out(e.context());
  for (const auto& [m, c] : e.coefficients()) out.set(m, std::popcount(m) % 2 ? -c : c);
  return out;
}

}  // namespace

TEST_CASE("criterion 1: exact algebra") {
  Timer tm;
  auto ctx = psi_chain(5);  // 10 generators
  REQUIRE(ctx->size() == 10);
  double anti = 0.0;
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) {
      auto a = grassmann::Element::generator(ctx, ctx->generator(i));
      auto b = grassmann::Element::generator(ctx, ctx->generator(j));
      anti = std::max(anti, (a * b + b * a).norm());
    }
  // every monomial pair against a brute-force inversion count
  double sign_err = 0.0;
  for (std::uint64_t a = 0; a < 1024; ++a)
    for (std::uint64_t b = 0; b < 1024; ++b) {
      auto prod =
          grassmann::Element::monomial(ctx, a, 1.0) * grassmann::Element::monomial(ctx, b, 1.0);
      cplx got = (a & b) ? prod.coefficient(0) + prod.coefficient(a | b) : prod.coefficient(a | b);
      int inv = 0;
      for (int i = 0; i < 10; ++i)
        if (b >> i & 1)
          for (int j = i + 1; j < 10; ++j) inv += static_cast<int>(a >> j & 1);
      cplx want = (a & b) ? cplx{} : cplx(inv % 2 ? -1.0 : 1.0, 0.0);
      sign_err = std::max(sign_err, std::abs(got - want));
    }
  Stream st(71, 0);
  double submult = 0.0, assoc = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    auto a = random_element(ctx, st, 6), b = random_element(ctx, st, 6),
         c = random_element(ctx, st, 4);
    submult = std::max(submult, (a * b).norm() - a.norm() * b.norm());
    assoc = std::max(assoc, ((a * b) * c - a * (b * c)).norm());
  }
  bool pass = anti == 0.0 && sign_err == 0.0 && submult <= 1e-12 && assoc <= 1e-12;
  double t = tm.secs();
  pass = pass && t < 1.0;
  verdict(1, "algebra",
          fmt("sign/anti exact (%.1e), submult %.1e, assoc %.1e <= 1e-12",
              std::max(anti, sign_err), submult, assoc),
          pass, t);
}

TEST_CASE("criterion 2: fourier and plancherel") {
  Timer tm;
  auto ctx = psi_chain(3);
  Stream st(73, 0);
  double round = 0.0, norm_pres = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    auto e = random_element(ctx, st, 8);
    auto ehat = grassmann::fourier(e);
    round = std::max(round, (grassmann::fourier_inverse(ehat).in_context(ctx) - e).norm());
    norm_pres = std::max(norm_pres, std::abs(ehat.norm() - e.norm()));
  }
  // super Plancherel on factorized gaussian pairs:
  // int dPhi f g  =  int dKappa fhat(kappa) ghat(-kappa) (fermion parity flip)
  superfn::Integrator inner;
  inner.nodes = 56;
  superfn::Integrator outer;
  outer.nodes = 32;
  outer.estimate_error = false;
  double planch = 0.0;
  for (auto [a, b] : {std::pair{1.0, 2.0}, std::pair{0.7, 1.3}}) {
    auto f = gauss_pair_factor(a), g = gauss_pair_factor(b);
    superfn::SuperFunction fg = f;
    auto fe = f.eval, ge = g.eval;
    auto fctx = f.ctx;
    fg.eval = [fe, ge, fctx](const superfn::BosonicPoint& p) {
      return fe(p) * ge(p).in_context(fctx);
    };
    fg.envelope = {1.0, [a = a, b = b](double r2) { return std::exp(-(a + b) * r2); }};
    superfn::Integrator gl;
    gl.nodes = 48;
    auto lhs = superfn::super_integrate(fg, gl);

    auto fh = superfn::super_fourier(f, inner);
    auto gh = superfn::super_fourier(g, inner);
    fh.envelope = {1.0, [a = a](double r2) { return std::exp(-r2 / a); }};
    superfn::SuperFunction pair = fh;
    auto fhe = fh.eval, ghe = gh.eval;
    auto pctx = fh.ctx;
    pair.eval = [fhe, ghe, pctx](const superfn::BosonicPoint& p) {
      superfn::BosonicPoint m = p;
      for (auto& v : m.phi) v = -v;
      return fhe(p).in_context(pctx) * flip_fermions(ghe(m)).in_context(pctx);
    };
    pair.envelope = {1.0, [a = a, b = b](double r2) {
                       return std::exp(-(1.0 / a + 1.0 / b) * r2);
                     }};
    auto rhs = superfn::super_integrate(pair, outer);
    planch = std::max(planch, std::abs(rhs.value - lhs.value) / std::abs(lhs.value));
  }
  bool pass = round <= 1e-12 && norm_pres <= 1e-12 && planch <= 1e-6;
  double t = tm.secs();
  pass = pass && t < 30.0;
  verdict(2, "fourier",
          fmt("round trip %.1e, norm %.1e <= 1e-12, plancherel rel %.1e <= 1e-6", round,
              norm_pres, planch),
          pass, t);
}

TEST_CASE("criterion 3: localization") {
  Timer tm;
  double worst = 0.0;
  for (auto d : {disorder::gaussian(1.0), disorder::bump()})
    for (cplx z : {cplx(0.0, 0.0), cplx(-0.1, 0.3), cplx(-0.1, -0.3)})
      for (int S : {1, 2}) {
        auto fp = disorder::f_profile(d, z, 1.0);
        bool bump = d.kind == disorder::Kind::bump;
        // integral reduced exactly to the radial line; value at zero is 1
        cplx got = rs::radial_site_integral(fp, S, bump ? 760.0 : 80.0);
        worst = std::max(worst, std::abs(got - cplx(1.0, 0.0)));
      }
  bool pass = worst <= 1e-5;
  double t = tm.secs();
  pass = pass && t < 120.0;
  verdict(3, "localization",
          fmt("worst relative error %.1e <= 1e-5 (both disorders, 3 z, S=1,2)", worst), pass, t);
}

TEST_CASE("criterion 4: replica inverse") {
  Timer tm;
  Stream st(79, 0);
  superfn::Integrator how;
  how.nodes = 64;
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    int n = 1 + static_cast<int>(st.uniform() * 4.0);
    replica::Matrix A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = cplx(st.uniform(-1, 1), st.uniform(-1, 1));
    A += 2.5 * replica::Matrix::Identity(n, n);
    auto inv = A.partialPivLu().inverse().eval();
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        worst =
            std::max(worst, std::abs(replica::replica_inverse(A, x, y, how).value - inv(x, y)));
  }
  bool pass = worst <= 1e-8;
  double t = tm.secs();
  pass = pass && t < 120.0;
  verdict(4, "replica", fmt("worst entry error %.1e <= 1e-8 (20 matrices, n <= 4)", worst), pass,
          t);
}

TEST_CASE("criterion 5: tree interpolation") {
  Timer tm;
  Stream st(83, 0);
  double residual = 0.0;
  for (int n : {2, 3}) {
    std::vector<std::vector<cplx>> v(n, std::vector<cplx>(n));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        v[i][j] = v[j][i] = cplx(st.uniform(-0.4, 0.4), st.uniform(-0.4, 0.4));
    residual = std::max(residual, bbf::bbf_verify(bbf::PairPotential::scalars(v), 16));
  }
  {
    // fermionic pair potential, one psi pair per vertex
    int n = 3;
    auto ctx = psi_chain(n);
    bbf::PairPotential v;
    v.ctx = ctx;
    v.pair.assign(n, std::vector<grassmann::Element>(n, grassmann::Element(ctx)));
    v.self.assign(n, grassmann::Element(ctx));
    auto pp = [&](int i, grassmann::Charge c) {
      return grassmann::Element::generator(
          ctx, grassmann::gen(grassmann::Family::psi, Site{i, 0, 0}, 0, c));
    };
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        cplx c(st.uniform(-0.3, 0.3), st.uniform(-0.3, 0.3));
        v.pair[i][j] = v.pair[j][i] = (pp(i, grassmann::Charge::plus) *
                                           pp(j, grassmann::Charge::minus) +
                                       pp(j, grassmann::Charge::plus) *
                                           pp(i, grassmann::Charge::minus)) *
                                      c;
      }
    residual = std::max(residual, bbf::bbf_verify(v, 12));
  }
  long count_err = 0;
  const long bell[] = {1, 1, 2, 5, 15};
  for (int n = 1; n <= 4; ++n)
    count_err += std::labs(static_cast<long>(bbf::partitions(n).size()) - bell[n]);
  for (int n = 2; n <= 6; ++n)
    count_err += std::labs(static_cast<long>(bbf::enumerate_trees(n).size()) -
                           static_cast<long>(std::pow(n, n - 2) + 0.5));
  // decoupled potentials sampled from dp_T stay in the partition-pattern hull
  std::vector<std::pair<int, int>> prs;
  for (int x = 0; x < 4; ++x)
    for (int y = x + 1; y < 4; ++y) prs.emplace_back(x, y);
  auto trees = bbf::enumerate_trees(4);
  std::vector<double> s, sigma(prs.size());
  double hull = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto& t = trees[static_cast<std::size_t>(st.uniform() * trees.size())];
    auto dp = bbf::build_decoupling_measure(t);
    auto o = bbf::sample_measure(dp, st, s);
    for (std::size_t k = 0; k < prs.size(); ++k)
      sigma[k] = bbf::pair_coefficient(dp.orders[o], s, prs[k].first, prs[k].second);
    hull = std::max(hull, bbf::convexity_residual(4, prs, sigma));
  }
  bool pass = residual <= 1e-8 && count_err == 0 && hull <= 1e-4;
  double t = tm.secs();
  pass = pass && t < 120.0;
  verdict(5, "bbf",
          fmt("residual %.1e <= 1e-8, counts exact, hull distance %.1e (1000 samples)", residual,
              hull),
          pass, t);
}

TEST_CASE("criterion 6: green equivalence") {
  Timer tm;
  auto d = disorder::gaussian(1.0);
  double worst_strong = 0.0, worst_weak = 0.0;

  // strong coupling: expansion in 1/gamma vs direct Monte Carlo
  {
    auto m = chain6(20.0);
    rs::SpectralPoint pt{0.0, 0.1, 0.0, +1};
    rs::ClusterOptions opt;
    opt.boson_nodes = 24;
    opt.max_planes_tensor = 2;
    opt.mc_samples = 4000;
    opt.seed = 101;
    // the expansion is symmetric under x <-> y; spot-check once, then
    // evaluate unordered pairs and compare against MC for both orderings
    {
      auto a = rs::cluster_green(m, d, pt, m.site(0), m.site(1), 2, rs::Expansion::direct, opt);
      auto b = rs::cluster_green(m, d, pt, m.site(1), m.site(0), 2, rs::Expansion::direct, opt);
      CHECK(std::abs(a.value - b.value) <= 1e-12 + 3.0 * (a.err + b.err));
    }
    for (int x = 0; x < 6; ++x)
      for (int y = x; y < 6 && y - x <= 3; ++y) {
        auto g = rs::cluster_green(m, d, pt, m.site(x), m.site(y), 2, rs::Expansion::direct, opt);
        for (auto [xi, yi] : {std::pair{x, y}, std::pair{y, x}}) {
          auto mc = rs::mc_green(m, d, pt, m.site(xi), m.site(yi), 100000,
                                 211 + 31ull * xi + 7ull * yi);
          double diff = std::abs(g.value - mc.mean(0, 0));
          // |x-y| = 3 leaves a single order at N <= 2, so the empirical tail
          // estimate degenerates; dropped there (a strictly tighter check)
          double trunc = std::isfinite(g.truncation) ? g.truncation : 0.0;
          double tol = trunc + 3.0 * std::hypot(mc.err(0, 0), g.err);
          worst_strong = std::max(worst_strong, diff / tol);
          if (xi == yi) break;
        }
      }
  }

  // weak coupling: expansion in gamma vs small-eps extrapolated Monte Carlo
  {
    auto m = chain6(0.05);
    rs::SpectralPoint pt{-0.5, 0.0, 0.0, +1};  // 0.5 below the infinite band
    rs::ClusterOptions opt;
    opt.boson_nodes = 160;  // the transformed profile oscillates
    opt.max_planes_tensor = 1;
    opt.mc_samples = 20000;
    opt.seed = 103;
    {
      auto a = rs::cluster_green(m, d, pt, m.site(0), m.site(1), 1, rs::Expansion::dual, opt);
      auto b = rs::cluster_green(m, d, pt, m.site(1), m.site(0), 1, rs::Expansion::dual, opt);
      CHECK(std::abs(a.value - b.value) <= 1e-12 + 3.0 * (a.err + b.err));
    }
    const double eps[3] = {0.04, 0.08, 0.12};
    const double co[3] = {3.0, -3.0, 1.0};  // quadratic extrapolation to eps = 0
    for (int x = 0; x < 6; ++x)
      for (int y = x; y < 6 && y - x <= 3; ++y) {
        auto g = rs::cluster_green(m, d, pt, m.site(x), m.site(y), 1, rs::Expansion::dual, opt);
        for (auto [xi, yi] : {std::pair{x, y}, std::pair{y, x}}) {
          cplx extr{};
          double var = 0.0;
          for (int k = 0; k < 3; ++k) {
            rs::SpectralPoint pk{pt.E, eps[k], 0.0, +1};
            auto mc = rs::mc_green(m, d, pk, m.site(xi), m.site(yi), 100000,
                                   307 + 41ull * xi + 11ull * yi + 5ull * k);
            extr += co[k] * mc.mean(0, 0);
            var += co[k] * co[k] * mc.err(0, 0) * mc.err(0, 0);
          }
          double diff = std::abs(g.value - extr);
          double tol = g.truncation + 3.0 * std::hypot(std::sqrt(var), g.err);
          worst_weak = std::max(worst_weak, diff / tol);
          if (xi == yi) break;
        }
      }
  }
  bool pass = worst_strong <= 1.0 && worst_weak <= 1.0;
  double t = tm.secs();
  pass = pass && t < 1800.0;
  verdict(6, "green equivalence",
          fmt("worst |diff|/(trunc + 3 sigma): strong %.2f, weak %.2f <= 1", worst_strong,
              worst_weak),
          pass, t);
}

TEST_CASE("criterion 7: strong-coupling decay") {
  Timer tm;
  auto m = chain6(20.0);
  auto d = disorder::gaussian(1.0);
  rs::SpectralPoint pt{0.0, 0.1, 0.0, +1};
  rs::ClusterOptions opt;
  opt.boson_nodes = 20;
  opt.max_planes_tensor = 2;
  opt.mc_samples = 4000;
  opt.seed = 107;
  std::vector<double> r, mlog;
  for (int dist = 1; dist <= 4; ++dist) {
    auto g =
        rs::cluster_green(m, d, pt, m.site(0), m.site(dist), dist - 1, rs::Expansion::direct, opt);
    REQUIRE(std::abs(g.value) > 0.0);
    r.push_back(dist);
    mlog.push_back(-std::log(std::abs(g.value)));
  }
  double rate = fit_slope(r, mlog);
  bool pass = rate >= 0.5;
  double t = tm.secs();
  pass = pass && t < 600.0;
  verdict(7, "decay rate", fmt("fitted rate of |E G(0,r)|, r=1..4: %.2f >= theta alpha = 0.5", rate),
          pass, t);
}

TEST_CASE("criterion 8: threshold scaling") {
  Timer tm;
  double worst = 0.0;
  std::string detail;
  for (int S : {1, 2}) {
    auto imb = bd::imb_record(disorder::gaussian(1.0), cplx(0.0, 0.0), 1.0);
    auto c = bd::strong_chain(imb, S * std::exp(1.0), 1.0, 1, S, 0.5);
    std::vector<double> xs, ys;
    for (double e = 1e2; e <= 1e6 * 1.001; e *= 10.0) {
      xs.push_back(std::log(e));
      ys.push_back(std::log(c.gamma_min(e)));
    }
    double want = double(S) / (1.0 + S);
    double rel = std::abs(fit_slope(xs, ys) - want) / want;
    worst = std::max(worst, rel);
    detail += fmt("S=%d slope vs %.3f rel %.1e  ", S, want, rel);
  }
  bool pass = worst <= 0.02;
  verdict(8, "threshold scaling", detail + "<= 2e-2", pass, tm.secs());
}

TEST_CASE("criterion 9: lifshitz tails") {
  Timer tm;
  // (a) the minimized bound decays like exp(-c (delta/gamma)^{1/2p})
  double exp_err = 0.0;
  for (double p : {0.5, 1.0}) {
    std::vector<double> xs, ys;
    for (double ratio = 1e3; ratio <= 1e7 * 1.001; ratio *= 10.0) {
      auto b = bd::lifshitz_bound(1.0, ratio, 2.0, p);
      xs.push_back(std::log(ratio));
      ys.push_back(std::log(-(b.log_bound - std::log(2.0))));
    }
    double want = 1.0 / (2.0 * p);
    exp_err = std::max(exp_err, std::abs(fit_slope(xs, ys) - want) / want);
  }
  // (b) measured LDOS below the bound on the chain at delta/gamma = 5, 10, 20
  auto d = disorder::gaussian(1.0);
  double E = -0.5, eps = 0.05;
  auto m0 = chain6(1.0);
  Eigen::VectorXd ev =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(rs::build_hamiltonian(m0).real())
          .eigenvalues();
  double delta = ev.minCoeff() - E;
  int dos_viol = 0;
  bool dos_finite = true;
  for (double ratio : {5.0, 10.0, 20.0}) {
    auto m = chain6(delta / ratio);
    auto r = rs::mc_ldos(m, d, E, eps, 20000, 109 + static_cast<std::uint64_t>(ratio));
    auto idb = bd::idb_record(d, cplx(E, eps), m.gamma);
    // theta = 0: the weighted constants stay inside double range
    auto weak = bd::weak_chain(idb, 1.0, delta, 1, 1, 0.0);
    dos_finite = dos_finite && std::isfinite(weak.constant);
    double bound = bd::lifshitz_bound(m.gamma, delta, weak.constant, idb.p).bound;
    if (!(r.value - 3.0 * r.err <= bound)) ++dos_viol;
  }
  // (c) parity selection: even l + N Taylor terms of the dual weight vanish
  rs::ClusterOptions opt;
  opt.boson_nodes = 160;
  opt.max_planes_tensor = 1;
  opt.mc_samples = 100000;
  auto m2 = chain6(0.08);
  m2.box = {2, 1, 1};
  double even = 0.0, odd_scale = 0.0;
  for (int l : {0, 2, 4}) even = std::max(even, std::abs(rs::dual_taylor_term(m2, d, -1.0, 0, l, opt)));
  for (int l : {1, 3}) even = std::max(even, std::abs(rs::dual_taylor_term(m2, d, -1.0, 1, l, opt)));
  for (int l : {1, 3})
    odd_scale = std::max(odd_scale, std::abs(rs::dual_taylor_term(m2, d, -1.0, 0, l, opt)));
  bool pass = exp_err <= 0.05 && dos_viol == 0 && dos_finite && even <= 1e-10 && odd_scale > 1e-4;
  double t = tm.secs();
  pass = pass && t < 1200.0;
  verdict(9, "lifshitz",
          fmt("exponent rel %.1e <= 5e-2, dos violations %d, even-parity %.1e <= 1e-10", exp_err,
              dos_viol, even),
          pass, t);
}

TEST_CASE("criterion 10: tree stripping") {
  Timer tm;
  const int len = 12;
  double amp = 1.4, alpha = 0.9, theta = 0.5, q = 1.5;
  std::vector<bd::LatticeSite> sites(len);
  Eigen::MatrixXcd H(len, len);
  for (int i = 0; i < len; ++i) sites[i] = {i, 0, 0};
  for (int i = 0; i < len; ++i)
    for (int j = 0; j < len; ++j) H(i, j) = amp * std::exp(-alpha * std::abs(i - j));
  auto np = bd::kernel_norms(amp, alpha, 1, theta);
  double cq = bd::stripping_constant(q, theta, alpha, 1, bd::omega_constant(1).value).value;
  Stream st(113, 0);
  int checked = 0, violations = 0;
  while (checked < 500) {
    int n = 2 + static_cast<int>(st.uniform() * 4.0);
    std::vector<int> code(std::max(0, n - 2));
    for (auto& c : code) c = static_cast<int>(st.uniform() * n);
    auto t = bbf::prufer_decode(n, code);
    int x = static_cast<int>(st.uniform() * len);
    bool diag = st.uniform() < 0.25;
    int y = diag ? x : static_cast<int>(st.uniform() * len);
    if ((!diag && y == x) || n - (diag ? 1 : 2) < 0) continue;
    double lhs = bd::tree_coupling_sum(H, sites, 1, t, x, y);
    double rhs = std::exp(-theta * alpha * std::abs(x - y)) *
                 std::pow(np.weighted_inf1, n - (diag ? 1 : 2)) *
                 std::pow(np.weighted_infinf, diag ? 0 : 1);
    for (int deg : bbf::coordination(t))
      rhs *= std::pow(cq, deg - 1) / std::pow(std::tgamma(deg + 1.0), q);
    if (lhs > rhs * (1.0 + 1e-12)) ++violations;
    ++checked;
  }
  bool pass = violations == 0;
  double t = tm.secs();
  pass = pass && t < 60.0;
  verdict(10, "tree stripping", fmt("%d violations in 500 random (tree, box) instances", violations),
          pass, t);
}

TEST_CASE("criterion 11: factorial bounds") {
  Timer tm;
  int violations = 0;
  double margin = 0.0;
  for (auto d : {disorder::gaussian(1.0), disorder::bump()}) {
    auto fp = disorder::f_profile(d, cplx(0.0, 0.0), 1.0);
    auto imb = bd::imb_record(d, cplx(0.0, 0.0), 1.0);
    auto idb = bd::idb_record(d, cplx(0.0, 0.0), 1.0);
    for (int n = 0; n <= 8; ++n) {
      double fac = std::tgamma(n + 1.0);
      for (int a = 0; a <= n; ++a) {
        double rhs_m = imb.K * std::pow(imb.M, n) * std::pow(fac, imb.p);
        double rhs_d = idb.K * std::pow(idb.M, n) * std::pow(fac, idb.p);
        double lm = bd::imb_integral(fp, a, n - a), ld = bd::idb_integral(fp, a, n - a);
        if (lm > rhs_m * (1.0 + 1e-12)) ++violations;
        if (ld > rhs_d * (1.0 + 1e-12)) ++violations;
        margin = std::max({margin, lm / rhs_m, ld / rhs_d});
      }
    }
  }
  bool pass = violations == 0;
  verdict(11, "imb/idb records",
          fmt("%d violations up to n = 8, both disorders (worst lhs/rhs %.2f)", violations, margin),
          pass, tm.secs());
}
