// Batch front end: verification suites, Green's-function runs, bound reports
// and LDOS scans. One JSON config, CSV/JSON output with the resolved config
// embedded; identical config + seed gives byte-identical files.

#include "susy/bbf.hpp"
#include "susy/bounds.hpp"
#include "susy/randschro.hpp"
#include "susy/replica.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

using json = nlohmann::json;
using susy::grassmann::cplx;
using susy::grassmann::Site;
namespace rs = susy::randschro;

namespace {

struct Precondition : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                    const std::string& where) {
  if (!j.is_object()) throw Precondition(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw Precondition(where + ": unknown key '" + it.key() + "'");
  }
}

rs::LatticeModel model_from(const json& cfg) {
  const json& m = cfg.at("model");
  reject_unknown(m, {"D", "box", "ncolour", "hopping", "hop_amp", "hop_rate", "gamma"}, "model");
  rs::LatticeModel out;
  out.D = m.value("D", 1);
  if (m.contains("box")) {
    auto b = m.at("box").get<std::vector<int>>();
    for (std::size_t i = 0; i < b.size() && i < 3; ++i) out.box[i] = b[i];
  }
  out.ncolour = m.value("ncolour", 1);
  std::string hop = m.value("hopping", "laplacian");
  if (hop == "laplacian")
    out.hopping = rs::Hopping::laplacian;
  else if (hop == "exponential")
    out.hopping = rs::Hopping::exponential;
  else
    throw Precondition("model.hopping: expected laplacian or exponential");
  out.hop_amp = m.value("hop_amp", 1.0);
  out.hop_rate = m.value("hop_rate", 1.0);
  out.gamma = m.at("gamma").get<double>();
  if (out.D < 1 || out.D > 3 || out.ncolour < 1)
    throw Precondition("model: D in 1..3 and ncolour >= 1 required");
  return out;
}

susy::disorder::Disorder disorder_from(const json& cfg) {
  const json& d = cfg.at("disorder");
  reject_unknown(d, {"kind", "sigma"}, "disorder");
  std::string kind = d.value("kind", "gaussian");
  if (kind == "gaussian") return susy::disorder::gaussian(d.value("sigma", 1.0));
  if (kind == "bump") return susy::disorder::bump();
  throw Precondition("disorder.kind: expected gaussian or bump");
}

struct Spectral {
  std::vector<double> energies;
  double eps = 0.0;
  double beta = 0.0;
  int branch = +1;

  rs::SpectralPoint at(double E) const { return {E, eps, beta, branch}; }
};

Spectral spectral_from(const json& cfg) {
  const json& s = cfg.at("spectral");
  reject_unknown(s, {"E", "eps", "beta", "branch"}, "spectral");
  Spectral out;
  if (s.at("E").is_array())
    out.energies = s.at("E").get<std::vector<double>>();
  else
    out.energies = {s.at("E").get<double>()};
  out.eps = s.value("eps", 0.0);
  out.beta = s.value("beta", 0.0);
  out.branch = s.value("branch", 1);
  if (out.branch != 1 && out.branch != -1) throw Precondition("spectral.branch: expected +-1");
  return out;
}

struct Method {
  std::string which = "all";  // direct | dual | mc | all
  int N_max = 1;
  long mc_green_samples = 100000;
  int quad_nodes = 0;  // deterministic reference when > 0
  double shift = 0.5;
  rs::ClusterOptions opt;
};

Method method_from(const json& cfg, std::optional<std::uint64_t> seed_override, int threads) {
  Method out;
  if (cfg.contains("method")) {
    const json& m = cfg.at("method");
    reject_unknown(m,
                   {"which", "N_max", "boson_nodes", "stage_nodes", "mc_samples",
                    "max_planes_tensor", "r_cut", "seed", "mc_green_samples", "quad_nodes",
                    "shift"},
                   "method");
    out.which = m.value("which", "all");
    out.N_max = m.value("N_max", 1);
    out.opt.boson_nodes = m.value("boson_nodes", out.opt.boson_nodes);
    out.opt.stage_nodes = m.value("stage_nodes", out.opt.stage_nodes);
    out.opt.mc_samples = m.value("mc_samples", out.opt.mc_samples);
    out.opt.max_planes_tensor = m.value("max_planes_tensor", out.opt.max_planes_tensor);
    out.opt.r_cut = m.value("r_cut", out.opt.r_cut);
    out.opt.seed = m.value("seed", out.opt.seed);
    out.mc_green_samples = m.value("mc_green_samples", out.mc_green_samples);
    out.quad_nodes = m.value("quad_nodes", 0);
    out.shift = m.value("shift", 0.5);
  }
  if (out.which != "direct" && out.which != "dual" && out.which != "mc" && out.which != "all")
    throw Precondition("method.which: expected direct, dual, mc or all");
  if (seed_override) out.opt.seed = *seed_override;
  out.opt.threads = threads;
  return out;
}

std::vector<std::pair<int, int>> pairs_from(const json& cfg, const rs::LatticeModel& m) {
  std::vector<std::pair<int, int>> out;
  if (!cfg.contains("pairs")) {
    out.push_back({0, 0});
    return out;
  }
  for (const json& p : cfg.at("pairs")) {
    if (!p.is_array() || p.size() != 2) throw Precondition("pairs: expected [x, y] site indices");
    int x = p[0].get<int>(), y = p[1].get<int>();
    if (x < 0 || y < 0 || x >= m.nsites() || y >= m.nsites())
      throw Precondition("pairs: site index outside the box");
    out.push_back({x, y});
  }
  return out;
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path);
  json cfg = json::parse(in);  // throws json::parse_error
  reject_unknown(cfg, {"model", "disorder", "spectral", "method", "pairs", "scan"}, "config");
  return cfg;
}

std::ofstream open_out(const std::string& dir, const std::string& name, const json& cfg) {
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / name);
  if (!out) throw std::invalid_argument("cannot write " + name + " under " + dir);
  out << "# " << cfg.dump() << "\n";
  return out;
}

// ---- verify ----------------------------------------------------------------

struct SuiteRow {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

void report(const std::vector<SuiteRow>& rows, int* failures) {
  for (const SuiteRow& r : rows) {
    std::printf("%-52s %12.3e  <= %8.1e  %s\n", r.name.c_str(), r.measured, r.threshold,
                r.pass ? "pass" : "FAIL");
    if (!r.pass) ++*failures;
  }
}

SuiteRow row(std::string name, double measured, double threshold) {
  return {std::move(name), measured, threshold, measured <= threshold};
}

std::vector<SuiteRow> suite_algebra() {
  namespace gr = susy::grassmann;
  std::vector<gr::GeneratorIndex> gens;
  for (int i = 0; i < 4; ++i) {
    gens.push_back(gr::gen(gr::Family::psi, Site{i, 0, 0}, 0, gr::Charge::plus));
    gens.push_back(gr::gen(gr::Family::psi, Site{i, 0, 0}, 0, gr::Charge::minus));
  }
  auto ctx = gr::Context::make(gens);
  double anti = 0.0;
  for (std::size_t i = 0; i < ctx->size(); ++i)
    for (std::size_t j = 0; j < ctx->size(); ++j) {
      auto a = gr::Element::generator(ctx, ctx->generator(i));
      auto b = gr::Element::generator(ctx, ctx->generator(j));
      anti = std::max(anti, (a * b + b * a).norm());
    }
  // monomial product signs against a brute-force inversion count
  double sign_err = 0.0;
  for (std::uint64_t a = 0; a < 256; ++a)
    for (std::uint64_t b = 0; b < 256; ++b) {
      auto prod = gr::Element::monomial(ctx, a, 1.0) * gr::Element::monomial(ctx, b, 1.0);
      cplx got = (a & b) ? cplx{} : prod.coefficient(a | b);
      int inv = 0;
      for (int i = 0; i < 8; ++i)
        if (b >> i & 1)
          for (int j = i + 1; j < 8; ++j) inv += static_cast<int>(a >> j & 1);
      cplx want = (a & b) ? cplx{} : cplx(inv % 2 ? -1.0 : 1.0, 0.0);
      sign_err = std::max(sign_err, std::abs(got - want));
    }
  susy::rng::Stream st(41, 0);
  auto rand_el = [&](int terms) {
    gr::Element e(ctx);
    for (int t = 0; t < terms; ++t)
      e += gr::Element::monomial(ctx, st.next_u64() & ctx->full_mask(),
                                 cplx(st.uniform(-1, 1), st.uniform(-1, 1)));
    return e;
  };
  double submult = 0.0, assoc = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    auto a = rand_el(6), b = rand_el(6), c = rand_el(4);
    submult = std::max(submult, (a * b).norm() - a.norm() * b.norm());
    assoc = std::max(assoc, ((a * b) * c - a * (b * c)).norm());
  }
  return {row("anticommutation, squares", anti, 0.0),
          row("monomial sign oracle (8 generators, all pairs)", sign_err, 0.0),
          row("norm submultiplicativity", submult, 1e-12),
          row("associativity", assoc, 1e-12)};
}

std::vector<SuiteRow> suite_fourier() {
  namespace gr = susy::grassmann;
  std::vector<gr::GeneratorIndex> gens;
  for (int i = 0; i < 3; ++i)
    for (auto ch : {gr::Charge::plus, gr::Charge::minus})
      gens.push_back(gr::gen(gr::Family::psi, Site{i, 0, 0}, 0, ch));
  auto ctx = gr::Context::make(gens);
  susy::rng::Stream st(43, 0);
  double round = 0.0, norm_pres = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    gr::Element e(ctx);
    for (int t = 0; t < 8; ++t)
      e += gr::Element::monomial(ctx, st.next_u64() & ctx->full_mask(),
                                 cplx(st.uniform(-1, 1), st.uniform(-1, 1)));
    auto ehat = gr::fourier(e);
    round = std::max(round, (gr::fourier_inverse(ehat).in_context(ctx) - e).norm());
    norm_pres = std::max(norm_pres, std::abs(ehat.norm() - e.norm()));
  }
  // super transform of the radial site factor against the scalar transform
  auto d = susy::disorder::gaussian(1.0);
  double gamma = 1.0;
  cplx z(0.2, 0.4);
  auto F = rs::f_z(d, z, gamma, 1);
  susy::superfn::Integrator how;
  how.nodes = 96;
  auto Fhat = susy::superfn::super_fourier(F, how);
  auto fp = susy::disorder::f_profile(d, z, gamma);
  double dual_err = 0.0;
  for (double r : {0.3, 0.9, 1.7}) {
    susy::superfn::BosonicPoint k;
    k.phi = {cplx(r, 0.2)};
    auto e = Fhat.eval(k);
    double v = std::norm(k.phi[0]);
    cplx t0 = rs::hankel_radial([&](double u) { return fp.deriv(0, u); }, v, 60.0);
    cplx t1 = rs::hankel_radial([&](double u) { return fp.deriv(1, u); }, v, 60.0);
    auto ec = e.context();
    std::uint64_t top = ec->full_mask();
    dual_err = std::max(dual_err, std::abs(e.scalar_part() - (-t1)));
    dual_err = std::max(dual_err, std::abs(e.coefficient(top) - (-t0)));
  }
  return {row("grassmann transform round trip", round, 1e-12),
          row("transform norm preservation", norm_pres, 1e-12),
          row("super transform vs radial scalar transform", dual_err, 1e-6)};
}

std::vector<SuiteRow> suite_localization() {
  std::vector<SuiteRow> rows;
  for (auto d : {susy::disorder::gaussian(1.0), susy::disorder::bump()})
    for (cplx z : {cplx(0.0, 0.0), cplx(-0.1, 0.3), cplx(-0.1, -0.3)})
      for (int S : {1, 2}) {
        auto fp = susy::disorder::f_profile(d, z, 1.0);
        bool bump = d.kind == susy::disorder::Kind::bump;
        cplx got = rs::radial_site_integral(fp, S, bump ? 760.0 : 80.0);
        double rel = std::abs(got - cplx(1.0, 0.0));  // value at zero is nuhat(0) = 1
        char name[96];
        std::snprintf(name, sizeof name, "integral (%+.4f,%+.4f) = value at zero 1, %s S=%d",
                      got.real(), got.imag(), bump ? "bump" : "gaussian", S);
        rows.push_back(row(name, rel, 1e-5));
      }
  // the generic tensor integrator agrees on the smooth profile
  for (int S : {1, 2}) {
    auto F = rs::f_z(susy::disorder::gaussian(1.0), cplx(-0.1, 0.3), 1.0, S);
    susy::superfn::Integrator how;
    how.nodes = S == 1 ? 80 : 40;
    auto c = susy::superfn::localization_check(F, how);
    rows.push_back(row("tensor-quadrature cross check, gaussian S=" + std::to_string(S),
                       c.discrepancy, S == 1 ? 1e-8 : 2e-4));
  }
  return rows;
}

std::vector<SuiteRow> suite_bbf() {
  namespace bb = susy::bbf;
  std::vector<SuiteRow> rows;
  susy::rng::Stream st(47, 0);
  for (int n : {2, 3}) {
    std::vector<std::vector<cplx>> v(n, std::vector<cplx>(n));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        v[i][j] = v[j][i] = cplx(st.uniform(-0.4, 0.4), st.uniform(-0.4, 0.4));
    double res = bb::bbf_verify(bb::PairPotential::scalars(v), 16);
    rows.push_back(row("partition identity residual, scalar, n=" + std::to_string(n), res, 1e-8));
  }
  {
    // Grassmann-valued even pair potential on one fermion pair per vertex
    namespace gr = susy::grassmann;
    int n = 3;
    std::vector<gr::GeneratorIndex> gens;
    for (int i = 0; i < n; ++i)
      for (auto ch : {gr::Charge::plus, gr::Charge::minus})
        gens.push_back(gr::gen(gr::Family::psi, Site{i, 0, 0}, 0, ch));
    auto ctx = gr::Context::make(gens);
    bb::PairPotential v;
    v.ctx = ctx;
    v.pair.assign(n, std::vector<gr::Element>(n, gr::Element(ctx)));
    v.self.assign(n, gr::Element(ctx));
    auto pp = [&](int i, gr::Charge c) {
      return gr::Element::generator(ctx, gr::gen(gr::Family::psi, Site{i, 0, 0}, 0, c));
    };
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        cplx c(st.uniform(-0.3, 0.3), st.uniform(-0.3, 0.3));
        v.pair[i][j] = v.pair[j][i] =
            (pp(i, gr::Charge::plus) * pp(j, gr::Charge::minus) +
             pp(j, gr::Charge::plus) * pp(i, gr::Charge::minus)) *
            c;
      }
    rows.push_back(row("partition identity residual, fermionic, n=3", bb::bbf_verify(v, 12), 1e-8));
  }
  double bell_err = 0.0, cayley_err = 0.0, mass_err = 0.0;
  const long bell[] = {1, 1, 2, 5, 15};
  for (int n = 1; n <= 4; ++n)
    bell_err += std::abs(static_cast<double>(bb::partitions(n).size()) - bell[n]);
  for (int n = 2; n <= 6; ++n)
    cayley_err += std::abs(static_cast<double>(bb::enumerate_trees(n).size()) -
                           std::pow(n, n - 2));
  for (const bb::Tree& t : bb::enumerate_trees(4)) {
    auto dp = bb::build_decoupling_measure(t);
    mass_err = std::max(mass_err, std::abs(bb::measure_mass(dp, 12) - 1.0));
  }
  rows.push_back(row("partition counts", bell_err, 0.0));
  rows.push_back(row("tree counts", cayley_err, 0.0));
  rows.push_back(row("decoupling measure mass", mass_err, 1e-12));
  return rows;
}

std::vector<SuiteRow> suite_replica() {
  susy::rng::Stream st(53, 0);
  susy::superfn::Integrator how;
  how.nodes = 64;
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    int n = 1 + static_cast<int>(st.uniform() * 4.0);
    susy::replica::Matrix A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = cplx(st.uniform(-1, 1), st.uniform(-1, 1));
    A += 2.5 * susy::replica::Matrix::Identity(n, n);
    auto inv = A.partialPivLu().inverse().eval();
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        worst = std::max(worst,
                         std::abs(susy::replica::replica_inverse(A, x, y, how).value - inv(x, y)));
  }
  return {row("superintegral inverse vs LU, 20 matrices n<=4", worst, 1e-8)};
}

std::vector<SuiteRow> suite_bounds() {
  namespace bd = susy::bounds;
  std::vector<SuiteRow> rows;
  susy::rng::Stream st(59, 0);
  // tree stripping on an exponential kernel, random trees and pinnings
  double strip_viol = 0.0;
  {
    const int len = 10;
    double amp = 1.4, alpha = 0.9, theta = 0.5, q = 1.5;
    std::vector<bd::LatticeSite> sites;
    Eigen::MatrixXcd H(len, len);
    for (int i = 0; i < len; ++i) sites.push_back({i, 0, 0});
    for (int i = 0; i < len; ++i)
      for (int j = 0; j < len; ++j) H(i, j) = amp * std::exp(-alpha * std::abs(i - j));
    auto np = bd::kernel_norms(amp, alpha, 1, theta);
    double cq = bd::stripping_constant(q, theta, alpha, 1, bd::omega_constant(1).value).value;
    int checked = 0;
    while (checked < 50) {
      int n = 2 + static_cast<int>(st.uniform() * 4.0);
      std::vector<int> code(std::max(0, n - 2));
      for (auto& c : code) c = static_cast<int>(st.uniform() * n);
      auto t = susy::bbf::prufer_decode(n, code);
      int x = static_cast<int>(st.uniform() * len);
      bool diag = st.uniform() < 0.25;
      int y = diag ? x : static_cast<int>(st.uniform() * len);
      if ((!diag && y == x) || n - (diag ? 1 : 2) < 0) continue;
      double lhs = bd::tree_coupling_sum(H, sites, 1, t, x, y);
      double rhs = std::exp(-theta * alpha * std::abs(x - y)) *
                   std::pow(np.weighted_inf1, n - (diag ? 1 : 2)) *
                   std::pow(np.weighted_infinf, diag ? 0 : 1);
      for (int deg : susy::bbf::coordination(t))
        rhs *= std::pow(cq, deg - 1) / std::pow(std::tgamma(deg + 1.0), q);
      strip_viol = std::max(strip_viol, lhs - rhs * (1.0 + 1e-12));
      ++checked;
    }
  }
  rows.push_back(row("tree stripping inequality, 50 instances", strip_viol, 0.0));
  for (auto d : {susy::disorder::gaussian(1.0), susy::disorder::bump()}) {
    auto rec = bd::imb_record(d, cplx(0.0, 0.0), 1.0);
    auto fp = susy::disorder::f_profile(d, cplx(0.0, 0.0), 1.0);
    double viol = 0.0;
    for (int n = 0; n <= 8; ++n) {
      double lhs = bd::imb_integral(fp, n, 0);
      viol = std::max(viol, lhs - rec.K * std::pow(rec.M, n) * std::pow(std::tgamma(n + 1.0), rec.p));
    }
    rows.push_back(row(std::string("monomial integrals within the factorial record, ") +
                           (d.kind == susy::disorder::Kind::gaussian ? "gaussian" : "bump"),
                       viol, 0.0));
  }
  return rows;
}

int cmd_verify(const std::string& suite) {
  std::vector<std::string> names;
  if (suite == "algebra" || suite == "fourier" || suite == "localization" || suite == "bbf" ||
      suite == "replica" || suite == "bounds")
    names = {suite};
  else if (suite == "all")
    names = {"algebra", "fourier", "localization", "bbf", "replica", "bounds"};
  else {
    std::fprintf(stderr, "unknown suite '%s'\n", suite.c_str());
    return 2;
  }
  int failures = 0;
  for (const std::string& s : names) {
    std::printf("== %s ==\n", s.c_str());
    if (s == "algebra") report(suite_algebra(), &failures);
    if (s == "fourier") report(suite_fourier(), &failures);
    if (s == "localization") report(suite_localization(), &failures);
    if (s == "bbf") report(suite_bbf(), &failures);
    if (s == "replica") report(suite_replica(), &failures);
    if (s == "bounds") report(suite_bounds(), &failures);
  }
  return failures == 0 ? 0 : 1;
}

// ---- green -----------------------------------------------------------------

int cmd_green(const json& cfg, const Method& mt, const std::string& outdir) {
  auto m = model_from(cfg);
  auto d = disorder_from(cfg);
  auto sp = spectral_from(cfg);
  auto pairs = pairs_from(cfg, m);

  std::ofstream csv = open_out(outdir, "green.csv", cfg);
  csv << "x,y,branch,method,order,value_re,value_im,err,bound\n";
  std::ofstream ord = open_out(outdir, "orders.csv", cfg);
  ord << "order,tree-count,value_re,value_im,quad_err,mc_err,bound\n";

  auto line = [&](int x, int y, const std::string& method, int order, cplx v, double err,
                  double bound) {
    csv << x << ',' << y << ',' << sp.branch << ',' << method << ',' << order << ','
        << num(v.real()) << ',' << num(v.imag()) << ',' << num(err) << ',' << num(bound) << "\n";
  };

  for (double E : sp.energies) {
    rs::SpectralPoint pt = sp.at(E);
    for (auto [xi, yi] : pairs) {
      Site x = m.site(xi), y = m.site(yi);
      if (mt.which == "mc" || mt.which == "all") {
        auto g = rs::mc_green(m, d, pt, x, y, mt.mc_green_samples, mt.opt.seed);
        line(xi, yi, "mc", -1, g.mean(0, 0), g.err(0, 0), 0.0);
      }
      if (mt.quad_nodes > 0) {
        auto q = rs::quadrature_green(m, d, pt, x, y, mt.quad_nodes, mt.shift);
        line(xi, yi, "quadrature", -1, q(0, 0), 0.0, 0.0);
      }
      for (std::string which : {std::string("direct"), std::string("dual")}) {
        if (mt.which != which && mt.which != "all") continue;
        auto exp = which == "direct" ? rs::Expansion::direct : rs::Expansion::dual;
        auto g = rs::cluster_green(m, d, pt, x, y, mt.N_max, exp, mt.opt);
        ord << "# E=" << num(E) << " x=" << xi << " y=" << yi << " method=" << which << "\n";
        for (const auto& t : g.orders) {
          line(xi, yi, which, t.order, t.contribution, t.err, t.cutoff_tail);
          ord << t.order << ',' << t.pieces << ',' << num(t.contribution.real()) << ','
              << num(t.contribution.imag()) << ',' << num(t.quad_err) << ',' << num(t.mc_err)
              << ',' << num(t.cutoff_tail) << "\n";
        }
        line(xi, yi, which, -1, g.value, g.err, g.truncation);
      }
    }
  }
  return 0;
}

// ---- bounds ----------------------------------------------------------------

json entry(double value, const std::string& formula, json inputs, double tail) {
  return {{"value", value}, {"formula-id", formula}, {"inputs", std::move(inputs)},
          {"tail-bound", tail}};
}

int cmd_bounds(const json& cfg, const Method& mt, const std::string& outdir) {
  namespace bd = susy::bounds;
  auto m = model_from(cfg);
  auto d = disorder_from(cfg);
  auto sp = spectral_from(cfg);
  (void)mt;

  json cs;
  double E0 = sp.energies.front();
  cplx z = sp.at(E0).z();

  auto imb = bd::imb_record(d, z, m.gamma);
  cs["imb"] = entry(imb.K, "factorial-bound-monomial",
                    {{"M", imb.M}, {"p", imb.p}, {"W", imb.W}, {"method", imb.method},
                     {"sup-is-lower-bound", imb.sup_is_lower_bound}},
                    0.0);
  auto idb = bd::idb_record(d, z, m.gamma);
  cs["idb"] = entry(idb.K, "factorial-bound-derivative",
                    {{"M", idb.M}, {"p", idb.p}, {"W", idb.W}, {"method", idb.method},
                     {"sup-is-lower-bound", idb.sup_is_lower_bound}},
                    0.0);

  double theta = 0.5;
  double alpha = m.hopping == rs::Hopping::laplacian ? 1.0 : m.hop_rate;
  double calC = m.hopping == rs::Hopping::laplacian ? m.ncolour * std::exp(1.0)
                                                    : m.ncolour * m.hop_amp;
  auto strong = bd::strong_chain(imb, calC, alpha, m.D, m.ncolour, theta);
  cs["omega"] = entry(strong.omega.value, "shell-geometry-constant",
                      {{"D", m.D}, {"argmin-d", strong.omega.argmin_d}}, 0.0);
  cs["strong-constant"] =
      entry(strong.cbar, "strong-chain-constant",
            {{"calC", strong.calC}, {"calC-theta", strong.calC_theta}, {"alpha", alpha},
             {"theta", theta}, {"stripping", strong.stripping.value}},
            strong.series.tail);
  for (std::size_t i = 0; i < sp.energies.size(); ++i)
    cs["strong-gamma-min-" + std::to_string(i)] =
        entry(strong.gamma_min(sp.energies[i]), "strong-threshold",
              {{"E", sp.energies[i]}}, 0.0);

  Eigen::VectorXd ev =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(rs::build_hamiltonian(m).real())
          .eigenvalues();
  double delta = std::numeric_limits<double>::infinity();
  for (int k = 0; k < ev.size(); ++k) delta = std::min(delta, std::abs(ev[k] - E0));
  if (delta > 0.0) {
    // theta = 0 keeps the (astronomical) weak constant inside double range
    auto weak = bd::weak_chain(idb, 1.0, delta, m.D, m.ncolour, 0.0);
    if (std::isfinite(weak.constant)) {
      cs["weak-threshold"] = entry(weak.constant, "weak-chain-threshold",
                                   {{"delta", delta}, {"theta", 0.0}}, weak.series.tail);
      cs["weak-delta-min"] =
          entry(weak.delta_min(m.gamma), "weak-chain-threshold", {{"gamma", m.gamma}}, 0.0);
      auto lif = bd::lifshitz_bound(m.gamma, delta, weak.constant, idb.p);
      cs["lifshitz"] = entry(lif.bound, "dos-tail-minimized",
                             {{"n-star", lif.n_star}, {"log-bound", lif.log_bound},
                              {"delta", delta}, {"gamma", m.gamma}, {"p", idb.p}},
                             0.0);
    }
  }

  json rep;
  rep["config"] = cfg;
  rep["constants"] = cs;
  std::filesystem::create_directories(outdir);
  std::ofstream out(std::filesystem::path(outdir) / "bounds.json");
  out << rep.dump(2) << "\n";
  return 0;
}

// ---- ldos-scan -------------------------------------------------------------

int cmd_ldos_scan(const json& cfg, const Method& mt, const std::string& outdir) {
  namespace bd = susy::bounds;
  auto m = model_from(cfg);
  auto d = disorder_from(cfg);
  const json& s = cfg.at("scan");
  reject_unknown(s, {"E_min", "E_max", "steps", "eps", "samples"}, "scan");
  double E_min = s.at("E_min").get<double>(), E_max = s.at("E_max").get<double>();
  int steps = s.value("steps", 21);
  double eps = s.value("eps", 0.1);
  long samples = s.value("samples", 20000L);
  if (eps <= 0.0) throw Precondition("scan.eps: positive regularization required");
  if (steps < 2) throw Precondition("scan.steps: at least 2");

  Eigen::VectorXd ev =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(rs::build_hamiltonian(m).real())
          .eigenvalues();
  auto idb = bd::idb_record(d, cplx(E_min, eps), m.gamma);

  std::ofstream csv = open_out(outdir, "ldos.csv", cfg);
  csv << "E,rho_mc,rho_stderr,lifshitz_bound,in_regime\n";
  for (int i = 0; i < steps; ++i) {
    double E = E_min + (E_max - E_min) * i / (steps - 1);
    auto r = rs::mc_ldos(m, d, E, eps, samples, mt.opt.seed + static_cast<std::uint64_t>(i));
    double delta = ev.minCoeff() - E;  // depth below the clean spectrum
    double bound = std::numeric_limits<double>::infinity();
    int in_regime = 0;
    if (delta > 0.0) {
      auto weak = bd::weak_chain(idb, 1.0, delta, m.D, m.ncolour, 0.0);
      if (std::isfinite(weak.constant)) {
        bound = bd::lifshitz_bound(m.gamma, delta, weak.constant, idb.p).bound;
        in_regime = delta >= weak.delta_min(m.gamma) ? 1 : 0;
      }
    }
    csv << num(E) << ',' << num(r.value) << ',' << num(r.err) << ',' << num(bound) << ','
        << in_regime << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SUSY cluster expansions for random Schroedinger operators"};
  app.require_subcommand(1);
  std::string config_path, outdir = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "override method.seed");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--out", outdir, "output directory");

  auto* verify = app.add_subcommand("verify", "run a verification suite");
  std::string suite = "all";
  verify->add_option("suite", suite, "algebra|fourier|localization|bbf|replica|bounds|all");
  auto* green = app.add_subcommand("green", "Green's-function comparison run");
  auto* bounds = app.add_subcommand("bounds", "constant/bound report");
  auto* ldos = app.add_subcommand("ldos-scan", "LDOS energy scan");
  for (auto* sub : {verify, green, bounds, ldos}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (verify->parsed()) return cmd_verify(suite);
    if (config_path.empty()) {
      std::fprintf(stderr, "--config is required\n");
      return 2;
    }
    json cfg = load_config(config_path);
    Method mt = method_from(cfg, seed, threads);
    if (seed) cfg["method"]["seed"] = *seed;  // resolved config in headers
    if (green->parsed()) return cmd_green(cfg, mt, outdir);
    if (bounds->parsed()) return cmd_bounds(cfg, mt, outdir);
    if (ldos->parsed()) return cmd_ldos_scan(cfg, mt, outdir);
  } catch (const Precondition& e) {
    std::fprintf(stderr, "precondition violated: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "precondition violated: %s\n", e.what());
    return 3;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
