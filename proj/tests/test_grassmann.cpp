#include <doctest.h>

#include "susy/grassmann.hpp"
#include "susy/rng.hpp"

#include <bit>
#include <cmath>
#include <vector>

using namespace susy::grassmann;
using susy::rng::Stream;

namespace {

ContextPtr chain_context(int sites, int colours, Family fam = Family::psi) {
  std::vector<GeneratorIndex> gens;
  for (int x = 0; x < sites; ++x)
    for (int c = 0; c < colours; ++c)
      for (Charge q : {Charge::plus, Charge::minus})
        gens.push_back(gen(fam, Site{x, 0, 0}, c, q));
  return Context::make(std::move(gens));
}

// Oracle: multiply monomials as generator-position lists, sorting by
// adjacent transpositions and counting swaps; a repeat kills the term.
struct OracleTerm {
  double coeff = 0.0;
  std::vector<int> gens;  // strictly ascending once normalized
};

OracleTerm oracle_mul(std::vector<int> a, const std::vector<int>& b) {
  OracleTerm t;
  a.insert(a.end(), b.begin(), b.end());
  long swaps = 0;
  for (std::size_t i = 1; i < a.size(); ++i)
    for (std::size_t j = i; j > 0 && a[j] < a[j - 1]; --j) {
      std::swap(a[j], a[j - 1]);
      ++swaps;
    }
  for (std::size_t i = 1; i < a.size(); ++i)
    if (a[i] == a[i - 1]) return t;  // zero
  t.coeff = (swaps % 2 == 0) ? 1.0 : -1.0;
  t.gens = std::move(a);
  return t;
}

std::vector<int> mask_to_list(std::uint64_t m) {
  std::vector<int> v;
  while (m) {
    v.push_back(std::countr_zero(m));
    m &= m - 1;
  }
  return v;
}

// Oracle for a single-generator integral, the literal rewrite rules:
// int dpsi 1 = 0 and int dpsi (h f) = delta_{h,g} f - h int dpsi f.
using OraclePoly = std::vector<std::pair<double, std::vector<int>>>;

OraclePoly oracle_integrate_one(int g, const OraclePoly& p) {
  OraclePoly out;
  for (const auto& [c, m] : p) {
    if (m.empty()) continue;
    std::vector<int> rest(m.begin() + 1, m.end());
    if (m.front() == g) {
      out.emplace_back(c, rest);
    } else {
      OraclePoly sub = oracle_integrate_one(g, {{c, rest}});
      for (const auto& [cs, ms] : sub) {
        OracleTerm t = oracle_mul({m.front()}, ms);
        if (t.coeff != 0.0) out.emplace_back(-cs * t.coeff, t.gens);
      }
    }
  }
  return out;
}

Element random_element(const ContextPtr& ctx, Stream& rs, int terms) {
  Element f(ctx);
  for (int i = 0; i < terms; ++i) {
    std::uint64_t mask = rs.next_u64() & ctx->full_mask();
    f.set(mask, f.coefficient(mask) + cplx(rs.uniform(-1, 1), rs.uniform(-1, 1)));
  }
  return f;
}

}  // namespace

TEST_CASE("product sign matches permutation-sort oracle up to 10 generators") {
  auto ctx = chain_context(5, 1);  // 10 generators
  REQUIRE(ctx->size() == 10);
  for (std::uint64_t a = 0; a < 1024; ++a) {
    for (std::uint64_t b = 0; b < 1024; ++b) {
      Element pa = Element::monomial(ctx, a, 1.0);
      Element pb = Element::monomial(ctx, b, 1.0);
      Element prod = pa * pb;
      OracleTerm t = oracle_mul(mask_to_list(a), mask_to_list(b));
      if (t.coeff == 0.0) {
        if (!prod.is_zero()) FAIL("expected zero at a=", a, " b=", b);
      } else {
        cplx got = prod.coefficient(a | b);
        if (got != cplx(t.coeff, 0.0)) FAIL("sign mismatch at a=", a, " b=", b);
      }
    }
  }
}

TEST_CASE("norm axioms") {
  auto ctx = chain_context(3, 1);
  Element one(ctx, 1.0);
  CHECK(one.norm() == 1.0);
  Stream rs(7, 0);
  for (int rep = 0; rep < 200; ++rep) {
    Element f = random_element(ctx, rs, 8);
    Element g = random_element(ctx, rs, 8);
    CHECK((f * g).norm() <= f.norm() * g.norm() + 1e-12);
    CHECK((f + g).norm() <= f.norm() + g.norm() + 1e-12);
    cplx s(rs.uniform(-2, 2), rs.uniform(-2, 2));
    CHECK((f * s).norm() == doctest::Approx(std::abs(s) * f.norm()).epsilon(1e-12));
  }
}

TEST_CASE("associativity and anticommutation") {
  auto ctx = chain_context(3, 1);
  Stream rs(11, 0);
  for (int rep = 0; rep < 50; ++rep) {
    Element f = random_element(ctx, rs, 6);
    Element g = random_element(ctx, rs, 6);
    Element h = random_element(ctx, rs, 6);
    Element lhs = (f * g) * h;
    Element rhs = f * (g * h);
    CHECK((lhs - rhs).norm() < 1e-12);
  }
  Element a = Element::generator(ctx, ctx->generator(0));
  Element b = Element::generator(ctx, ctx->generator(3));
  CHECK((a * b + b * a).norm() == 0.0);
  CHECK((a * a).norm() == 0.0);
}

TEST_CASE("berezin basics") {
  auto ctx = chain_context(1, 1);  // psi+ psi- at one site
  GeneratorIndex gp = gen(Family::psi, Site{0, 0, 0}, 0, Charge::plus);
  GeneratorIndex gm = gen(Family::psi, Site{0, 0, 0}, 0, Charge::minus);
  Element one(ctx, 1.0);
  VariableKey v{Family::psi, Site{0, 0, 0}, 0};

  // int dpsi+ int dpsi- (psi- psi+) = 1
  Element f = Element::generator(ctx, gm) * Element::generator(ctx, gp);
  Element r = berezin(f, {v});
  CHECK(r.context()->size() == 0);
  CHECK(r.scalar_part() == cplx(1.0, 0.0));

  // int dpsi 1 = 0
  CHECK(berezin(one, {v}).is_zero());
}

TEST_CASE("berezin matches the rewrite-rule oracle") {
  auto ctx = chain_context(2, 1);  // 4 generators
  Stream rs(13, 0);
  std::vector<VariableKey> vars{{Family::psi, Site{0, 0, 0}, 0},
                                {Family::psi, Site{1, 0, 0}, 0}};
  // operator order: site0+, site0-, site1+, site1-; innermost applies first
  // positions: (psi,0,+)=0 (psi,0,-)=1 (psi,1,+)=2 (psi,1,-)=3
  std::vector<int> op_order{3, 2, 1, 0};  // application order of single integrals
  for (int rep = 0; rep < 100; ++rep) {
    Element f = random_element(ctx, rs, 10);
    Element got = berezin(f, vars);

    // real and imaginary parts separately through the scalar oracle
    for (int part = 0; part < 2; ++part) {
      OraclePoly p;
      for (const auto& [m, c] : f.coefficients())
        p.emplace_back(part == 0 ? c.real() : c.imag(), mask_to_list(m));
      for (int g : op_order) p = oracle_integrate_one(g, p);
      double want = 0.0;
      for (const auto& [c, m] : p) {
        REQUIRE(m.empty());
        want += c;
      }
      double have = part == 0 ? got.scalar_part().real() : got.scalar_part().imag();
      CHECK(have == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK(std::abs(got.scalar_part()) <= f.norm() + 1e-12);
  }
}

TEST_CASE("exp_even") {
  auto ctx = chain_context(2, 1);
  GeneratorIndex gp = gen(Family::psi, Site{0, 0, 0}, 0, Charge::plus);
  GeneratorIndex gm = gen(Family::psi, Site{0, 0, 0}, 0, Charge::minus);
  cplx a(0.7, -0.3);
  Element f = Element::generator(ctx, gp) * Element::generator(ctx, gm) * a;
  Element e = exp_even(f);
  CHECK(std::abs(e.scalar_part() - 1.0) < 1e-15);
  Element diff = e - Element(ctx, 1.0) - f;
  CHECK(diff.norm() < 1e-15);

  // odd input must throw
  CHECK_THROWS_AS(exp_even(Element::generator(ctx, gp)), std::invalid_argument);

  // homomorphism on even elements (they commute)
  Stream rs(17, 0);
  for (int rep = 0; rep < 20; ++rep) {
    Element u(ctx), v(ctx);
    Element ru = random_element(ctx, rs, 8);
    Element rv = random_element(ctx, rs, 8);
    for (const auto& [m, c] : ru.coefficients())
      if (std::popcount(m) % 2 == 0) u.set(m, c);
    for (const auto& [m, c] : rv.coefficients())
      if (std::popcount(m) % 2 == 0) v.set(m, c);
    Element lhs = exp_even(u + v);
    Element rhs = exp_even(u) * exp_even(v);
    CHECK((lhs - rhs).norm() < 1e-12 * std::max(1.0, rhs.norm()));
    CHECK(exp_even(u).norm() <= std::exp(u.norm()) + 1e-12);
  }
}

TEST_CASE("delta element sifts") {
  // delta^X(psi - psi') f(psi), psi' realized as the eta family
  const int sites = 2;
  std::vector<GeneratorIndex> gens;
  for (int x = 0; x < sites; ++x)
    for (Family fam : {Family::psi, Family::eta})
      for (Charge q : {Charge::plus, Charge::minus})
        gens.push_back(gen(fam, Site{x, 0, 0}, 0, q));
  auto ctx = Context::make(std::move(gens));

  auto g_of = [&](Family fam, int x, Charge q) {
    return Element::generator(ctx, gen(fam, Site{x, 0, 0}, 0, q));
  };
  Element delta(ctx, 1.0);
  for (int x = 0; x < sites; ++x)
    delta = delta * (g_of(Family::psi, x, Charge::minus) - g_of(Family::eta, x, Charge::minus)) *
            (g_of(Family::psi, x, Charge::plus) - g_of(Family::eta, x, Charge::plus));

  // f(psi) = 2 + psi0+ psi1- - 3i psi0+ psi0- psi1+ psi1-
  auto build_f = [&](Family fam) {
    Element f(ctx, 2.0);
    f += g_of(fam, 0, Charge::plus) * g_of(fam, 1, Charge::minus);
    f += g_of(fam, 0, Charge::plus) * g_of(fam, 0, Charge::minus) *
         g_of(fam, 1, Charge::plus) * g_of(fam, 1, Charge::minus) * cplx(0.0, -3.0);
    return f;
  };
  Element integ = berezin_family(delta * build_f(Family::psi), Family::psi);
  CHECK((integ.in_context(ctx) - build_f(Family::eta)).norm() < 1e-14);

  // pure delta at psi' = 0 matches the constructor
  Element d0 = delta_element(ctx, Family::psi);
  Element f = build_f(Family::psi);
  Element r = berezin_family(d0 * f, Family::psi);
  CHECK(std::abs(r.scalar_part() - 2.0) < 1e-14);
}

TEST_CASE("fourier transform: norm preservation, inversion, delta image") {
  auto ctx = chain_context(2, 1);
  Stream rs(23, 0);
  for (int rep = 0; rep < 50; ++rep) {
    Element f = random_element(ctx, rs, 10);
    Element fh = fourier(f);
    CHECK(fh.norm() == doctest::Approx(f.norm()).epsilon(1e-12));
    Element back = fourier_inverse(fh);
    // compare on the original context
    Element diff = back.in_context(ctx) - f;
    CHECK(diff.norm() < 1e-12 * std::max(1.0, f.norm()));
  }

  // the delta element maps to a unit-modulus multiple of 1
  Element d = delta_element(ctx, Family::psi);
  Element dh = fourier(d);
  CHECK(std::abs(std::abs(dh.scalar_part()) - 1.0) < 1e-14);
  Element nil = dh;
  nil.set(0, 0.0);
  CHECK(nil.norm() < 1e-14);
}

TEST_CASE("berezin integral is bounded by the norm") {
  auto ctx = chain_context(3, 1);
  Stream rs(29, 0);
  std::vector<VariableKey> vars;
  for (int x = 0; x < 3; ++x) vars.push_back({Family::psi, Site{x, 0, 0}, 0});
  for (int rep = 0; rep < 200; ++rep) {
    Element f = random_element(ctx, rs, 12);
    Element r = berezin(f, vars);
    CHECK(std::abs(r.scalar_part()) <= f.norm() + 1e-12);
  }
}
