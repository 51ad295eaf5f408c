#include <doctest.h>

#include "susy/bbf.hpp"
#include "susy/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <set>

using namespace susy::bbf;
using susy::grassmann::Charge;
using susy::grassmann::Context;
using susy::grassmann::Element;
using susy::grassmann::Family;
using susy::grassmann::GeneratorIndex;
using susy::grassmann::Site;
using susy::rng::Stream;

TEST_CASE("prufer codec and tree counts") {
  CHECK(enumerate_trees(1).size() == 1);
  CHECK(enumerate_trees(2).size() == 1);
  CHECK(enumerate_trees(3).size() == 3);
  CHECK(enumerate_trees(4).size() == 16);
  auto t5 = enumerate_trees(5);
  CHECK(t5.size() == 125);
  std::set<std::vector<std::pair<int, int>>> seen;
  for (const auto& t : t5) {
    auto e = t.edges;
    std::sort(e.begin(), e.end());
    seen.insert(e);
    CHECK(t.edges.size() == 4);
    auto d = coordination(t);
    CHECK(std::accumulate(d.begin(), d.end(), 0) == 8);
    CHECK(prufer_decode(5, prufer_encode(t)).edges.size() == 4);
    auto e2 = prufer_decode(5, prufer_encode(t)).edges;
    std::sort(e2.begin(), e2.end());
    CHECK(e == e2);
  }
  CHECK(seen.size() == 125);  // all distinct
}

TEST_CASE("bell numbers from partitions") {
  CHECK(partitions(2).size() == 2);
  CHECK(partitions(3).size() == 5);
  CHECK(partitions(4).size() == 15);
}

TEST_CASE("decoupling measure has mass one") {
  for (int n = 1; n <= 4; ++n)
    for (const auto& t : enumerate_trees(n)) {
      auto dp = build_decoupling_measure(t);
      CHECK(measure_mass(dp, 16) == doctest::Approx(1.0).epsilon(1e-12));
    }
  // a couple of five-vertex shapes: a path and a star
  Tree path{5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}};
  Tree star{5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}};
  CHECK(measure_mass(build_decoupling_measure(path), 12) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(measure_mass(build_decoupling_measure(star), 12) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pair coefficients stay in [0,1]") {
  Stream rs(211, 0);
  Tree t{4, {{0, 1}, {1, 2}, {1, 3}}};
  auto dp = build_decoupling_measure(t);
  std::vector<double> s;
  for (int rep = 0; rep < 200; ++rep) {
    auto o = sample_measure(dp, rs, s);
    for (int x = 0; x < 4; ++x)
      for (int y = x + 1; y < 4; ++y) {
        double c = pair_coefficient(dp.orders[o], s, x, y);
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
      }
  }
}

TEST_CASE("two-vertex activity is exp(v) - 1") {
  auto v = PairPotential::scalars({{0.0, 0.3}, {0.3, 0.0}});
  Element K = polymer_activity(v, 16);
  CHECK(std::abs(K.scalar_part() - (std::exp(0.3) - 1.0)) < 1e-12);

  // complex coupling too
  cplx w(-0.4, 0.7);
  auto vc = PairPotential::scalars({{0.0, w}, {w, 0.0}});
  CHECK(std::abs(polymer_activity(vc, 16).scalar_part() - (std::exp(w) - 1.0)) < 1e-12);
}

TEST_CASE("single-vertex activity is exp of the self term") {
  auto v = PairPotential::scalars({{0.0}});
  v.self[0] = Element(v.ctx, cplx(-0.25, 0.1));
  CHECK(std::abs(polymer_activity(v).scalar_part() - std::exp(cplx(-0.25, 0.1))) < 1e-14);
}

TEST_CASE("single interpolation step identity") {
  // cluster {0,1} inside {0,1,2}: e^{W(1)} = e^{W(0)} + int_0^1 W'(s) e^{W(s)} ds
  cplx v01(-0.3, 0.2), v02(0.15, -0.4), v12(-0.2, 0.1);
  auto W = [&](double s) { return v01 + s * (v02 + v12); };
  auto rule = susy::quadrature::rescaled(susy::quadrature::gauss_legendre(24), 0.0, 1.0);
  cplx integral(0.0, 0.0);
  for (std::size_t j = 0; j < rule.nodes.size(); ++j)
    integral += rule.weights[j] * (v02 + v12) * std::exp(W(rule.nodes[j]));
  CHECK(std::abs(std::exp(W(1.0)) - std::exp(W(0.0)) - integral) < 1e-14);
}

TEST_CASE("partition identity, scalar couplings up to |X| = 4") {
  Stream rs(223, 0);
  for (int n = 2; n <= 4; ++n) {
    std::vector<std::vector<cplx>> m(n, std::vector<cplx>(n, 0.0));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        m[i][j] = m[j][i] = cplx(rs.uniform(-0.4, 0.1), rs.uniform(-0.3, 0.3));
    auto v = PairPotential::scalars(m);
    for (int i = 0; i < n; ++i) v.self[i] = Element(v.ctx, cplx(rs.uniform(-0.3, 0.0), 0.0));
    CHECK(bbf_verify(v, 20) < 1e-8);
  }
}

TEST_CASE("partition identity with Grassmann-valued couplings") {
  std::vector<GeneratorIndex> gens;
  for (int i = 0; i < 3; ++i)
    for (Charge q : {Charge::plus, Charge::minus})
      gens.push_back({Family::psi, Site{i, 0, 0}, 0, q});
  auto ctx = Context::make(std::move(gens));
  auto num = [&](int i) {
    return Element::generator(ctx, {Family::psi, Site{i, 0, 0}, 0, Charge::plus}) *
           Element::generator(ctx, {Family::psi, Site{i, 0, 0}, 0, Charge::minus});
  };

  Stream rs(227, 0);
  PairPotential v;
  v.ctx = ctx;
  v.pair.assign(3, std::vector<Element>(3, Element(ctx)));
  v.self.assign(3, Element(ctx));
  for (int i = 0; i < 3; ++i) {
    v.self[i] = num(i) * cplx(rs.uniform(-0.5, 0.5), rs.uniform(-0.5, 0.5));
    for (int j = i + 1; j < 3; ++j) {
      Element e = Element(ctx, cplx(rs.uniform(-0.3, 0.1), rs.uniform(-0.2, 0.2))) +
                  num(i) * num(j) * cplx(rs.uniform(-1, 1), rs.uniform(-1, 1));
      v.pair[i][j] = e;
      v.pair[j][i] = e;
    }
  }
  CHECK(bbf_verify(v, 20) < 1e-8);
}

TEST_CASE("stability: nonpositive real parts propagate to the activity") {
  Stream rs(229, 0);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<std::vector<cplx>> m(3, std::vector<cplx>(3, 0.0));
    double bound = 1.0;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) {
        m[i][j] = m[j][i] = cplx(rs.uniform(-1.0, 0.0), rs.uniform(-1, 1));
        bound *= 1.0;  // |e^{V(sigma)}| <= 1 when Re v <= 0
      }
    auto v = PairPotential::scalars(m);
    // |K(Y)| <= sum over trees of prod |v_edge| since the measure has mass 1
    double tree_sum = 0.0;
    for (const auto& t : enumerate_trees(3)) {
      double p = 1.0;
      for (auto [a, b] : t.edges) p *= std::abs(m[a][b]);
      tree_sum += p;
    }
    CHECK(std::abs(polymer_activity(v, 16).scalar_part()) <= tree_sum * bound + 1e-12);
  }
}

TEST_CASE("quadrature expectation matches measure sampling") {
  Tree t{4, {{0, 1}, {0, 2}, {2, 3}}};
  auto dp = build_decoupling_measure(t);
  auto ctx = Context::make({});
  auto F = [&](const GrowthOrder& ord, const std::vector<double>& s) {
    double g = 1.0;
    for (int x = 0; x < 4; ++x)
      for (int y = x + 1; y < 4; ++y) g *= 1.0 + 0.3 * pair_coefficient(ord, s, x, y);
    return Element(ctx, g);
  };
  double quad = measure_expectation(dp, ctx, 16, F).scalar_part().real();

  Stream rs(233, 0);
  std::vector<double> s;
  double sum = 0.0, sumsq = 0.0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    auto o = sample_measure(dp, rs, s);
    double g = F(dp.orders[o], s).scalar_part().real();
    sum += g;
    sumsq += g * g;
  }
  double mean = sum / N;
  double se = std::sqrt(std::max(0.0, sumsq / N - mean * mean) / N);
  CHECK(std::abs(mean - quad) < 5.0 * se + 1e-10);
}

TEST_CASE("sampled coefficients lie in the partition-pattern hull") {
  std::vector<std::pair<int, int>> pairs;
  for (int x = 0; x < 4; ++x)
    for (int y = x + 1; y < 4; ++y) pairs.emplace_back(x, y);

  Stream rs(239, 0);
  auto trees = enumerate_trees(4);
  std::vector<double> s, sigma(pairs.size());
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto& t = trees[static_cast<std::size_t>(rs.uniform() * trees.size())];
    auto dp = build_decoupling_measure(t);
    auto o = sample_measure(dp, rs, s);
    for (std::size_t m = 0; m < pairs.size(); ++m)
      sigma[m] = pair_coefficient(dp.orders[o], s, pairs[m].first, pairs[m].second);
    worst = std::max(worst, convexity_residual(4, pairs, sigma));
  }
  CHECK(worst < 1e-4);
}
