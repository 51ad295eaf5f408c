#include "susy/bbf.hpp"

#include "susy/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace susy::bbf {

using grassmann::Context;

std::vector<int> prufer_encode(const Tree& t) {
  const int n = t.n;
  if (n <= 2) return {};
  std::vector<std::set<int>> adj(n);
  for (auto [a, b] : t.edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  std::vector<int> code;
  std::set<int> leaves;
  for (int i = 0; i < n; ++i)
    if (adj[i].size() == 1) leaves.insert(i);
  for (int step = 0; step < n - 2; ++step) {
    int leaf = *leaves.begin();
    leaves.erase(leaves.begin());
    int parent = *adj[leaf].begin();
    code.push_back(parent);
    adj[parent].erase(leaf);
    adj[leaf].clear();
    if (adj[parent].size() == 1) leaves.insert(parent);
  }
  return code;
}

Tree prufer_decode(int n, const std::vector<int>& code) {
  if (n < 1) throw std::invalid_argument("n < 1");
  Tree t;
  t.n = n;
  if (n == 1) return t;
  if (static_cast<int>(code.size()) != n - 2)
    throw std::invalid_argument("code length must be n-2");
  std::vector<int> degree(n, 1);
  for (int c : code) {
    if (c < 0 || c >= n) throw std::invalid_argument("code symbol out of range");
    ++degree[c];
  }
  std::set<int> leaves;
  for (int i = 0; i < n; ++i)
    if (degree[i] == 1) leaves.insert(i);
  for (int c : code) {
    int leaf = *leaves.begin();
    leaves.erase(leaves.begin());
    t.edges.emplace_back(std::min(leaf, c), std::max(leaf, c));
    if (--degree[c] == 1) leaves.insert(c);
  }
  int a = *leaves.begin(), b = *std::next(leaves.begin());
  t.edges.emplace_back(std::min(a, b), std::max(a, b));
  return t;
}

std::vector<Tree> enumerate_trees(int n) {
  if (n < 1 || n > 8) throw std::invalid_argument("tree size out of range");
  std::vector<Tree> out;
  if (n == 1) {
    out.push_back(Tree{1, {}});
    return out;
  }
  std::vector<int> code(n - 2, 0);
  while (true) {
    out.push_back(prufer_decode(n, code));
    int d = 0;
    for (; d < n - 2; ++d) {
      if (++code[d] < n) break;
      code[d] = 0;
    }
    if (d == n - 2) break;
  }
  return out;
}

std::vector<int> coordination(const Tree& t) {
  std::vector<int> d(t.n, 0);
  for (auto [a, b] : t.edges) {
    ++d[a];
    ++d[b];
  }
  return d;
}

PairPotential PairPotential::scalars(const std::vector<std::vector<cplx>>& v) {
  PairPotential p;
  p.ctx = Context::make({});
  const std::size_t n = v.size();
  p.pair.assign(n, std::vector<Element>(n, Element(p.ctx)));
  p.self.assign(n, Element(p.ctx));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      p.pair[i][j] = Element(p.ctx, v[i][j]);
    }
  return p;
}

Element PairPotential::potential(const std::vector<int>& subset,
                                 const std::function<double(int, int)>& coeff) const {
  Element V(ctx);
  for (std::size_t a = 0; a < subset.size(); ++a) {
    V += self[subset[a]];
    for (std::size_t b = a + 1; b < subset.size(); ++b) {
      double c = coeff ? coeff(static_cast<int>(a), static_cast<int>(b)) : 1.0;
      if (c != 0.0) V += pair[subset[a]][subset[b]] * cplx(c, 0.0);
    }
  }
  return V;
}

Element PairPotential::potential(const std::vector<int>& subset) const {
  return potential(subset, {});
}

namespace {

void grow(const Tree& t, std::vector<int>& join, std::vector<bool>& inside,
          GrowthOrder& cur, std::vector<GrowthOrder>& out) {
  const int stage = static_cast<int>(cur.edges.size()) + 1;
  if (stage == t.n) {
    GrowthOrder done = cur;
    done.join_stage = join;
    // density exponent of s_k: later edges whose inside endpoint joined
    // at stage <= k-1 (they crossed the stage-k boundary)
    done.density_exp.assign(t.n, 0);
    for (std::size_t i = 0; i < done.edges.size(); ++i) {
      int a = join[done.edges[i].first];
      for (int k = a + 1; k < static_cast<int>(i) + 1; ++k) ++done.density_exp[k];
    }
    out.push_back(std::move(done));
    return;
  }
  for (auto [a, b] : t.edges) {
    int in = -1, outv = -1;
    if (inside[a] && !inside[b]) {
      in = a;
      outv = b;
    } else if (inside[b] && !inside[a]) {
      in = b;
      outv = a;
    } else {
      continue;
    }
    inside[outv] = true;
    join[outv] = stage;
    cur.edges.emplace_back(in, outv);
    grow(t, join, inside, cur, out);
    cur.edges.pop_back();
    join[outv] = -1;
    inside[outv] = false;
  }
}

}  // namespace

DecouplingMeasure build_decoupling_measure(const Tree& t) {
  DecouplingMeasure dp;
  dp.tree = t;
  std::vector<int> join(t.n, -1);
  std::vector<bool> inside(t.n, false);
  inside[0] = true;
  join[0] = 0;
  GrowthOrder cur;
  grow(t, join, inside, cur, dp.orders);
  return dp;
}

double pair_coefficient(const GrowthOrder& ord, const std::vector<double>& s, int x, int y) {
  int a = std::min(ord.join_stage[x], ord.join_stage[y]);
  int b = std::max(ord.join_stage[x], ord.join_stage[y]);
  int last = std::min<int>(b, static_cast<int>(s.size()) - 1);
  double c = 1.0;
  for (int k = a + 1; k <= last; ++k) c *= s[k];
  return c;
}

Element measure_expectation(
    const DecouplingMeasure& dp, const ContextPtr& ctx, int nodes,
    const std::function<Element(const GrowthOrder&, const std::vector<double>&)>& F) {
  const int m = dp.tree.n;
  if (m == 1) {
    GrowthOrder trivial;
    trivial.join_stage = {0};
    std::vector<double> s(1, 0.0);
    return F(trivial, s);
  }
  const auto rule = quadrature::rescaled(quadrature::gauss_legendre(nodes), 0.0, 1.0);
  Element acc(ctx);
  std::vector<double> s(m, 0.0);  // s[1..m-1]
  for (const auto& ord : dp.orders) {
    std::vector<std::size_t> idx(m - 1, 0);
    while (true) {
      double w = 1.0;
      for (int k = 1; k < m; ++k) {
        s[k] = rule.nodes[idx[k - 1]];
        w *= rule.weights[idx[k - 1]] * std::pow(s[k], ord.density_exp[k]);
      }
      Element val = F(ord, s);
      acc += (val.context() == ctx ? val : val.in_context(ctx)) * cplx(w, 0.0);
      int d = 0;
      for (; d < m - 1; ++d) {
        if (++idx[d] < rule.nodes.size()) break;
        idx[d] = 0;
      }
      if (d == m - 1) break;
    }
  }
  return acc;
}

double measure_mass(const DecouplingMeasure& dp, int nodes) {
  ContextPtr ctx = Context::make({});
  Element one(ctx, 1.0);
  return measure_expectation(dp, ctx, nodes, [&](const GrowthOrder&, const std::vector<double>&) {
           return one;
         })
      .scalar_part()
      .real();
}

std::size_t sample_measure(const DecouplingMeasure& dp, rng::Stream& st,
                           std::vector<double>& s) {
  const int m = dp.tree.n;
  s.assign(m, 0.0);
  if (m == 1 || dp.orders.empty()) return 0;
  std::vector<double> mass(dp.orders.size(), 1.0);
  double total = 0.0;
  for (std::size_t o = 0; o < dp.orders.size(); ++o) {
    for (int k = 1; k < m; ++k) mass[o] /= (dp.orders[o].density_exp[k] + 1);
    total += mass[o];
  }
  double u = st.uniform() * total;
  std::size_t pick = 0;
  for (; pick + 1 < mass.size(); ++pick) {
    if (u < mass[pick]) break;
    u -= mass[pick];
  }
  for (int k = 1; k < m; ++k)
    s[k] = std::pow(st.uniform(), 1.0 / (dp.orders[pick].density_exp[k] + 1));
  return pick;
}

Element polymer_activity_tree(
    const PairPotential& v, const Tree& t, int nodes,
    const std::function<Element(const GrowthOrder&, const std::vector<double>&)>& extra) {
  if (t.n > 5) throw std::invalid_argument("quadrature depth capped at |Y| = 5");
  std::vector<int> all(t.n);
  std::iota(all.begin(), all.end(), 0);
  Element edge_prod(v.ctx, 1.0);
  for (auto [a, b] : t.edges) {
    edge_prod = edge_prod * v.pair[a][b];
    if (edge_prod.is_zero()) return edge_prod;
  }
  DecouplingMeasure dp = build_decoupling_measure(t);
  Element integral = measure_expectation(
      dp, v.ctx, nodes, [&](const GrowthOrder& ord, const std::vector<double>& s) {
        Element V = v.potential(all, [&](int i, int j) { return pair_coefficient(ord, s, i, j); });
        Element val = grassmann::exp_even(V);
        if (extra) val = val * extra(ord, s);
        return val;
      });
  return edge_prod * integral;
}

Element polymer_activity(
    const PairPotential& v, int nodes,
    const std::function<Element(const GrowthOrder&, const std::vector<double>&)>& extra) {
  const int n = static_cast<int>(v.self.size());
  Element acc(v.ctx);
  for (const auto& t : enumerate_trees(n)) acc += polymer_activity_tree(v, t, nodes, extra);
  return acc;
}

std::vector<std::vector<std::vector<int>>> partitions(int n) {
  std::vector<std::vector<std::vector<int>>> out;
  std::vector<std::vector<int>> cur;
  std::function<void(int)> rec = [&](int i) {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    const std::size_t nb = cur.size();  // rec() may reallocate cur, index it
    for (std::size_t b = 0; b < nb; ++b) {
      cur[b].push_back(i);
      rec(i + 1);
      cur[b].pop_back();
    }
    cur.push_back({i});
    rec(i + 1);
    cur.pop_back();
  };
  rec(0);
  return out;
}

double bbf_verify(const PairPotential& v, int nodes) {
  const int n = static_cast<int>(v.self.size());
  if (n > 4) throw std::invalid_argument("bbf_verify capped at |X| = 4");
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  Element lhs = grassmann::exp_even(v.potential(all));

  Element rhs(v.ctx);
  for (const auto& part : partitions(n)) {
    Element prod(v.ctx, 1.0);
    for (const auto& block : part) {
      PairPotential sub;
      sub.ctx = v.ctx;
      const int m = static_cast<int>(block.size());
      sub.pair.assign(m, std::vector<Element>(m, Element(v.ctx)));
      sub.self.assign(m, Element(v.ctx));
      for (int a = 0; a < m; ++a) {
        sub.self[a] = v.self[block[a]];
        for (int b = 0; b < m; ++b)
          if (a != b) sub.pair[a][b] = v.pair[block[a]][block[b]];
      }
      prod = prod * polymer_activity(sub, nodes);
      if (prod.is_zero()) break;
    }
    rhs += prod;
  }
  return (lhs - rhs).norm();
}

namespace {

void project_simplex(std::vector<double>& x) {
  std::vector<double> u = x;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  int rho = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    css += u[i];
    double t = (css - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) {
      rho = static_cast<int>(i + 1);
      theta = t;
    }
  }
  (void)rho;
  for (auto& xi : x) xi = std::max(0.0, xi - theta);
}

}  // namespace

double convexity_residual(int n, const std::vector<std::pair<int, int>>& pairs,
                          const std::vector<double>& sigma) {
  auto parts = partitions(n);
  const std::size_t P = parts.size(), M = pairs.size();
  // pattern matrix: 1 when the pair is inside one block
  std::vector<std::vector<double>> A(P, std::vector<double>(M, 0.0));
  for (std::size_t p = 0; p < P; ++p) {
    std::vector<int> block_of(n, -1);
    for (std::size_t b = 0; b < parts[p].size(); ++b)
      for (int vtx : parts[p][b]) block_of[vtx] = static_cast<int>(b);
    for (std::size_t m = 0; m < M; ++m)
      A[p][m] = block_of[pairs[m].first] == block_of[pairs[m].second] ? 1.0 : 0.0;
  }
  std::vector<double> lam(P, 1.0 / P);
  double step = 0.5 / static_cast<double>(M);
  for (int it = 0; it < 5000; ++it) {
    std::vector<double> r(M, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t p = 0; p < P; ++p) r[m] += lam[p] * A[p][m];
      r[m] -= sigma[m];
    }
    for (std::size_t p = 0; p < P; ++p) {
      double g = 0.0;
      for (std::size_t m = 0; m < M; ++m) g += 2.0 * A[p][m] * r[m];
      lam[p] -= step * g;
    }
    project_simplex(lam);
  }
  double res = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    double r = -sigma[m];
    for (std::size_t p = 0; p < P; ++p) r += lam[p] * A[p][m];
    res += r * r;
  }
  return std::sqrt(res);
}

}  // namespace susy::bbf
