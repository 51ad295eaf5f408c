#pragma once
// Tree-interpolation (Battle-Brydges-Federbush) machinery: tree enumeration
// via Pruefer codes, the recursive cluster-growth decoupling measure, polymer
// activities, and a numerical check of the partition identity
//   e^{V_X} = sum over partitions of prod K(Y).
//
// Measure construction. Clusters grow from the lowest vertex, one tree edge
// per stage. Stage k (k = 1..m-1) interpolates across the boundary of the
// size-k cluster with parameter s_k. A pair whose endpoints joined at stages
// a < b acquires the coefficient prod_{k=a+1}^{min(b,m-1)} s_k; the measure
// density carries s_k^{c_k} with c_k counting later tree edges still crossing
// stage k. Summed over all growth orders compatible with the tree this
// reproduces the interpolation identity step by step.

#include "susy/grassmann.hpp"
#include "susy/rng.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace susy::bbf {

using grassmann::cplx;
using grassmann::ContextPtr;
using grassmann::Element;

struct Tree {
  int n = 1;                              // vertices 0..n-1
  std::vector<std::pair<int, int>> edges;  // unordered pairs, n-1 of them
};

std::vector<int> prufer_encode(const Tree& t);
Tree prufer_decode(int n, const std::vector<int>& code);
// n^(n-2) trees for n >= 2, the single empty tree for n = 1; 1 <= n <= 8.
std::vector<Tree> enumerate_trees(int n);
// coordination numbers d_i of each vertex
std::vector<int> coordination(const Tree& t);

// Symmetric pair potential with optional per-vertex self terms; scalar
// potentials live on an empty Grassmann context.
struct PairPotential {
  ContextPtr ctx;
  std::vector<std::vector<Element>> pair;  // pair[i][j] = v_{ij}, i != j
  std::vector<Element> self;               // per-vertex term

  static PairPotential scalars(const std::vector<std::vector<cplx>>& v);
  Element potential(const std::vector<int>& subset,
                    const std::function<double(int, int)>& coeff) const;
  Element potential(const std::vector<int>& subset) const;
};

struct GrowthOrder {
  std::vector<std::pair<int, int>> edges;  // growth order; .first is inside
  std::vector<int> join_stage;             // per vertex, root has 0
  std::vector<int> density_exp;            // exponent of s_k, k = 1..m-1
};

struct DecouplingMeasure {
  Tree tree;
  std::vector<GrowthOrder> orders;
};

DecouplingMeasure build_decoupling_measure(const Tree& t);

// Pair coefficient sigma_{xy}(s) for one growth order.
double pair_coefficient(const GrowthOrder& ord, const std::vector<double>& s, int x, int y);

// int dp_T(s) F(s): nested Gauss-Legendre, `nodes` per level, summed over
// growth orders with the density weights. F receives the order and the stage
// parameters s_1..s_{m-1} (s[0] unused).
Element measure_expectation(
    const DecouplingMeasure& dp, const ContextPtr& ctx, int nodes,
    const std::function<Element(const GrowthOrder&, const std::vector<double>&)>& F);

// Total mass int dp_T 1 (should be 1).
double measure_mass(const DecouplingMeasure& dp, int nodes);

// One sample s ~ dp_T; returns the chosen order index.
std::size_t sample_measure(const DecouplingMeasure& dp, rng::Stream& st,
                           std::vector<double>& s);

// K(Y) for the polymer Y = {0..n-1} under v, summed over trees; optional
// extra factor multiplying the integrand pointwise in s.
Element polymer_activity(
    const PairPotential& v, int nodes = 16,
    const std::function<Element(const GrowthOrder&, const std::vector<double>&)>& extra = {});
// Single-tree contribution.
Element polymer_activity_tree(
    const PairPotential& v, const Tree& t, int nodes = 16,
    const std::function<Element(const GrowthOrder&, const std::vector<double>&)>& extra = {});

// All set partitions of {0..n-1} as block lists.
std::vector<std::vector<std::vector<int>>> partitions(int n);

// norm of  e^{V_X} - sum over partitions of prod K(Y),  |X| <= 4.
double bbf_verify(const PairPotential& v, int nodes = 16);

// Convexity residual: distance of the sigma(s) pair-coefficient vector from
// the convex hull of partition-decoupling patterns (0/1 per pair).
double convexity_residual(int n, const std::vector<std::pair<int, int>>& pairs,
                          const std::vector<double>& sigma);

}  // namespace susy::bbf
