#pragma once
// Explicit constants and inequality chains: lattice operator norms, weighted
// (rate-tilted) norms, the shell geometry constant Omega_D, tree-stripping
// constants, factorial-bound records (K, M, p) for the disorder superfunction,
// the strong- and weak-coupling convergence chains with certified series
// tails, and the density-of-states tail bound minimized over the truncation
// order.

#include "susy/bbf.hpp"
#include "susy/disorder.hpp"

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <string>
#include <vector>

namespace susy::bounds {

using cplx = std::complex<double>;
using LatticeSite = std::array<int, 3>;

// sup_x sum_y (inf1) and sup_{x,y} (infinf) of the colour-summed absolute
// blocks, plus the same for A_theta with (A_theta)_{xy} =
// e^{(1+theta) rate |x-y|/2} A_{xy}. Euclidean |x-y|.
struct NormProfile {
  double inf1 = 0.0;
  double infinf = 0.0;
  double weighted_inf1 = 0.0;
  double weighted_infinf = 0.0;
  double rate = 0.0;
  double theta = 0.0;
};

// Finite matrix with explicit site coordinates; blocks of size ncolour.
NormProfile matrix_norms(const Eigen::MatrixXcd& A, const std::vector<LatticeSite>& sites,
                         int ncolour, double rate, double theta);

// Translation-invariant kernel amp * e^{-rate |x|} on Z^D (colour-summed
// envelope). Infinite sums with tail below 1e-12; throws for theta >= 1.
NormProfile kernel_norms(double amp, double rate, int D, double theta);

// Covariance envelope amp * e^{-sqrt(delta)|x|} / (1 + |x|^{max(D-2,0)});
// the reported weighted_inf1 is the plain lattice sum (use * delta to match
// the delta-scaled constant convention).
NormProfile covariance_norms(double amp, double delta, int D, double theta);

// Largest Omega with  (minimal sum of |x_j| over d-1 distinct nonzero lattice
// points)/2 >= Omega (d-1)^{1+1/D}  for all 2 <= d <= d_max.
struct OmegaConstant {
  double value = 0.0;
  int argmin_d = 2;
};
OmegaConstant omega_constant(int D, int d_max = 200);

// sup_{d>=1} exp(2 q ln d - (1-theta) rate Omega (d-1)^{1/D}); diverged when
// the decaying part vanishes (theta >= 1 or rate <= 0) and q > 0.
struct StrippingConstant {
  double value = 1.0;
  int argmax_d = 1;
  bool diverged = false;
};
StrippingConstant stripping_constant(double q, double theta, double rate, int D, double omega);

// sum_{n>=0} ((n+shift)!)^p x^n / (n!)^{p+2} with a certified geometric tail
// (stops once the term ratio is <= 1/2 and the next term is negligible).
struct SeriesSum {
  double value = 0.0;
  double tail = 0.0;
  int terms = 0;
};
SeriesSum factorial_series(double p, double x, int shift);

// Factorial-bound record: integrals of monomial-weighted (IMB) or
// derivative-weighted (IDB) superfunction norms are <= K M^n (n!)^p.
struct FactorialBound {
  double K = 1.0;
  double M = 1.0;
  double p = 0.0;
  double W = 1.0;          // strip width / contour radius used
  std::string method;      // which appendix route produced M, p and K
  bool sup_is_lower_bound = false;  // K from a sampled sup or calibration
};

// Measured left-hand sides for |S| = 1, radial quadrature on u = |phi|^2.
double imb_integral(const disorder::FProfile& f, int nplus, int nminus);
double idb_integral(const disorder::FProfile& f, int nplus, int nminus);

FactorialBound imb_record(const disorder::Disorder& d, cplx z, double gamma);
FactorialBound idb_record(const disorder::Disorder& d, cplx z, double gamma);

// Strong-coupling chain: hopping decay sum|H_{xy}| <= calC e^{-alpha|x-y|}.
struct StrongChain {
  FactorialBound imb;
  double calC = 0.0, calC_theta = 0.0;  // calC_theta = weighted sum * alpha^D
  double alpha = 0.0, theta = 0.0;
  int D = 1, ncolour = 1;
  OmegaConstant omega;
  StrippingConstant stripping;  // q = p + 1 at rate alpha
  SeriesSum series;
  double cbar = 0.0;            // 2 K M e^{calC} calC_theta * series

  double gamma_min(double E) const;
  double energy_factor(double gamma, double E) const;  // 1 + gamma^{-s}(1+|E|)^s
  // bound on |gamma^{-(N+2-dxy)} g_N| entering the Green expansion
  double order_bound(int N, double gamma, double E, double dist, bool diag) const;
  double ratio(double gamma, double E) const;  // geometric ratio across orders
  // tail over orders > N_max; infinity with *diverged set when ratio >= 1
  double tail_bound(int N_max, double gamma, double E, double dist, bool diag,
                    bool* diverged = nullptr) const;
  double green_bound(double gamma, double E, double dist, bool diag) const;
};
StrongChain strong_chain(const FactorialBound& imb, double calC, double alpha, int D,
                         int ncolour, double theta);

// Weak-coupling chain: covariance decay with rate sqrt(delta); the chain is
// evaluated at a given delta (the stripping rate and the delta-scaled norm
// constants both enter).
struct WeakChain {
  FactorialBound idb;
  double amp = 0.0;                     // covariance envelope amplitude
  double calC = 0.0, calC_theta = 0.0;  // delta-scaled norm constants
  double delta = 0.0, theta = 0.0;
  int D = 1, ncolour = 1;
  double kprime = 0.0;  // K times the dual-monomial integral constant
  OmegaConstant omega;
  StrippingConstant stripping;
  SeriesSum series;
  double constant = 0.0;  // threshold constant: convergence needs delta >= gamma * constant

  double delta_min(double gamma) const { return gamma * constant; }
  double order_bound(int N, double gamma, double dist, bool diag) const;
  double ratio(double gamma) const { return gamma * constant / (2.0 * delta); }
  double tail_bound(int N_max, double gamma, double dist, bool diag,
                    bool* diverged = nullptr) const;
  double green_bound(double gamma, double dist, bool diag) const;
};
WeakChain weak_chain(const FactorialBound& idb, double amp, double delta, int D,
                     int ncolour, double theta);

// gamma^{-1} Cprime (N!)^{2p} (Cprime gamma / delta)^N minimized over N >= 0.
struct DosTailBound {
  long n_star = 0;
  double log_bound = 0.0;
  double bound = 0.0;
};
DosTailBound lifshitz_bound(double gamma, double delta, double cprime, double p);

// Left side of the tree-stripping inequality: sum over distinct site tuples
// of the product of colour-summed |H| couplings along the tree. Vertices
// n-1, n of the tree are pinned to x and y (x == y allowed when t.n == N+1).
double tree_coupling_sum(const Eigen::MatrixXcd& H, const std::vector<LatticeSite>& sites,
                         int ncolour, const bbf::Tree& t, int x, int y);

}  // namespace susy::bounds
