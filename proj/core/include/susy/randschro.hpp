#pragma once
// Random Schroedinger models on finite boxes: Hamiltonian assembly,
// Monte-Carlo and deterministic disorder-averaged Green's functions, LDOS,
// and the direct (strong-coupling) and dual (weak-coupling) cluster
// expansions evaluated term by term with the exact Grassmann engine.

#include "susy/bbf.hpp"
#include "susy/bounds.hpp"
#include "susy/disorder.hpp"
#include "susy/quadrature.hpp"
#include "susy/superfn.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <vector>

namespace susy::randschro {

using cplx = std::complex<double>;
using grassmann::Site;

enum class Hopping { laplacian, exponential };

struct LatticeModel {
  int D = 1;
  std::array<int, 3> box = {1, 1, 1};  // Lambda = [0, box) per used axis
  int ncolour = 1;
  Hopping hopping = Hopping::laplacian;
  double hop_amp = 1.0;   // exponential kernel amplitude
  double hop_rate = 1.0;  // exponential kernel decay rate
  double gamma = 1.0;

  int nsites() const;
  int dim() const { return nsites() * ncolour; }
  Site site(int i) const;
  int index(const Site& s) const;  // throws when outside the box
};

// Colour-diagonal hopping blocks; zero boundary conditions.
Eigen::MatrixXcd build_hamiltonian(const LatticeModel& m);

struct SpectralPoint {
  double E = 0.0;
  double eps = 0.0;   // regularization, z = E + branch * i * eps
  double beta = 0.0;  // analytic-continuation strip (dual path site factor)
  int branch = +1;    // +1 or -1

  cplx z() const { return {E, branch * eps}; }
  // argument of the direct site factor F_w, diagonal hopping absorbed
  cplx direct_w(double hop_diag) const {
    return cplx(0.0, branch) * cplx(E - hop_diag, branch * eps) + cplx(beta, 0.0);
  }
};

struct McGreen {
  Eigen::MatrixXcd mean;    // S x S block of E (H_omega - z)^{-1} at (x, y)
  Eigen::MatrixXd err;      // per-entry standard error
  long resamples = 0;       // singular draws that were redrawn
  long samples = 0;
};

McGreen mc_green(const LatticeModel& m, const disorder::Disorder& d, const SpectralPoint& pt,
                 const Site& x, const Site& y, long nsamples, std::uint64_t seed);

// Deterministic disorder average by tensor quadrature: contour-shifted
// Gauss-Hermite for gaussian disorder (each omega_j -> omega_j - i c branch,
// valid because the anti-Hermitian part of H - z keeps one sign along the
// shift), plain Gauss-Legendre over the support for the bump (needs eps > 0).
Eigen::MatrixXcd quadrature_green(const LatticeModel& m, const disorder::Disorder& d,
                                  const SpectralPoint& pt, const Site& x, const Site& y,
                                  int nodes_per_dim, double shift = 0.5);

struct LdosResult {
  double value = 0.0;
  double err = 0.0;
  long resamples = 0;
};

// rho_{eps,Lambda}(E) = (1 / pi |S|) Im Tr_S E (H_omega - E - i eps)^{-1}_{0,0}
LdosResult mc_ldos(const LatticeModel& m, const disorder::Disorder& d, double E, double eps,
                   long nsamples, std::uint64_t seed);
// disorder variance 0 oracle by eigensolve
double ldos_exact(const LatticeModel& m, double E, double eps);

// Site factor F_w(Phi) = sum_n f^(n)(phi+ . phi-) (sum_s psi+ psi-)^n / n!
// with f(t) = e^{w t / gamma} nuhat(t); element on the given context.
grassmann::Element f_site_element(const disorder::FProfile& f, const superfn::BosonicPoint& p,
                                  const superfn::BosonicLayout& layout,
                                  const grassmann::ContextPtr& ctx, const Site& x, int ncolour);

// Product-form envelope dominating |f^(n)| over nplanes complex planes.
superfn::Envelope f_envelope(const disorder::FProfile& f, int nmax, int nplanes);

// Single-site superfunction F_z for localization checks.
superfn::SuperFunction f_z(const disorder::Disorder& d, cplx z, double gamma, int ncolour);

// int dPhi F for the one-site factor, reduced exactly to the radial line:
// (-1)^S int_0^inf f^(S)(u) u^{S-1}/(S-1)! du, oscillation-safe panels.
// Localization predicts f(0); the bump profile oscillates far too long for
// the tensor quadrature in more than one plane, this does not.
cplx radial_site_integral(const disorder::FProfile& f, int ncolour, double u_max);

struct ClusterOptions {
  int boson_nodes = 20;        // per real dimension, tensor quadrature path
  int stage_nodes = 8;         // decoupling-measure stages
  long mc_samples = 20000;     // beyond max_planes_tensor complex planes
  int max_planes_tensor = 2;
  int r_cut = 1000;            // free sites within this distance of {x, y}
  std::uint64_t seed = 1;
  double radius = 0.0;         // 0: derive from the envelope
  int threads = 1;
};

// int_0^inf J0(2 sqrt(u v)) h(u) du by doubling panels; h must decay.
cplx hankel_radial(const std::function<cplx(double)>& h, double v, double u_max);

struct ClusterTerm {
  int order = 0;
  cplx g{};              // g_N or G_N (no coupling prefactor)
  cplx contribution{};   // prefactored contribution to G_Lambda
  double err = 0.0;      // quadrature/MC error on |contribution|
  double quad_err = 0.0;  // part of err from tensor-quadrature pieces
  double mc_err = 0.0;    // part of err from Monte-Carlo pieces
  double cutoff_tail = 0.0;  // bound on the neglected far tuples
  long pieces = 0;       // (tree, tuple) pairs evaluated
};

// g_N of the strong-coupling expansion, sources at colour (sx, sy);
// contribution = (branch i / gamma)^{N + 2 - dxy} g_N.
ClusterTerm direct_cluster_term(const LatticeModel& m, const disorder::Disorder& d,
                                const SpectralPoint& pt, const Site& x, const Site& y, int N,
                                const ClusterOptions& opt, int sx = 0, int sy = 0);

// Radial profiles of the dual site factor: T_k(v) = int_0^inf J0(2 sqrt(u v))
// f^(k)(u) du, cubic-spline cached, with the J0 integral by panel quadrature.
class DualProfile {
 public:
  DualProfile(const disorder::FProfile& f, int nderiv, double vmax = 0.0, int grid = 400);
  cplx value(int k, double v) const;
  double vmax() const { return vmax_; }
  int nderiv() const { return nderiv_; }
  const disorder::FProfile& profile() const { return f_; }

 private:
  disorder::FProfile f_;
  int nderiv_;
  double vmax_;
  std::vector<quadrature::Spline> re_, im_;
};

// G_N of the weak-coupling expansion; contribution =
// -(branch i gamma)^{-dxy} (branch i gamma)^N G_N. Sources realized as
// eta-derivatives of the transformed site product (realization 1) or as the
// transform of the psi-multiplied site factors (realization 2); both are
// computed and their disagreement is reported in source_mismatch.
struct DualTerm {
  ClusterTerm term;
  double source_mismatch = 0.0;
};

DualTerm dual_cluster_term(const LatticeModel& m, const disorder::Disorder& d,
                           const SpectralPoint& pt, const Site& x, const Site& y, int N,
                           const ClusterOptions& opt, int sx = 0, int sy = 0);

enum class Expansion { direct, dual };

struct ClusterGreen {
  cplx value{};
  std::vector<ClusterTerm> orders;
  double err = 0.0;            // accumulated term errors
  double truncation = 0.0;     // bound on the orders beyond N_max
  bool certified = false;      // truncation from the constant chain
  bool diverged = false;       // certified ratio >= 1 and no empirical decay
};

ClusterGreen cluster_green(const LatticeModel& m, const disorder::Disorder& d,
                           const SpectralPoint& pt, const Site& x, const Site& y, int N_max,
                           Expansion which, const ClusterOptions& opt);

// l-th Taylor term of the dual Gibbs weight in the diagonal expansion at the
// origin: derivative-operator realization evaluated exactly at Phi = 0.
// G_N(0,0) = sum_l ((branch i gamma)^l / l!) * taylor_term(l, N).
cplx dual_taylor_term(const LatticeModel& m, const disorder::Disorder& d, double E, int N,
                      int l, const ClusterOptions& opt);

}  // namespace susy::randschro
