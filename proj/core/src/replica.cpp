#include "susy/replica.hpp"

#include "susy/quadrature.hpp"
#include "susy/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace susy::replica {

using grassmann::Charge;
using grassmann::Context;
using grassmann::ContextPtr;
using grassmann::Element;
using grassmann::Family;
using grassmann::GeneratorIndex;
using grassmann::Site;

double hermitian_part_min_eig(const Matrix& A) {
  Matrix H = 0.5 * (A + A.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(H);
  return es.eigenvalues().minCoeff();
}

namespace {

ContextPtr pair_context(int n) {
  std::vector<GeneratorIndex> gens;
  for (int i = 0; i < n; ++i)
    for (Charge q : {Charge::plus, Charge::minus})
      gens.push_back(GeneratorIndex{Family::psi, Site{i, 0, 0}, 0, q});
  return Context::make(std::move(gens));
}

Element gaussian_weight(const ContextPtr& ctx, const Matrix& A) {
  const int n = static_cast<int>(A.rows());
  Element expo(ctx);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (A(i, j) == cplx{0.0, 0.0}) continue;
      Element p = Element::generator(ctx, {Family::psi, Site{i, 0, 0}, 0, Charge::plus});
      Element m = Element::generator(ctx, {Family::psi, Site{j, 0, 0}, 0, Charge::minus});
      expo += p * m * (-A(i, j));
    }
  return grassmann::exp_even(expo);
}

cplx berezin_all(const Element& f) {
  std::vector<grassmann::VariableKey> vars;
  for (const auto& g : f.context()->generators())
    if (g.charge == Charge::plus) vars.push_back({g.family, g.site, g.colour});
  return grassmann::berezin(f, vars).scalar_part();
}

}  // namespace

cplx fermionic_determinant(const Matrix& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("square matrix required");
  if (A.rows() > 16) throw std::invalid_argument("generator budget allows n <= 16");
  ContextPtr ctx = pair_context(static_cast<int>(A.rows()));
  return berezin_all(gaussian_weight(ctx, A));
}

cplx fermionic_gaussian(const Matrix& A, int x, int y) {
  const int n = static_cast<int>(A.rows());
  if (x < 0 || y < 0 || x >= n || y >= n) throw std::invalid_argument("index out of range");
  cplx det = Eigen::PartialPivLU<Matrix>(A).determinant();
  if (std::abs(det) < 1e-300) throw std::invalid_argument("singular matrix");
  ContextPtr ctx = pair_context(n);
  Element w = gaussian_weight(ctx, A);
  Element src = Element::generator(ctx, {Family::psi, Site{x, 0, 0}, 0, Charge::minus}) *
                Element::generator(ctx, {Family::psi, Site{y, 0, 0}, 0, Charge::plus});
  return berezin_all(w * src) / det;
}

Matrix fermionic_gaussian(const Matrix& A) {
  const int n = static_cast<int>(A.rows());
  Matrix out(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) out(x, y) = fermionic_gaussian(A, x, y);
  return out;
}

Matrix tilde_matrix(const Matrix& A) {
  const int n = static_cast<int>(A.rows());
  Matrix S = 0.5 * (A + A.transpose());
  Matrix K = A - A.transpose();  // antisymmetric part, doubled
  Matrix out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = S;
  out.bottomRightCorner(n, n) = S;
  out.topRightCorner(n, n) = cplx(0.0, -0.5) * K;
  out.bottomLeftCorner(n, n) = cplx(0.0, 0.5) * K;
  return out;
}

superfn::IntegralResult bosonic_gaussian(const Matrix& A, const superfn::Integrator& how) {
  const int n = static_cast<int>(A.rows());
  Matrix T = tilde_matrix(A);
  Eigen::MatrixXd R = T.real();
  Eigen::MatrixXd B = T.imag();

  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("Hermitian part not positive definite");
  Eigen::MatrixXd L = llt.matrixL();
  // whiten: x = L^{-T} u, phase becomes u^T W u with W symmetric
  Eigen::MatrixXd W =
      L.triangularView<Eigen::Lower>().solve(B).transpose();
  W = L.triangularView<Eigen::Lower>().solve(W).transpose();
  W = 0.5 * (W + W.transpose());
  double detL = L.diagonal().prod();

  if (how.kind == superfn::IntegratorKind::gauss_legendre ||
      how.kind == superfn::IntegratorKind::importance) {
    // diagonalize the phase: the integral factorizes into 1D lines
    // (2/sqrt(pi)) int_0^T exp(-(1+i d) t^2) dt, truncated at e^{-T^2} level
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
    const double T = 6.5;
    auto line = [&](double d, int nodes) {
      int need = std::max(nodes, static_cast<int>(0.6 * std::abs(d) * T * T) + 32);
      auto rule = quadrature::rescaled(quadrature::gauss_legendre(need), 0.0, T);
      cplx s(0.0, 0.0);
      for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
        double t = rule.nodes[j];
        s += rule.weights[j] * std::exp(cplx(-t * t, -d * t * t));
      }
      return 2.0 * s / std::sqrt(M_PI);
    };
    cplx prod(1.0, 0.0), prod2(1.0, 0.0);
    for (int k = 0; k < 2 * n; ++k) {
      double d = es.eigenvalues()(k);
      prod *= line(d, std::max(how.nodes, 8));
      prod2 *= line(d, std::max(how.nodes / 2, 6));
    }
    return {prod / detL, std::abs(prod - prod2) / detL};
  }

  // Monte Carlo: expectation of the phase under the whitened Gaussian
  cplx sum(0.0, 0.0);
  double sumsq = 0.0;
  const long nsamp = how.samples;
  for (long i = 0; i < nsamp; ++i) {
    rng::Stream st(how.seed, static_cast<std::uint64_t>(i));
    Eigen::VectorXd u(2 * n);
    for (int k = 0; k < 2 * n; ++k) u(k) = st.normal() / std::sqrt(2.0);
    cplx v = std::exp(cplx(0.0, -u.dot(W * u)));
    sum += v;
    sumsq += std::norm(v);
  }
  cplx mean = sum / static_cast<double>(nsamp);
  double var = std::max(0.0, sumsq / nsamp - std::norm(mean));
  return {mean / detL, std::sqrt(var / nsamp) / detL};
}

superfn::IntegralResult replica_inverse(const Matrix& A, int x, int y,
                                        const superfn::Integrator& how) {
  if (hermitian_part_min_eig(A) <= 1e-12)
    throw std::invalid_argument("Hermitian part not positive definite");
  cplx det = Eigen::PartialPivLU<Matrix>(A).determinant();
  cplx fermionic = fermionic_gaussian(A, x, y) * det;  // det A * (A^{-1})_{xy}
  superfn::IntegralResult bos = bosonic_gaussian(A, how);
  return {bos.value * fermionic, bos.error * std::abs(fermionic)};
}

}  // namespace susy::replica
