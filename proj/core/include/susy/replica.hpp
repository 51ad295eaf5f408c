#pragma once
// Matrix inverses as superintegrals: exact fermionic Gaussians through the
// Grassmann engine, bosonic Gaussians by quadrature or Monte Carlo after a
// real Gaussian change of variables.

#include "susy/grassmann.hpp"
#include "susy/superfn.hpp"

#include <Eigen/Dense>

namespace susy::replica {

using grassmann::cplx;
using Matrix = Eigen::MatrixXcd;

// Smallest eigenvalue of the Hermitian part (A + A*)/2.
double hermitian_part_min_eig(const Matrix& A);

// int dpsi e^{-psi+ A psi-} = det A, evaluated exactly (n <= 16 pairs).
cplx fermionic_determinant(const Matrix& A);

// (det A)^{-1} int dpsi e^{-psi+ A psi-} psi-_x psi+_y = (A^{-1})_{x,y}.
cplx fermionic_gaussian(const Matrix& A, int x, int y);
Matrix fermionic_gaussian(const Matrix& A);

// Doubled symmetric form: phi+ A phi- = x^T Atilde x on the real slice.
Matrix tilde_matrix(const Matrix& A);

// int dphi e^{-phi+ A phi-} with the flat measure; equals (det A)^{-1} for a
// positive definite Hermitian part. Quadrature path: diagonalize the phase
// after whitening the real part, then 1D Gauss-Hermite per direction.
superfn::IntegralResult bosonic_gaussian(const Matrix& A, const superfn::Integrator& how);

// Full superintegral for (A^{-1})_{x,y}; throws unless the Hermitian part is
// positive definite (tolerance 1e-12).
superfn::IntegralResult replica_inverse(const Matrix& A, int x, int y,
                                        const superfn::Integrator& how);

}  // namespace susy::replica
