#pragma once

#include "ssir/linalg.hpp"

namespace ssir {

// Correlation-based subspace loss:
//   1 - (1/d) tr{ (Bh' S Bh)^-1 (Bh' S Bt) (Bt' S Bt)^-1 (Bt' S Bh) }
// for estimated basis Bh, true basis Bt, covariance S. 0 means the spans
// coincide S-orthogonally, 1 means they are S-orthogonal. Gram matrices are
// factored and solved, never inverted explicitly; a Gram with condition
// number above 1e12 (or that is not positive definite) raises SingularGram.
double correlation_loss(const Matrix& b_hat, const Matrix& b_true,
                        const SymMatrix& sigma);

// Frobenius norm of U U^T - V V^T for orthonormal frames U, V (p x d).
// Columns must be orthonormal within 1e-8 or NotOrthonormal is thrown.
double projection_loss(const Matrix& u, const Matrix& v);

// sqrt(sum_j (1 - sigma_j^2)) over the singular values of U^T V, the
// Frobenius norm of the sine-theta angles. Same orthonormality contract.
double sin_theta_loss(const Matrix& u, const Matrix& v);

// True support covered by the estimate (containment, not equality).
bool signal_hit(const IndexSet& estimated, const IndexSet& truth);

struct LossReport {
  double correlation = 0.0;
  double projection = 0.0;
  double sin_theta = 0.0;
  bool signal = false;
  bool signal_exact = false;
};

// All metrics at once. The subspace losses need orthonormal frames, so both
// bases are Euclidean-orthonormalized by QR first; the correlation loss
// uses the raw bases (it is invariant to the column scaling anyway).
LossReport compute_losses(const Matrix& b_hat, const Matrix& b_true,
                          const SymMatrix& sigma, const IndexSet& estimated,
                          const IndexSet& truth);

}  // namespace ssir
