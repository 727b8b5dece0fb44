#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ssir/errors.hpp"

namespace ssir {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
// Sorted ascending, no duplicates, 0-based. Validated where it enters the API.
using IndexSet = std::vector<int>;

// Iteration budget of the symmetric eigensolver, in QL sweeps per eigenvalue.
// Exceeding it raises ConvergenceFailure instead of returning garbage.
inline constexpr int kEigIterationBudget = 30;

// Jitter used by callers that retry a failed factorization: scale * trace/dim.
inline constexpr double kJitterScale = 1e-10;

// Dense symmetric matrix. The lower triangle is authoritative; construction
// mirrors it so stored symmetry is exact, not approximate.
class SymMatrix {
 public:
  SymMatrix() = default;

  // Mirrors the lower triangle of m into the upper one.
  static SymMatrix from_lower(Matrix m);

  // Requires m to already be symmetric up to `tol` (absolute); mirrors lower.
  static SymMatrix from_dense(const Matrix& m, double tol = 1e-12);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& mat() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  double trace() const { return m_.trace(); }

 private:
  explicit SymMatrix(Matrix m) : m_(std::move(m)) {}
  Matrix m_;
};

// Lower-triangular Cholesky factor, A = L L^T.
struct CholeskyFactor {
  Matrix lower;
  int dim() const { return static_cast<int>(lower.rows()); }
};

struct SymEigResult {
  Vector values;   // nonincreasing
  Matrix vectors;  // one column per value, unit length, sign-normalized
};

struct GenEigResult {
  Vector values;   // nonincreasing
  Matrix vectors;  // columns v_i with v_i^T B v_j = (i == j)
};

namespace detail {

// Column-oriented in-place Cholesky on the lower triangle of a. Adds
// `jitter` to the diagonal first. Returns false on a nonpositive or
// non-finite pivot; contents are unspecified after a failure.
bool cholesky_in_place(Matrix& a, double jitter);

// Flip eigenvector columns so the entry of largest magnitude is positive;
// among tied magnitudes the lowest index decides.
void fix_column_signs(Matrix& vectors);

// Copy the (S, S) block of src into dst (resized to |S| x |S|). No index
// validation: hot path helper.
void gather_block(const Matrix& src, const std::vector<int>& S, Matrix& dst);

// Validate an index set against dimension p: nonempty, sorted ascending,
// unique, all in [0, p). Throws IndexOutOfRange.
void check_index_set(const std::vector<int>& S, int p, const char* where);

}  // namespace detail

// Cholesky factorization of (A + jitter * I). Throws NotPositiveDefinite.
CholeskyFactor cholesky(const SymMatrix& a, double jitter = 0.0);

// Top `top` eigenpairs of a symmetric matrix, eigenvalues nonincreasing,
// eigenvectors unit length with the deterministic sign convention.
// top = -1 means all. Throws ConvergenceFailure if the solver's iteration
// budget (kEigIterationBudget sweeps) is exhausted.
SymEigResult sym_eig(const SymMatrix& a, int top = -1);

// Generalized eigenproblem A v = lambda B v for symmetric A and positive
// definite B, solved by Cholesky reduction: with B = L L^T, the symmetric
// matrix M = L^{-1} A L^{-T} has the same eigenvalues, and v = L^{-T} gamma
// maps its eigenvectors back. Returned vectors are B-orthonormal.
GenEigResult gen_eig(const SymMatrix& a, const SymMatrix& b, int top = -1,
                     double jitter = 0.0);

// The (S, S) principal submatrix. S is 0-based, sorted, unique.
SymMatrix principal_submatrix(const SymMatrix& a, const IndexSet& S);

}  // namespace ssir
