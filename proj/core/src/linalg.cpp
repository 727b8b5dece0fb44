#include "ssir/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace ssir {

SymMatrix SymMatrix::from_lower(Matrix m) {
  if (m.rows() != m.cols()) {
    throw InvalidArgument("SymMatrix: matrix must be square");
  }
  if (!m.allFinite()) {
    throw InvalidArgument("SymMatrix: entries must be finite");
  }
  m.triangularView<Eigen::StrictlyUpper>() =
      m.transpose().triangularView<Eigen::StrictlyUpper>();
  return SymMatrix(std::move(m));
}

SymMatrix SymMatrix::from_dense(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) {
    throw InvalidArgument("SymMatrix: matrix must be square");
  }
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= tol)) {
    throw InvalidArgument("SymMatrix: input is not symmetric within tolerance");
  }
  return from_lower(m);
}

namespace detail {

bool cholesky_in_place(Matrix& a, double jitter) {
  const int n = static_cast<int>(a.rows());
  if (jitter != 0.0) {
    a.diagonal().array() += jitter;
  }
  for (int j = 0; j < n; ++j) {
    // Left-looking update of column j, contiguous in column-major storage.
    for (int t = 0; t < j; ++t) {
      const double ljt = a(j, t);
      a.col(j).segment(j, n - j).noalias() -=
          ljt * a.col(t).segment(j, n - j);
    }
    const double pivot = a(j, j);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      return false;
    }
    const double root = std::sqrt(pivot);
    a(j, j) = root;
    if (j + 1 < n) {
      a.col(j).segment(j + 1, n - j - 1) /= root;
    }
  }
  return true;
}

void fix_column_signs(Matrix& vectors) {
  for (int c = 0; c < vectors.cols(); ++c) {
    int arg = 0;
    double best = std::abs(vectors(0, c));
    for (int r = 1; r < vectors.rows(); ++r) {
      const double mag = std::abs(vectors(r, c));
      if (mag > best) {
        best = mag;
        arg = r;
      }
    }
    if (vectors(arg, c) < 0.0) {
      vectors.col(c) = -vectors.col(c);
    }
  }
}

void gather_block(const Matrix& src, const std::vector<int>& S, Matrix& dst) {
  const int k = static_cast<int>(S.size());
  dst.resize(k, k);
  for (int j = 0; j < k; ++j) {
    const int sj = S[static_cast<std::size_t>(j)];
    for (int i = 0; i < k; ++i) {
      dst(i, j) = src(S[static_cast<std::size_t>(i)], sj);
    }
  }
}

void check_index_set(const std::vector<int>& S, int p, const char* where) {
  if (S.empty()) {
    throw IndexOutOfRange(std::string(where) + ": empty index set");
  }
  int prev = -1;
  for (const int idx : S) {
    if (idx < 0 || idx >= p) {
      throw IndexOutOfRange(std::string(where) + ": index out of [0, p)");
    }
    if (idx <= prev) {
      throw IndexOutOfRange(std::string(where) +
                            ": indices must be sorted ascending and unique");
    }
    prev = idx;
  }
}

}  // namespace detail

CholeskyFactor cholesky(const SymMatrix& a, double jitter) {
  Matrix work = a.mat();
  if (!detail::cholesky_in_place(work, jitter)) {
    throw NotPositiveDefinite("cholesky: nonpositive pivot encountered");
  }
  work.triangularView<Eigen::StrictlyUpper>().setZero();
  return CholeskyFactor{std::move(work)};
}

SymEigResult sym_eig(const SymMatrix& a, int top) {
  const int n = a.dim();
  if (n == 0) {
    throw InvalidArgument("sym_eig: empty matrix");
  }
  if (top < 0 || top > n) {
    top = n;
  }
  if (top == 0) {
    throw InvalidArgument("sym_eig: top must be at least 1");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.mat());
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("sym_eig: QL iteration budget exhausted");
  }
  // Eigen returns ascending order; flip to nonincreasing and truncate.
  SymEigResult out;
  out.values.resize(top);
  out.vectors.resize(n, top);
  for (int i = 0; i < top; ++i) {
    out.values(i) = solver.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  detail::fix_column_signs(out.vectors);
  return out;
}

GenEigResult gen_eig(const SymMatrix& a, const SymMatrix& b, int top,
                     double jitter) {
  const int n = a.dim();
  if (b.dim() != n) {
    throw InvalidArgument("gen_eig: dimension mismatch");
  }
  CholeskyFactor chol = cholesky(b, jitter);
  Matrix m = a.mat();
  // M = L^{-1} A L^{-T}
  chol.lower.triangularView<Eigen::Lower>().solveInPlace(m);
  chol.lower.triangularView<Eigen::Lower>()
      .transpose()
      .solveInPlace<Eigen::OnTheRight>(m);
  SymEigResult reduced = sym_eig(SymMatrix::from_lower(std::move(m)), top);
  // Back-transform: v = L^{-T} gamma keeps B-orthonormality exactly.
  Matrix vectors = reduced.vectors;
  chol.lower.triangularView<Eigen::Lower>().transpose().solveInPlace(vectors);
  detail::fix_column_signs(vectors);
  return GenEigResult{std::move(reduced.values), std::move(vectors)};
}

SymMatrix principal_submatrix(const SymMatrix& a, const IndexSet& S) {
  detail::check_index_set(S, a.dim(), "principal_submatrix");
  Matrix block;
  detail::gather_block(a.mat(), S, block);
  return SymMatrix::from_lower(std::move(block));
}

}  // namespace ssir
