#pragma once

#include "ssir/linalg.hpp"
#include "ssir/rng.hpp"

namespace ssir {

enum class CovKind {
  kIdentity,       // I_p
  kDense,          // 1 on the diagonal, 0.6 everywhere else
  kToeplitz,       // 0.5^|i-j|
  kSparseInverse,  // correlation-normalized inverse of a banded precision
};

enum class ModelKind { kI, kII, kIII, kIV, kV };

struct ModelSpec {
  ModelKind kind = ModelKind::kI;
  int d = 1;
  double noise_scale = 1.0;
  static ModelSpec of(ModelKind kind);
};

// Population covariance for a scenario. The sparse-inverse structure builds
// the banded precision W (1 on the diagonal, 0.5 at lag 1, 0.4 at lag 2),
// inverts it, and rescales W^{-1} to unit diagonal. Positive definiteness
// is checked by an actual factorization before returning.
SymMatrix make_cov(CovKind kind, int p);

struct DrawnCoefficients {
  Matrix beta;       // p x d, rows outside support exactly zero
  IndexSet support;  // s rows, sorted
};

// Support: s indices uniform without replacement. Entries on the support:
// i.i.d. uniform on {-2,-1,0,1,2}; a row drawn all-zero is redrawn, and for
// d >= 2 the whole entry block is redrawn until the columns are linearly
// independent. All d columns share the one support.
DrawnCoefficients draw_coefficients(RngStream& stream, int p, int d, int s);

// Response given the index matrix U = X * beta (n x d) and raw standard
// normal noise; the model's noise scale is applied here. Split out so the
// link functions can be tested with forced U.
Vector model_response(const ModelSpec& model, const Matrix& U,
                      const Vector& noise);

struct SimulatedDataset {
  Matrix X;          // n x p
  Vector y;          // n
  Matrix beta;       // p x d true coefficients
  IndexSet support;  // true support
};

// One dataset draw. Consumes the stream in a fixed documented order:
// coefficients first, then the standard normal matrix Z row by row, then
// the noise vector; X = Z L^T for the covariance factor L.
SimulatedDataset draw_dataset(RngStream& stream, int n, int p, ModelKind model,
                              CovKind cov, int s = 5);

// Same draw against a precomputed covariance factor (the factor of
// make_cov(kind, p)); replicate loops use this to factor the covariance
// once per scenario. Identical output to the CovKind overload.
SimulatedDataset draw_dataset(RngStream& stream, int n, ModelKind model,
                              const CholeskyFactor& cov_factor, int s = 5);

}  // namespace ssir
