#include "ssir/simulate.hpp"

#include <cmath>
#include <cstdlib>

namespace ssir {

ModelSpec ModelSpec::of(ModelKind kind) {
  ModelSpec spec;
  spec.kind = kind;
  if (kind == ModelKind::kV) {
    spec.d = 2;
    spec.noise_scale = 0.2;
  }
  return spec;
}

SymMatrix make_cov(CovKind kind, int p) {
  if (p < 1) {
    throw InvalidArgument("make_cov: p must be positive");
  }
  Matrix sigma;
  switch (kind) {
    case CovKind::kIdentity:
      sigma = Matrix::Identity(p, p);
      break;
    case CovKind::kDense:
      sigma = Matrix::Constant(p, p, 0.6);
      sigma.diagonal().setOnes();
      break;
    case CovKind::kToeplitz:
      sigma.resize(p, p);
      for (int j = 0; j < p; ++j) {
        for (int i = 0; i < p; ++i) {
          sigma(i, j) = std::pow(0.5, std::abs(i - j));
        }
      }
      break;
    case CovKind::kSparseInverse: {
      if (p < 3) {
        throw InvalidArgument("make_cov: sparse-inverse structure needs p >= 3");
      }
      Matrix w = Matrix::Identity(p, p);
      for (int i = 0; i + 1 < p; ++i) {
        w(i, i + 1) = w(i + 1, i) = 0.5;
      }
      for (int i = 0; i + 2 < p; ++i) {
        w(i, i + 2) = w(i + 2, i) = 0.4;
      }
      const CholeskyFactor f = cholesky(SymMatrix::from_lower(w));
      // Sigma0 = W^{-1} through the factor, then rescale to unit diagonal.
      Matrix sigma0 = Matrix::Identity(p, p);
      f.lower.triangularView<Eigen::Lower>().solveInPlace(sigma0);
      f.lower.triangularView<Eigen::Lower>().transpose().solveInPlace(sigma0);
      const Vector dinv = sigma0.diagonal().cwiseSqrt().cwiseInverse();
      sigma = dinv.asDiagonal() * sigma0 * dinv.asDiagonal();
      break;
    }
  }
  SymMatrix out = SymMatrix::from_lower(std::move(sigma));
  cholesky(out);  // positive definiteness check; throws otherwise
  return out;
}

namespace {

int draw_entry(RngStream& stream) {
  return static_cast<int>(stream.next_below(5)) - 2;
}

// Exact rank check for small integer matrices: Gaussian elimination over
// rationals would be overkill; with entries in {-2,...,2} the 2x2 minor
// test (d = 2) and a pivoted elimination with exact zero tests (d > 2) are
// reliable since all intermediate values stay small integers scaled by
// powers of previous pivots.
bool columns_independent(const Matrix& block, int d) {
  if (d == 1) {
    return block.col(0).cwiseAbs().sum() > 0.0;
  }
  if (d == 2) {
    const int s = static_cast<int>(block.rows());
    for (int i = 0; i < s; ++i) {
      for (int j = i + 1; j < s; ++j) {
        const double minor = block(i, 0) * block(j, 1) - block(j, 0) * block(i, 1);
        if (minor != 0.0) {
          return true;
        }
      }
    }
    return false;
  }
  return Eigen::FullPivLU<Matrix>(block).rank() == d;
}

}  // namespace

DrawnCoefficients draw_coefficients(RngStream& stream, int p, int d, int s) {
  if (d < 1 || s < 1 || s > p) {
    throw InvalidArgument("draw_coefficients: need d >= 1 and 1 <= s <= p");
  }
  if (d > s) {
    throw InvalidArgument("draw_coefficients: need s >= d for independent columns");
  }
  DrawnCoefficients out;
  out.support = sample_subset(stream, p, s);
  Matrix block(s, d);
  while (true) {
    for (int r = 0; r < s; ++r) {
      // Row by row; a row of zeros is redrawn on the spot.
      while (true) {
        for (int c = 0; c < d; ++c) {
          block(r, c) = static_cast<double>(draw_entry(stream));
        }
        if (block.row(r).cwiseAbs().sum() > 0.0) {
          break;
        }
      }
    }
    if (columns_independent(block, d)) {
      break;
    }
  }
  out.beta = Matrix::Zero(p, d);
  for (int r = 0; r < s; ++r) {
    out.beta.row(out.support[static_cast<std::size_t>(r)]) = block.row(r);
  }
  return out;
}

Vector model_response(const ModelSpec& model, const Matrix& U,
                      const Vector& noise) {
  if (U.cols() != model.d) {
    throw InvalidArgument("model_response: U has the wrong number of columns");
  }
  if (U.rows() != noise.size()) {
    throw InvalidArgument("model_response: noise length mismatch");
  }
  const int n = static_cast<int>(U.rows());
  Vector y(n);
  switch (model.kind) {
    case ModelKind::kI:
      for (int i = 0; i < n; ++i) {
        const double u = U(i, 0);
        y(i) = u + std::sin(u);
      }
      break;
    case ModelKind::kII:
      for (int i = 0; i < n; ++i) {
        y(i) = 2.0 * std::atan(U(i, 0));
      }
      break;
    case ModelKind::kIII:
      for (int i = 0; i < n; ++i) {
        const double u = U(i, 0);
        y(i) = u * u * u;
      }
      break;
    case ModelKind::kIV:
      for (int i = 0; i < n; ++i) {
        y(i) = std::sinh(U(i, 0));
      }
      break;
    case ModelKind::kV:
      for (int i = 0; i < n; ++i) {
        // sign(0) counts as +1 so the link is total.
        const double sgn = U(i, 1) < 0.0 ? -1.0 : 1.0;
        y(i) = std::exp(U(i, 0)) * sgn;
      }
      break;
  }
  y += model.noise_scale * noise;
  return y;
}

SimulatedDataset draw_dataset(RngStream& stream, int n, ModelKind model,
                              const CholeskyFactor& cov_factor, int s) {
  const int p = cov_factor.dim();
  if (n < 2) {
    throw InvalidArgument("draw_dataset: need n >= 2");
  }
  const ModelSpec spec = ModelSpec::of(model);
  DrawnCoefficients coeffs = draw_coefficients(stream, p, spec.d, s);

  Matrix z(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      z(i, j) = stream.next_normal();
    }
  }
  Vector noise(n);
  for (int i = 0; i < n; ++i) {
    noise(i) = stream.next_normal();
  }

  SimulatedDataset out;
  out.X.noalias() = z * cov_factor.lower.transpose();
  const Matrix u = out.X * coeffs.beta;
  out.y = model_response(spec, u, noise);
  out.beta = std::move(coeffs.beta);
  out.support = std::move(coeffs.support);
  return out;
}

SimulatedDataset draw_dataset(RngStream& stream, int n, int p, ModelKind model,
                              CovKind cov, int s) {
  const CholeskyFactor factor = cholesky(make_cov(cov, p));
  return draw_dataset(stream, n, model, factor, s);
}

}  // namespace ssir
