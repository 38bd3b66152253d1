#pragma once

#include "msna/types.hpp"

#include <cstdint>
#include <random>

namespace msna {

// Dense symmetric d x d matrix. Stored fully; symmetry is an invariant
// maintained by the operations below, not a storage format. Mutation goes
// through scatter_symmetric_update so that the invariant survives any
// sequence of library calls.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int dim) : m_(Matrix::Zero(dim, dim)) {}

  static SymMatrix identity(int dim);
  // Validates near-symmetry (relative Frobenius tolerance), then symmetrizes
  // exactly.
  static SymMatrix from_dense(const Matrix& m, double tol = 1e-9);

  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Matrix& dense() const { return m_; }

  // O(d^2) matrix-vector product.
  Vector apply(const Vector& v) const { return m_ * v; }
  double frob_norm() const { return m_.norm(); }
  double trace() const { return m_.trace(); }

  friend void scatter_symmetric_update(SymMatrix& a, const IndexList& indices,
                                       const Matrix& row_block, const Matrix& corner_block,
                                       double diag_add, double row_scale, double block_scale,
                                       OpCounters* ops);

 private:
  Matrix m_;
};

// The nonzero rows of a row-masked Hessian estimate: row k of `rows` holds
// row indices[k] of the underlying d x d estimate; all other rows are zero
// and never stored.
struct MaskedHessian {
  int dim = 0;
  IndexList indices;  // strictly increasing, size l, values in [0, dim)
  Matrix rows;        // l x dim

  int block_size() const { return static_cast<int>(indices.size()); }
};

// Draws l distinct uniform indices out of [0, d) per call, each l-subset
// equally likely. Partial Fisher-Yates over a persistent pool, output sorted.
class MaskSampler {
 public:
  MaskSampler(int dim, int block_size, std::uint64_t seed);

  IndexList sample();

  int dim() const { return dim_; }
  int block_size() const { return block_; }

 private:
  int dim_;
  int block_;
  std::mt19937_64 rng_;
  std::vector<int> pool_;
};

// Operator norm of the masked estimate, computed from the l x l Gram matrix
// of the stored rows: ||H~||_op = sqrt(lambda_max(R R^T)). Direct symmetric
// eigensolve for l <= 64, power iteration beyond that. Cost O(l^2 d) + O(l^3).
double masked_op_norm(const MaskedHessian& h, OpCounters* ops = nullptr);

// Frobenius norm of the stored rows; an upper bound on the operator norm,
// available as an experimental cheap substitute for the truncation gate.
double masked_frob_norm(const MaskedHessian& h, OpCounters* ops = nullptr);

// The nonzero rows of H~ * A: row k equals (row indices[k] of H~) * A.
// Cost O(l d^2).
Matrix masked_product(const MaskedHessian& h, const SymMatrix& a, OpCounters* ops = nullptr);

// In-place masked update
//   a += row_scale * (row_block scattered into rows I)
//      + row_scale * (row_block^T scattered into columns I)
//      + block_scale * (corner_block scattered into the I x I block)
//      + diag_add at diagonal positions I.
// Touches exactly the union of rows I and columns I (2 l d - l^2 entries);
// the I x I block accumulates the row, column and corner contributions, as
// the algebra dictates. Result is symmetric whenever corner_block is.
void scatter_symmetric_update(SymMatrix& a, const IndexList& indices, const Matrix& row_block,
                              const Matrix& corner_block, double diag_add, double row_scale,
                              double block_scale, OpCounters* ops = nullptr);

double frob_dist(const SymMatrix& a, const SymMatrix& b);

// Smallest eigenvalue, via a dense symmetric eigensolver.
double min_eigenvalue(const SymMatrix& a);
double max_eigenvalue(const SymMatrix& a);

}  // namespace msna
