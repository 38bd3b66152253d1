#include "msna/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <stdexcept>

namespace msna {

SymMatrix SymMatrix::identity(int dim) {
  SymMatrix s;
  s.m_ = Matrix::Identity(dim, dim);
  return s;
}

SymMatrix SymMatrix::from_dense(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) throw std::invalid_argument("SymMatrix: input not square");
  const double asym = (m - m.transpose()).norm();
  if (asym > tol * (1.0 + m.norm()))
    throw std::invalid_argument("SymMatrix: input not symmetric within tolerance");
  SymMatrix s;
  s.m_ = 0.5 * (m + m.transpose());
  return s;
}

MaskSampler::MaskSampler(int dim, int block_size, std::uint64_t seed)
    : dim_(dim), block_(block_size), rng_(seed), pool_(static_cast<size_t>(dim)) {
  if (dim < 1) throw std::invalid_argument("MaskSampler: dim must be >= 1");
  if (block_size < 1 || block_size > dim)
    throw std::invalid_argument("MaskSampler: block size must be in [1, dim]");
  for (int i = 0; i < dim; ++i) pool_[static_cast<size_t>(i)] = i;
}

IndexList MaskSampler::sample() {
  // Partial Fisher-Yates: the first `block_` slots end up holding a uniform
  // l-subset. The pool persists; only the prefix is reshuffled each draw.
  for (int k = 0; k < block_; ++k) {
    std::uniform_int_distribution<int> pick(k, dim_ - 1);
    std::swap(pool_[static_cast<size_t>(k)], pool_[static_cast<size_t>(pick(rng_))]);
  }
  IndexList out(pool_.begin(), pool_.begin() + block_);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

void check_masked(const MaskedHessian& h) {
  const int l = h.block_size();
  if (l < 1 || l > h.dim) throw std::invalid_argument("MaskedHessian: bad block size");
  if (h.rows.rows() != l || h.rows.cols() != h.dim)
    throw std::invalid_argument("MaskedHessian: row block shape mismatch");
  for (int k = 0; k < l; ++k) {
    if (h.indices[static_cast<size_t>(k)] < 0 || h.indices[static_cast<size_t>(k)] >= h.dim)
      throw std::invalid_argument("MaskedHessian: index out of range");
    if (k > 0 && h.indices[static_cast<size_t>(k)] <= h.indices[static_cast<size_t>(k - 1)])
      throw std::invalid_argument("MaskedHessian: indices not strictly increasing");
  }
}

double largest_eigenvalue_psd(const Matrix& g) {
  const int l = static_cast<int>(g.rows());
  if (l <= 64) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  }
  // Power iteration on the PSD Gram matrix.
  Vector v = Vector::Ones(l) / std::sqrt(static_cast<double>(l));
  double lambda = 0.0;
  for (int it = 0; it < 10 * l; ++it) {
    Vector w = g * v;
    const double nrm = w.norm();
    if (nrm == 0.0) return 0.0;
    w /= nrm;
    const double next = w.dot(g * w);
    if (std::abs(next - lambda) <= 1e-10 * std::max(1.0, std::abs(next))) return next;
    lambda = next;
    v = w;
  }
  return lambda;
}

}  // namespace

double masked_op_norm(const MaskedHessian& h, OpCounters* ops) {
  check_masked(h);
  const auto l = static_cast<std::uint64_t>(h.block_size());
  const auto d = static_cast<std::uint64_t>(h.dim);
  if (ops) ops->estimator += l * l * d + l * l * l;
  Matrix gram = h.rows * h.rows.transpose();
  if (gram.norm() == 0.0) return 0.0;
  const double lmax = largest_eigenvalue_psd(gram);
  return std::sqrt(std::max(0.0, lmax));
}

double masked_frob_norm(const MaskedHessian& h, OpCounters* ops) {
  check_masked(h);
  if (ops) ops->estimator += static_cast<std::uint64_t>(h.block_size()) *
                             static_cast<std::uint64_t>(h.dim);
  return h.rows.norm();
}

Matrix masked_product(const MaskedHessian& h, const SymMatrix& a, OpCounters* ops) {
  check_masked(h);
  if (a.dim() != h.dim) throw std::invalid_argument("masked_product: dimension mismatch");
  const auto l = static_cast<std::uint64_t>(h.block_size());
  const auto d = static_cast<std::uint64_t>(h.dim);
  if (ops) ops->estimator += l * d * d;
  return h.rows * a.dense();
}

void scatter_symmetric_update(SymMatrix& a, const IndexList& indices, const Matrix& row_block,
                              const Matrix& corner_block, double diag_add, double row_scale,
                              double block_scale, OpCounters* ops) {
  const int d = a.dim();
  const int l = static_cast<int>(indices.size());
  if (row_block.rows() != l || row_block.cols() != d)
    throw std::invalid_argument("scatter_symmetric_update: row block shape mismatch");
  if (corner_block.rows() != l || corner_block.cols() != l)
    throw std::invalid_argument("scatter_symmetric_update: corner block shape mismatch");
  for (int k = 0; k < l; ++k) {
    const int i = indices[static_cast<size_t>(k)];
    if (i < 0 || i >= d) throw std::invalid_argument("scatter_symmetric_update: index out of range");
    if (k > 0 && i <= indices[static_cast<size_t>(k - 1)])
      throw std::invalid_argument("scatter_symmetric_update: indices not strictly increasing");
  }

  Matrix& m = a.m_;
  for (int k = 0; k < l; ++k) {
    const int i = indices[static_cast<size_t>(k)];
    m.row(i) += row_scale * row_block.row(k);
    m.col(i) += row_scale * row_block.row(k).transpose();
  }
  for (int j = 0; j < l; ++j)
    for (int k = 0; k < l; ++k)
      m(indices[static_cast<size_t>(j)], indices[static_cast<size_t>(k)]) +=
          block_scale * corner_block(j, k);
  if (diag_add != 0.0)
    for (int k = 0; k < l; ++k) {
      const int i = indices[static_cast<size_t>(k)];
      m(i, i) += diag_add;
    }

  if (ops) {
    const auto ld = static_cast<std::uint64_t>(l) * static_cast<std::uint64_t>(d);
    const auto ll = static_cast<std::uint64_t>(l) * static_cast<std::uint64_t>(l);
    ops->estimator += 2 * ld + ll;
    // Unique entries touched: rows I plus columns I.
    ops->estimate_entries += 2 * ld - ll;
  }
}

double frob_dist(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("frob_dist: dimension mismatch");
  return (a.dense() - b.dense()).norm();
}

double min_eigenvalue(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.dense(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.dense(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace msna
