#include "msna/problems.hpp"

#include "msna/rng.hpp"
#include "msna/verify.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace msna {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double log1p_exp(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

Problem Problem::linear_regression(int dim) { return Problem(ProblemKind::linear, dim, 0.0); }

Problem Problem::logistic_regression(int dim) { return Problem(ProblemKind::logistic, dim, 0.0); }

Problem Problem::ridge_logistic_regression(int dim, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("Problem: ridge lambda must be >= 0");
  return Problem(ProblemKind::ridge_logistic, dim, lambda);
}

Vector Problem::gradient(const Batch& batch, const Vector& theta, OpCounters* ops) const {
  if (batch.dim() != dim_ || theta.size() != dim_)
    throw std::invalid_argument("Problem::gradient: dimension mismatch");
  const int b = batch.size();
  const Vector margins = batch.x * theta;  // b
  Vector residual(b);
  if (kind_ == ProblemKind::linear) {
    residual = margins - batch.y;
  } else {
    for (int i = 0; i < b; ++i) residual(i) = sigmoid(margins(i)) - batch.y(i);
  }
  Vector g = batch.x.transpose() * residual / b;
  if (kind_ == ProblemKind::ridge_logistic) g += lambda_ * theta;
  if (ops)
    ops->gradient += 2ULL * static_cast<std::uint64_t>(b) * static_cast<std::uint64_t>(dim_);
  return g;
}

MaskedHessian Problem::hessian_rows(const Batch& batch, const Vector& theta,
                                    const IndexList& indices, OpCounters* ops) const {
  if (batch.dim() != dim_ || theta.size() != dim_)
    throw std::invalid_argument("Problem::hessian_rows: dimension mismatch");
  const int b = batch.size();
  const int l = static_cast<int>(indices.size());

  MaskedHessian h;
  h.dim = dim_;
  h.indices = indices;

  // Row I[k] of the mean Hessian is (1/b) sum_i w_i x_i[I[k]] x_i, with
  // w_i = 1 (linear) or sigmoid'(x_i^T theta) (logistic).
  Vector weights;
  if (kind_ == ProblemKind::linear) {
    weights = Vector::Ones(b);
  } else {
    const Vector margins = batch.x * theta;
    weights.resize(b);
    for (int i = 0; i < b; ++i) {
      const double s = sigmoid(margins(i));
      weights(i) = s * (1.0 - s);
    }
  }
  Matrix masked_cols(b, l);  // column k holds w_i * x_i[I[k]]
  for (int k = 0; k < l; ++k)
    masked_cols.col(k) = weights.cwiseProduct(batch.x.col(indices[static_cast<size_t>(k)]));
  h.rows = masked_cols.transpose() * batch.x / b;
  if (kind_ == ProblemKind::ridge_logistic)
    for (int k = 0; k < l; ++k) h.rows(k, indices[static_cast<size_t>(k)]) += lambda_;
  if (ops) {
    std::uint64_t cost = static_cast<std::uint64_t>(l) * static_cast<std::uint64_t>(b) *
                         static_cast<std::uint64_t>(dim_);
    if (kind_ != ProblemKind::linear)
      cost += static_cast<std::uint64_t>(b) * static_cast<std::uint64_t>(dim_);
    ops->hessian_rows += cost;
  }
  return h;
}

double Problem::loss(const Batch& batch, const Vector& theta) const {
  const int b = batch.size();
  const Vector margins = batch.x * theta;
  double total = 0.0;
  if (kind_ == ProblemKind::linear) {
    for (int i = 0; i < b; ++i) {
      const double r = batch.y(i) - margins(i);
      total += 0.5 * r * r;
    }
  } else {
    for (int i = 0; i < b; ++i) total += log1p_exp(margins(i)) - batch.y(i) * margins(i);
  }
  double mean = total / b;
  if (kind_ == ProblemKind::ridge_logistic) mean += 0.5 * lambda_ * theta.squaredNorm();
  return mean;
}

double Problem::accuracy(const Batch& batch, const Vector& theta) const {
  if (!is_classification()) return std::numeric_limits<double>::quiet_NaN();
  const int b = batch.size();
  const Vector margins = batch.x * theta;
  int correct = 0;
  for (int i = 0; i < b; ++i) {
    const int predicted = margins(i) > 0.0 ? 1 : 0;
    if (predicted == static_cast<int>(batch.y(i) > 0.5)) ++correct;
  }
  return static_cast<double>(correct) / b;
}

SymMatrix reference_inverse_hessian(ProblemKind kind, const SymMatrix& feature_covariance,
                                    const Vector& theta_star, std::uint64_t mc_seed,
                                    long mc_samples, double ridge_lambda) {
  const int d = feature_covariance.dim();
  if (kind == ProblemKind::linear) return brute_inverse(feature_covariance);

  // Monte-Carlo estimate of E[sigmoid'(x^T theta*) x x^T] for x drawn from
  // N(0, feature_covariance).
  if (theta_star.size() != d)
    throw std::invalid_argument("reference_inverse_hessian: theta* dimension mismatch");
  const Matrix transform = spd_sqrt(feature_covariance.dense());
  std::mt19937_64 rng(mc_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix acc = Matrix::Zero(d, d);
  Vector z(d);
  const int chunk = 1024;
  Matrix xs(chunk, d);
  long done = 0;
  while (done < mc_samples) {
    const int take = static_cast<int>(std::min<long>(chunk, mc_samples - done));
    for (int i = 0; i < take; ++i) {
      for (int j = 0; j < d; ++j) z(j) = gauss(rng);
      xs.row(i) = (transform * z).transpose();
    }
    const Vector margins = xs.topRows(take) * theta_star;
    Vector w(take);
    for (int i = 0; i < take; ++i) {
      const double s = sigmoid(margins(i));
      w(i) = s * (1.0 - s);
    }
    acc.noalias() += xs.topRows(take).transpose() * w.asDiagonal() * xs.topRows(take);
    done += take;
  }
  Matrix hess = acc / static_cast<double>(mc_samples);
  if (kind == ProblemKind::ridge_logistic) hess += ridge_lambda * Matrix::Identity(d, d);
  return brute_inverse(SymMatrix::from_dense(hess, 1e-6));
}

}  // namespace msna
