#pragma once

#include "msna/linalg.hpp"
#include "msna/types.hpp"

#include <cstdint>

namespace msna {

// A block of samples: one row of x per sample, matching response in y
// ({0,1} for classification).
struct Batch {
  Matrix x;  // b x d
  Vector y;  // b

  int size() const { return static_cast<int>(x.rows()); }
  int dim() const { return static_cast<int>(x.cols()); }
};

enum class ProblemKind { linear, logistic, ridge_logistic };

// Numerically stable logistic sigmoid.
double sigmoid(double t);
// log(1 + exp(t)) without overflow.
double log1p_exp(double t);

// Mini-batch stochastic oracles for the benchmark objectives. Pure given
// (batch, theta, indices); safe for concurrent use.
class Problem {
 public:
  static Problem linear_regression(int dim);
  static Problem logistic_regression(int dim);
  static Problem ridge_logistic_regression(int dim, double lambda);

  ProblemKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double ridge_lambda() const { return lambda_; }
  bool is_classification() const { return kind_ != ProblemKind::linear; }

  // Mini-batch mean gradient at theta. O(b d).
  Vector gradient(const Batch& batch, const Vector& theta, OpCounters* ops = nullptr) const;

  // The requested rows of the mini-batch mean Hessian at theta, assembled
  // without forming the d x d matrix. O(l b d).
  MaskedHessian hessian_rows(const Batch& batch, const Vector& theta, const IndexList& indices,
                             OpCounters* ops = nullptr) const;

  // Mean loss over the batch (for reporting and the warm-start line search).
  double loss(const Batch& batch, const Vector& theta) const;
  // Classification accuracy at the 0.5 threshold; linear kind returns NaN.
  double accuracy(const Batch& batch, const Vector& theta) const;

 private:
  Problem(ProblemKind kind, int dim, double lambda) : kind_(kind), dim_(dim), lambda_(lambda) {}

  ProblemKind kind_;
  int dim_;
  double lambda_;
};

// Reference inverse Hessian at the optimum for synthetic models with known
// feature covariance. Linear regression: direct inverse of the covariance.
// Logistic regression: inverse of a Monte-Carlo estimate of
// E[sigmoid'(x^T theta*) x x^T] over `mc_samples` fresh draws.
SymMatrix reference_inverse_hessian(ProblemKind kind, const SymMatrix& feature_covariance,
                                    const Vector& theta_star, std::uint64_t mc_seed,
                                    long mc_samples = 1000000, double ridge_lambda = 0.0);

}  // namespace msna
