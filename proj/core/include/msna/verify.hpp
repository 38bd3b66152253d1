#pragma once

#include "msna/linalg.hpp"
#include "msna/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace msna {

// Reference quantities computed the literal, dense O(d^3) way. These back
// the test suites and `bench verify`; they never share code with the masked
// update path they are used to check.

// Embeds a masked Hessian into its dense d x d form (rows outside the index
// set are zero) together with the matching 0/1 diagonal projection.
struct DenseReference {
  Matrix h_embed;  // d x d, nonzero only at rows I
  Matrix m_embed;  // d x d diagonal, ones exactly at I

  static DenseReference from_masked(const MaskedHessian& h);
};

// One full estimate update evaluated densely, truncation gate included:
//   A - 1{gain * ||H~||_op <= 1/2} * (gain (H~ A + A H~^T - 2 M) - gain^2 H~ A H~^T).
Matrix dense_reference_update(const Matrix& a, const Matrix& h_embed, const Matrix& m_embed,
                              double gain);

// Closed-form gradients of the inverse-estimation functionals:
//   grad_j:     2 (H A - I)
//   grad_j_sym: H A + A H - 2 I
Matrix grad_j(const Matrix& h, const Matrix& a);
Matrix grad_j_sym(const Matrix& h, const Matrix& a);

// J(A) = ||H^{1/2} (A - H^{-1})||_F^2, evaluated as tr((A - H^{-1})^T H (A - H^{-1})).
double j_value(const Matrix& h, const Matrix& a);

// Symmetric PSD square root via eigendecomposition, eigenvalues clamped at 0.
Matrix spd_sqrt(const Matrix& h);

// Inverse of an SPD matrix via symmetric eigendecomposition. Rejects inputs
// with min eigenvalue <= 1e-12 * max eigenvalue (conditioning reported in the
// error message) and enforces the residual bound ||M M^{-1} - I||_F <= 1e-8 d.
SymMatrix brute_inverse(const SymMatrix& m);

// Central finite differences of a scalar function of a matrix, entry by
// entry, with per-entry step 1e-5 * (1 + |entry|).
Matrix finite_difference_gradient(const std::function<double(const Matrix&)>& f,
                                  const Matrix& at);
// Same for a scalar function of a vector.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f,
                                  const Vector& at, double step_scale = 1e-5);

// Self-check report exposed through `bench verify`.
struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_passed() const;
};

VerifyReport run_verify_suite(std::uint64_t seed);

}  // namespace msna
