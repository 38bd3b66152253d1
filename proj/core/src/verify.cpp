#include "msna/verify.hpp"

#include "msna/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace msna {

DenseReference DenseReference::from_masked(const MaskedHessian& h) {
  DenseReference ref;
  ref.h_embed = Matrix::Zero(h.dim, h.dim);
  ref.m_embed = Matrix::Zero(h.dim, h.dim);
  for (int k = 0; k < h.block_size(); ++k) {
    const int i = h.indices[static_cast<size_t>(k)];
    ref.h_embed.row(i) = h.rows.row(k);
    ref.m_embed(i, i) = 1.0;
  }
  return ref;
}

Matrix dense_reference_update(const Matrix& a, const Matrix& h_embed, const Matrix& m_embed,
                              double gain) {
  if (a.rows() != h_embed.rows() || a.rows() != m_embed.rows())
    throw std::invalid_argument("dense_reference_update: dimension mismatch");
  Eigen::JacobiSVD<Matrix> svd(h_embed);
  const double op_norm = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
  if (gain * op_norm > 0.5) return a;
  return a - gain * (h_embed * a + a * h_embed.transpose() - 2.0 * m_embed) +
         gain * gain * (h_embed * a * h_embed.transpose());
}

Matrix grad_j(const Matrix& h, const Matrix& a) {
  return 2.0 * (h * a - Matrix::Identity(a.rows(), a.cols()));
}

Matrix grad_j_sym(const Matrix& h, const Matrix& a) {
  return h * a + a * h - 2.0 * Matrix::Identity(a.rows(), a.cols());
}

double j_value(const Matrix& h, const Matrix& a) {
  const Matrix h_inv = brute_inverse(SymMatrix::from_dense(h)).dense();
  const Matrix diff = a - h_inv;
  return (diff.transpose() * h * diff).trace();
}

Matrix spd_sqrt(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  Vector lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

SymMatrix brute_inverse(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.dense());
  const Vector lam = es.eigenvalues();
  const double lmin = lam.minCoeff();
  const double lmax = lam.maxCoeff();
  if (!(lmin > 1e-12 * std::max(lmax, 0.0))) {
    std::ostringstream msg;
    msg << "brute_inverse: input not SPD within tolerance (min eigenvalue " << lmin
        << ", max eigenvalue " << lmax << ")";
    throw std::invalid_argument(msg.str());
  }
  Matrix inv = es.eigenvectors() * lam.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  inv = (0.5 * (inv + inv.transpose())).eval();
  const int d = m.dim();
  const double residual = (m.dense() * inv - Matrix::Identity(d, d)).norm();
  if (residual > 1e-8 * d) {
    std::ostringstream msg;
    msg << "brute_inverse: residual " << residual << " exceeds bound for dim " << d
        << " (condition estimate " << lmax / lmin << ")";
    throw std::runtime_error(msg.str());
  }
  return SymMatrix::from_dense(inv);
}

Matrix finite_difference_gradient(const std::function<double(const Matrix&)>& f,
                                  const Matrix& at) {
  Matrix grad(at.rows(), at.cols());
  Matrix probe = at;
  for (int i = 0; i < at.rows(); ++i)
    for (int j = 0; j < at.cols(); ++j) {
      const double h = 1e-5 * (1.0 + std::abs(at(i, j)));
      probe(i, j) = at(i, j) + h;
      const double up = f(probe);
      probe(i, j) = at(i, j) - h;
      const double down = f(probe);
      probe(i, j) = at(i, j);
      grad(i, j) = (up - down) / (2.0 * h);
    }
  return grad;
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f,
                                  const Vector& at, double step_scale) {
  Vector grad(at.size());
  Vector probe = at;
  const double h = step_scale * (1.0 + at.norm());
  for (int i = 0; i < at.size(); ++i) {
    probe(i) = at(i) + h;
    const double up = f(probe);
    probe(i) = at(i) - h;
    const double down = f(probe);
    probe(i) = at(i);
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

bool VerifyReport::all_passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

namespace {

Matrix random_matrix(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = gauss(rng);
  return m;
}

Matrix random_spd(std::mt19937_64& rng, int d, double shift = 0.5) {
  const Matrix g = random_matrix(rng, d);
  return g * g.transpose() / d + shift * Matrix::Identity(d, d);
}

double rel_err(const Matrix& got, const Matrix& want) {
  return (got - want).norm() / std::max(1e-12, want.norm());
}

}  // namespace

VerifyReport run_verify_suite(std::uint64_t seed) {
  VerifyReport report;
  std::mt19937_64 rng(seed);

  auto record = [&report](const std::string& name, bool ok, double worst) {
    std::ostringstream detail;
    detail << "worst deviation " << worst;
    report.checks.push_back({name, ok, detail.str()});
  };

  {  // Closed-form gradients vs central finite differences of J.
    double worst = 0.0;
    bool ok = true;
    for (int trial = 0; trial < 10; ++trial) {
      const int d = 3 + static_cast<int>(rng() % 3);
      const Matrix h = random_spd(rng, d);
      const Matrix a = random_matrix(rng, d);
      const Matrix fd =
          finite_difference_gradient([&h](const Matrix& x) { return j_value(h, x); }, a);
      const double err = rel_err(grad_j(h, a), fd);
      worst = std::max(worst, err);
      ok = ok && err < 1e-6;
    }
    record("grad_j matches finite differences", ok, worst);
  }

  {  // Transpose-composition rule: grad of A -> J(A^T) equals (grad_j(A^T))^T.
    double worst = 0.0;
    bool ok = true;
    for (int trial = 0; trial < 10; ++trial) {
      const int d = 3 + static_cast<int>(rng() % 3);
      const Matrix h = random_spd(rng, d);
      const Matrix a = random_matrix(rng, d);
      const Matrix fd = finite_difference_gradient(
          [&h](const Matrix& x) { return j_value(h, x.transpose()); }, a);
      const Matrix expected = grad_j(h, a.transpose()).transpose();
      const double err = rel_err(expected, fd);
      worst = std::max(worst, err);
      ok = ok && err < 1e-6;
    }
    record("transpose composition rule", ok, worst);
  }

  {  // Adjoint identity <N, A M>_F = <A^T N, M>_F.
    double worst = 0.0;
    bool ok = true;
    for (int trial = 0; trial < 20; ++trial) {
      const int d = 2 + static_cast<int>(rng() % 5);
      const Matrix a = random_matrix(rng, d);
      const Matrix m = random_matrix(rng, d);
      const Matrix n = random_matrix(rng, d);
      const double lhs = (n.transpose() * (a * m)).trace();
      const double rhs = ((a.transpose() * n).transpose() * m).trace();
      const double err = std::abs(lhs - rhs) / std::max(1e-12, std::abs(lhs));
      worst = std::max(worst, err);
      ok = ok && err < 1e-12;
    }
    record("adjoint identity", ok, worst);
  }

  {  // Rayleigh quotient of the quadratic form of J lies in [2 lmin, 2 lmax].
    double worst = 0.0;
    bool ok = true;
    for (int trial = 0; trial < 10; ++trial) {
      const int d = 3 + static_cast<int>(rng() % 3);
      const Matrix h = random_spd(rng, d);
      Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
      const double lo = 2.0 * es.eigenvalues().minCoeff();
      const double hi = 2.0 * es.eigenvalues().maxCoeff();
      Matrix dir = random_matrix(rng, d);
      dir /= dir.norm();
      // J is quadratic: J(A + tD) = J(A) + t <grad, D> + t^2 <H D, D>, so the
      // curvature along D is 2 <H D, D>_F.
      const double quad = 2.0 * (dir.transpose() * h * dir).trace();
      const double slack = 1e-8 * std::max(1.0, hi);
      worst = std::max({worst, lo - quad, quad - hi});
      ok = ok && quad >= lo - slack && quad <= hi + slack;
    }
    record("curvature within strong convexity/smoothness bounds", ok, worst);
  }

  {  // brute_inverse residual self-check on random SPD matrices.
    double worst = 0.0;
    bool ok = true;
    for (int trial = 0; trial < 10; ++trial) {
      const int d = 4 + static_cast<int>(rng() % 5);
      const SymMatrix m = SymMatrix::from_dense(random_spd(rng, d));
      const SymMatrix inv = brute_inverse(m);
      const double residual =
          (m.dense() * inv.dense() - Matrix::Identity(d, d)).norm();
      worst = std::max(worst, residual);
      ok = ok && residual <= 1e-8 * d;
    }
    record("brute_inverse residual bound", ok, worst);
  }

  return report;
}

}  // namespace msna
