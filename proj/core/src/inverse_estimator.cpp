#include "msna/inverse_estimator.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace msna {

InverseEstimator::InverseEstimator(int dim, const InverseEstimatorOptions& options,
                                   std::uint64_t seed, std::optional<SymMatrix> init)
    : options_(options),
      estimate_(init ? std::move(*init) : SymMatrix::identity(dim)),
      sampler_(dim, options.block_size, seed) {
  if (estimate_.dim() != dim)
    throw std::invalid_argument("InverseEstimator: initial estimate dimension mismatch");
  if (init && min_eigenvalue(estimate_) <= 0.0)
    throw std::invalid_argument("InverseEstimator: initial estimate must be positive definite");
  if (options_.gain.exponent >= 1.0)
    throw std::invalid_argument("InverseEstimator: gain exponent must be in (1/2, 1)");
  if (options_.averaging_tau) {
    Averaged avg;
    avg.value = estimate_;
    avg.weights = AveragingWeights(*options_.averaging_tau);
    avg.cum_weight = avg.weights(0);
    averaged_ = std::move(avg);
  }
}

IndexList InverseEstimator::sample_mask() { return sampler_.sample(); }

bool InverseEstimator::update(const MaskedHessian& h, OpCounters* ops) {
  if (h.dim != dim()) throw std::invalid_argument("InverseEstimator: dimension mismatch");
  n_ += 1;
  const double gain = options_.gain(n_);
  const double sample_norm = options_.gate_norm == GateNorm::exact
                                 ? masked_op_norm(h, ops)
                                 : masked_frob_norm(h, ops);
  max_sample_norm_ = std::max(max_sample_norm_, sample_norm);
  bool applied = false;
  if (gain * sample_norm <= 0.5) {
    // B holds the nonzero rows of H~ A; the corner block is B restricted to
    // the masked columns times the stored rows, i.e. H~ A H~^T.
    const Matrix b = masked_product(h, estimate_, ops);
    const Matrix corner = b * h.rows.transpose();
    if (ops)
      ops->estimator += static_cast<std::uint64_t>(h.block_size()) *
                        static_cast<std::uint64_t>(h.block_size()) *
                        static_cast<std::uint64_t>(h.dim);
    scatter_symmetric_update(estimate_, h.indices, b, corner,
                             /*diag_add=*/2.0 * gain, /*row_scale=*/-gain,
                             /*block_scale=*/gain * gain, ops);
    applied = true;
  } else {
    ++truncated_;
  }
  if (averaged_) {
    const double w = averaged_->weights(n_);
    averaged_->cum_weight += w;
    if (averaged_->cum_weight <= 0.0) {
      averaged_->value = estimate_;
    } else {
      const double mix = w / averaged_->cum_weight;
      Matrix blended =
          (1.0 - mix) * averaged_->value.dense() + mix * estimate_.dense();
      averaged_->value = SymMatrix::from_dense(blended, 1e-6);
    }
  }
  return applied;
}

const SymMatrix& InverseEstimator::averaged_estimate() const {
  if (!averaged_)
    throw std::logic_error("InverseEstimator: averaging not enabled");
  return averaged_->value;
}

namespace {
constexpr std::uint64_t kSnapshotMagic = 0x4d534e41494e5631ULL;  // "MSNAINV1"
}

void write_estimate_snapshot(std::ostream& out, const SymMatrix& estimate, long iteration) {
  const std::uint64_t header[3] = {kSnapshotMagic, static_cast<std::uint64_t>(estimate.dim()),
                                   static_cast<std::uint64_t>(iteration)};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  const Matrix& m = estimate.dense();
  for (int i = 0; i < estimate.dim(); ++i) {
    for (int j = 0; j < estimate.dim(); ++j) {
      const double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  }
  if (!out) throw std::runtime_error("write_estimate_snapshot: write failed");
}

void write_estimate_snapshot(const std::string& path, const SymMatrix& estimate, long iteration) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_estimate_snapshot: cannot open " + path);
  write_estimate_snapshot(out, estimate, iteration);
}

EstimateSnapshot read_estimate_snapshot(std::istream& in) {
  std::uint64_t header[3] = {0, 0, 0};
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || header[0] != kSnapshotMagic)
    throw std::runtime_error("read_estimate_snapshot: bad header");
  const int d = static_cast<int>(header[1]);
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      m(i, j) = v;
    }
  if (!in) throw std::runtime_error("read_estimate_snapshot: truncated payload");
  EstimateSnapshot snap;
  snap.estimate = SymMatrix::from_dense(m, 1e-6);
  snap.iteration = static_cast<long>(header[2]);
  return snap;
}

EstimateSnapshot read_estimate_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_estimate_snapshot: cannot open " + path);
  return read_estimate_snapshot(in);
}

}  // namespace msna
