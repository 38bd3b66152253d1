#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace msna {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexList = std::vector<int>;

// Multiply/write counters used by the bench harness for complexity
// accounting. One instance per run; each kernel adds to the field named
// after the stage it belongs to.
struct OpCounters {
  std::uint64_t gradient = 0;      // gradient oracle
  std::uint64_t hessian_rows = 0;  // masked Hessian row assembly
  std::uint64_t estimator = 0;     // inverse-estimate update (products, norm, scatter)
  std::uint64_t step = 0;          // parameter update
  std::uint64_t estimate_entries = 0;  // entries written into the inverse estimate

  std::uint64_t total_multiplies() const {
    return gradient + hessian_rows + estimator + step;
  }
  std::uint64_t estimate_bytes() const { return estimate_entries * sizeof(double); }

  OpCounters& operator+=(const OpCounters& o) {
    gradient += o.gradient;
    hessian_rows += o.hessian_rows;
    estimator += o.estimator;
    step += o.step;
    estimate_entries += o.estimate_entries;
    return *this;
  }
};

}  // namespace msna
