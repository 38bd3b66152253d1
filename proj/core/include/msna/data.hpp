#pragma once

#include "msna/linalg.hpp"
#include "msna/problems.hpp"
#include "msna/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace msna {

// Synthetic regression model: features x ~ N(0, Sigma) with
// Sigma = U Lambda U^T, eigenvalues evenly spaced in [eigen_min, eigen_max]
// and U a Haar-random orthogonal matrix. Responses follow the model kind:
// y = x^T theta* + N(0, noise_sigma^2) for linear, y ~ Bernoulli(sigmoid(x^T theta*))
// for logistic.
struct SyntheticModel {
  int dim = 0;
  double eigen_min = 1.0;
  double eigen_max = 1.0;
  Matrix orthogonal;   // U, d x d
  Vector theta_star;   // d
  double noise_sigma = 1.0;
  ProblemKind kind = ProblemKind::linear;

  static SyntheticModel make(ProblemKind kind, int dim, double eigen_min, double eigen_max,
                             std::uint64_t seed, double noise_sigma = 1.0);

  Vector eigenvalues() const;     // evenly spaced, length dim
  SymMatrix covariance() const;   // U Lambda U^T
  Matrix sample_transform() const;  // U Lambda^{1/2}; x = transform * z, z ~ N(0, I)
};

// Single-pass batch source. next() yields consecutive disjoint blocks until
// the source is exhausted.
class BatchStream {
 public:
  virtual ~BatchStream() = default;
  virtual std::optional<Batch> next() = 0;
  virtual int batch_size() const = 0;
};

// Streams i.i.d. batches from a synthetic model, bounded by a total sample
// budget. With drop_last, a final partial block is discarded.
class SyntheticStream : public BatchStream {
 public:
  SyntheticStream(const SyntheticModel& model, long total_samples, int batch_size,
                  std::uint64_t seed, bool drop_last = true);

  std::optional<Batch> next() override;
  int batch_size() const override { return batch_; }

  // Fresh i.i.d. batch outside the budget (held-out evaluation data).
  Batch draw(int n);

 private:
  const SyntheticModel* model_;
  Matrix transform_;
  long remaining_;
  int batch_;
  bool drop_last_;
  std::mt19937_64 rng_;
};

// Single pass over an in-memory dataset in consecutive disjoint blocks.
// Never revisits an index.
class MatrixBatcher : public BatchStream {
 public:
  MatrixBatcher(const Matrix& x, const Vector& y, int batch_size, bool drop_last = true);

  std::optional<Batch> next() override;
  int batch_size() const override { return batch_; }

 private:
  const Matrix* x_;
  const Vector* y_;
  int batch_;
  bool drop_last_;
  long pos_ = 0;
};

enum class DatasetFormat { csv, libsvm };

struct DatasetOptions {
  DatasetFormat format = DatasetFormat::csv;
  int label_column = -1;    // csv only; -1 means last column
  bool has_header = false;  // csv only
  bool standardize = true;  // z-score numeric columns, train+init statistics only
  bool intercept = true;    // append a constant 1 feature
  double test_fraction = 0.2;
  double init_fraction = 0.01;  // of the non-test rows; floored at 2 * dim
  std::optional<int> dim;       // libsvm: force feature count
};

// Preprocessed corpus with disjoint train/init/test index ranges.
struct DatasetSplit {
  std::string name;
  Matrix train_x;
  Vector train_y;
  Matrix init_x;
  Vector init_y;
  Matrix test_x;
  Vector test_y;

  int dim() const { return static_cast<int>(train_x.cols()); }
  long train_size() const { return train_x.rows(); }
  long init_size() const { return init_x.rows(); }
  long test_size() const { return test_x.rows(); }
};

// Parses, preprocesses (one-hot for non-numeric CSV columns, optional
// standardization, optional intercept) and splits a corpus by shuffled
// indices: test first, then the init block (at least 2*dim rows), the rest
// is training data.
DatasetSplit load_dataset(const std::string& path, const DatasetOptions& options,
                          std::uint64_t seed);

}  // namespace msna
