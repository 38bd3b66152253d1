#include <doctest.h>

#include "msna/data.hpp"
#include "msna/verify.hpp"

#include <Eigen/Eigenvalues>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

using namespace msna;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_SUITE("data") {

TEST_CASE("orthogonal basis") {
  const SyntheticModel model = SyntheticModel::make(ProblemKind::linear, 12, 0.01, 1.0, 5);
  const Matrix q = model.orthogonal;
  CHECK((q.transpose() * q - Matrix::Identity(12, 12)).norm() <= 1e-10);
  const SymMatrix cov = model.covariance();
  CHECK(min_eigenvalue(cov) == doctest::Approx(0.01).epsilon(1e-8));
  CHECK(max_eigenvalue(cov) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("identity covariance sampling") {
  const int d = 10;
  const SyntheticModel model = SyntheticModel::make(ProblemKind::linear, d, 1.0, 1.0, 7);
  SyntheticStream stream(model, 100000, 1000, 11);
  Matrix acc = Matrix::Zero(d, d);
  long n = 0;
  while (auto batch = stream.next()) {
    acc += batch->x.transpose() * batch->x;
    n += batch->size();
  }
  REQUIRE(n == 100000);
  acc /= static_cast<double>(n);
  CHECK((acc - Matrix::Identity(d, d)).norm() <= 0.05 * Matrix::Identity(d, d).norm());
}

TEST_CASE("logistic labels are balanced at theta* = 0") {
  SyntheticModel model = SyntheticModel::make(ProblemKind::logistic, 4, 1.0, 1.0, 13);
  model.theta_star.setZero();
  SyntheticStream stream(model, 100000, 500, 17);
  double total = 0.0;
  long n = 0;
  while (auto batch = stream.next()) {
    total += batch->y.sum();
    n += batch->size();
  }
  CHECK(total / n == doctest::Approx(0.5).epsilon(0.02));  // 0.5 +- 0.01
}

TEST_CASE("ill-conditioned covariance reaches its condition number") {
  const int d = 10;
  const SyntheticModel model = SyntheticModel::make(ProblemKind::linear, d, 0.01, 1.0, 19);
  SyntheticStream stream(model, 1000000, 10000, 23);
  Matrix acc = Matrix::Zero(d, d);
  long n = 0;
  while (auto batch = stream.next()) {
    acc += batch->x.transpose() * batch->x;
    n += batch->size();
  }
  acc /= static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> es(acc, Eigen::EigenvaluesOnly);
  const double cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
  CHECK(cond == doctest::Approx(100.0).epsilon(0.2));
}

TEST_CASE("batcher block counts") {
  Matrix x = Matrix::Zero(10, 2);
  Vector y(10);
  for (int i = 0; i < 10; ++i) y(i) = i;

  SUBCASE("drop_last discards the ragged tail") {
    MatrixBatcher batcher(x, y, 3, true);
    int batches = 0;
    while (auto b = batcher.next()) {
      CHECK(b->size() == 3);
      ++batches;
    }
    CHECK(batches == 3);
  }
  SUBCASE("single full block") {
    MatrixBatcher batcher(x, y, 10, true);
    int batches = 0;
    while (batcher.next()) ++batches;
    CHECK(batches == 1);
  }
  SUBCASE("keep_last yields the remainder") {
    MatrixBatcher batcher(x, y, 3, false);
    std::vector<int> sizes;
    while (auto b = batcher.next()) sizes.push_back(b->size());
    CHECK(sizes == std::vector<int>{3, 3, 3, 1});
  }
  SUBCASE("single pass never revisits an index") {
    MatrixBatcher batcher(x, y, 3, false);
    std::set<int> seen;
    while (auto b = batcher.next())
      for (int i = 0; i < b->size(); ++i) {
        const int label = static_cast<int>(b->y(i));
        CHECK(seen.insert(label).second);
      }
    CHECK(seen.size() == 10);
  }
}

TEST_CASE("stream yields samples/batch iterations") {
  const SyntheticModel model = SyntheticModel::make(ProblemKind::linear, 100, 1.0, 1.0, 29);
  SyntheticStream stream(model, 10000, 100, 31);
  long iterations = 0;
  while (stream.next()) ++iterations;
  CHECK(iterations == 100);
}

TEST_CASE("csv loading, split determinism and caps") {
  TempFile file("msna_tiny.csv");
  {
    std::ofstream out(file.path);
    out << "0.5,1.0,0\n0.1,2.0,1\n0.9,0.5,1\n0.3,0.7,0\n0.2,0.1,1\n";
  }
  DatasetOptions options;
  options.standardize = false;
  options.intercept = false;
  const DatasetSplit a = load_dataset(file.path, options, 99);
  const DatasetSplit b = load_dataset(file.path, options, 99);
  CHECK(a.train_size() + a.init_size() + a.test_size() == 5);
  CHECK(a.train_size() == b.train_size());
  CHECK((a.train_x - b.train_x).norm() == 0.0);
  CHECK((a.test_y - b.test_y).norm() == 0.0);
  const DatasetSplit c = load_dataset(file.path, options, 100);
  CHECK(c.train_size() + c.init_size() + c.test_size() == 5);
}

TEST_CASE("libsvm parsing") {
  TempFile file("msna_tiny.libsvm");
  {
    std::ofstream out(file.path);
    for (int i = 0; i < 12; ++i) out << (i % 2) << " 1:0.5 3:2.0\n";
  }
  DatasetOptions options;
  options.format = DatasetFormat::libsvm;
  options.dim = 3;
  options.standardize = false;
  options.intercept = false;
  options.test_fraction = 0.25;
  const DatasetSplit split = load_dataset(file.path, options, 1);
  REQUIRE(split.dim() == 3);
  for (long i = 0; i < split.train_size(); ++i) {
    CHECK(split.train_x(i, 0) == doctest::Approx(0.5));
    CHECK(split.train_x(i, 1) == 0.0);
    CHECK(split.train_x(i, 2) == doctest::Approx(2.0));
  }
}

TEST_CASE("malformed input reports the line") {
  TempFile file("msna_bad.csv");
  {
    std::ofstream out(file.path);
    out << "0.5,1.0,0\n0.1,2.0\n";
  }
  DatasetOptions options;
  try {
    load_dataset(file.path, options, 1);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  TempFile labels("msna_badlabel.csv");
  {
    std::ofstream out(labels.path);
    out << "0.5,1.0,7\n";
  }
  CHECK_THROWS_AS(load_dataset(labels.path, options, 1), std::runtime_error);
}

TEST_CASE("one-hot, standardization and intercept") {
  TempFile file("msna_cat.csv");
  {
    std::ofstream out(file.path);
    // 40 rows, one numeric and one categorical column with values a/b/c.
    std::mt19937_64 rng(7);
    const char* cats = "abc";
    for (int i = 0; i < 40; ++i) {
      out << (static_cast<double>(rng() % 100) / 10.0) << "," << cats[i % 3] << ","
          << (i % 2) << "\n";
    }
  }
  DatasetOptions options;
  options.test_fraction = 0.2;
  const DatasetSplit split = load_dataset(file.path, options, 3);
  // numeric + three indicators + intercept
  REQUIRE(split.dim() == 5);
  // Standardized numeric column: mean ~0, sd ~1 over train+init.
  Vector fit(split.train_size() + split.init_size());
  fit << split.train_x.col(0), split.init_x.col(0);
  CHECK(std::abs(fit.mean()) <= 1e-10);
  CHECK(std::abs(fit.squaredNorm() / fit.size() - 1.0) <= 1e-10);
  // Indicator columns stay 0/1 and each row selects exactly one category.
  for (long i = 0; i < split.train_size(); ++i) {
    const double row_sum = split.train_x(i, 1) + split.train_x(i, 2) + split.train_x(i, 3);
    CHECK(row_sum == doctest::Approx(1.0));
    CHECK(split.train_x(i, 4) == 1.0);  // intercept
  }
}

TEST_CASE("table-style split sizes on a mushrooms-sized corpus") {
  TempFile file("msna_mushrooms.csv");
  {
    std::ofstream out(file.path);
    std::mt19937_64 rng(11);
    // 8124 rows, 94 features + intercept gives d = 95.
    for (int i = 0; i < 8124; ++i) {
      for (int j = 0; j < 94; ++j) out << (static_cast<double>(rng() % 1000) / 500.0) << ",";
      out << (i % 2) << "\n";
    }
  }
  DatasetOptions options;
  options.test_fraction = 0.2;
  options.init_fraction = 0.01;
  const DatasetSplit split = load_dataset(file.path, options, 17);
  CHECK(split.dim() == 95);
  CHECK(split.train_size() + split.init_size() + split.test_size() == 8124);
  CHECK(std::abs(split.train_size() - 6309) <= 1);
  CHECK(std::abs(split.init_size() - 190) <= 1);
  CHECK(std::abs(split.test_size() - 1625) <= 1);
}

}  // TEST_SUITE
