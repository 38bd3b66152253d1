#include "msna/data.hpp"

#include "msna/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace msna {

SyntheticModel SyntheticModel::make(ProblemKind kind, int dim, double eigen_min,
                                    double eigen_max, std::uint64_t seed, double noise_sigma) {
  if (dim < 1) throw std::invalid_argument("SyntheticModel: dim must be >= 1");
  if (!(eigen_min > 0.0 && eigen_max >= eigen_min))
    throw std::invalid_argument("SyntheticModel: need 0 < eigen_min <= eigen_max");
  SyntheticModel model;
  model.dim = dim;
  model.eigen_min = eigen_min;
  model.eigen_max = eigen_max;
  model.noise_sigma = noise_sigma;
  model.kind = kind;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Haar-random orthogonal U: QR of a Gaussian matrix with the R diagonal
  // sign fixed.
  Matrix g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  model.orthogonal = q;

  model.theta_star.resize(dim);
  for (int i = 0; i < dim; ++i) model.theta_star(i) = gauss(rng);
  return model;
}

Vector SyntheticModel::eigenvalues() const {
  Vector lam(dim);
  if (dim == 1) {
    lam(0) = eigen_max;
    return lam;
  }
  const double step = (eigen_max - eigen_min) / (dim - 1);
  for (int i = 0; i < dim; ++i) lam(i) = eigen_min + step * i;
  return lam;
}

SymMatrix SyntheticModel::covariance() const {
  const Matrix cov =
      orthogonal * eigenvalues().asDiagonal() * orthogonal.transpose();
  return SymMatrix::from_dense(cov, 1e-8);
}

Matrix SyntheticModel::sample_transform() const {
  return orthogonal * eigenvalues().cwiseSqrt().asDiagonal();
}

SyntheticStream::SyntheticStream(const SyntheticModel& model, long total_samples, int batch_size,
                                 std::uint64_t seed, bool drop_last)
    : model_(&model),
      transform_(model.sample_transform()),
      remaining_(total_samples),
      batch_(batch_size),
      drop_last_(drop_last),
      rng_(seed) {
  if (batch_size < 1) throw std::invalid_argument("SyntheticStream: batch size must be >= 1");
}

Batch SyntheticStream::draw(int n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Batch batch;
  batch.x.resize(n, model_->dim);
  batch.y.resize(n);
  Vector z(model_->dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < model_->dim; ++j) z(j) = gauss(rng_);
    batch.x.row(i) = (transform_ * z).transpose();
    const double margin = batch.x.row(i).dot(model_->theta_star);
    if (model_->kind == ProblemKind::linear) {
      batch.y(i) = margin + model_->noise_sigma * gauss(rng_);
    } else {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      batch.y(i) = unif(rng_) < sigmoid(margin) ? 1.0 : 0.0;
    }
  }
  return batch;
}

std::optional<Batch> SyntheticStream::next() {
  if (remaining_ <= 0) return std::nullopt;
  int take = batch_;
  if (remaining_ < batch_) {
    if (drop_last_) {
      remaining_ = 0;
      return std::nullopt;
    }
    take = static_cast<int>(remaining_);
  }
  remaining_ -= take;
  return draw(take);
}

MatrixBatcher::MatrixBatcher(const Matrix& x, const Vector& y, int batch_size, bool drop_last)
    : x_(&x), y_(&y), batch_(batch_size), drop_last_(drop_last) {
  if (batch_size < 1) throw std::invalid_argument("MatrixBatcher: batch size must be >= 1");
  if (x.rows() != y.size()) throw std::invalid_argument("MatrixBatcher: x/y size mismatch");
}

std::optional<Batch> MatrixBatcher::next() {
  const long total = x_->rows();
  if (pos_ >= total) return std::nullopt;
  long take = std::min<long>(batch_, total - pos_);
  if (take < batch_ && drop_last_) {
    pos_ = total;
    return std::nullopt;
  }
  Batch batch;
  batch.x = x_->middleRows(pos_, take);
  batch.y = y_->segment(pos_, take);
  pos_ += take;
  return batch;
}

namespace {

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin != end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
  while (end != begin && std::isspace(static_cast<unsigned char>(end[-1]))) --end;
  if (begin == end) return false;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

double parse_label(const std::string& raw, long line_no) {
  double v = 0.0;
  if (!parse_double(raw, v))
    throw std::runtime_error("load_dataset: non-numeric label at line " + std::to_string(line_no));
  if (v == 0.0 || v == 1.0) return v;
  if (v == -1.0) return 0.0;  // libsvm convention
  throw std::runtime_error("load_dataset: unknown label value '" + raw + "' at line " +
                           std::to_string(line_no));
}

struct RawTable {
  std::vector<std::vector<std::string>> cells;  // feature fields per row
  std::vector<double> labels;
};

RawTable read_csv(const std::string& path, const DatasetOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  RawTable table;
  std::string line;
  long line_no = 0;
  size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && options.has_header) continue;
    auto fields = split_csv_line(line);
    if (width == 0) {
      width = fields.size();
      if (width < 2)
        throw std::runtime_error("load_dataset: need at least one feature and a label at line " +
                                 std::to_string(line_no));
    } else if (fields.size() != width) {
      throw std::runtime_error("load_dataset: ragged row at line " + std::to_string(line_no));
    }
    int label_col = options.label_column < 0 ? static_cast<int>(width) - 1 : options.label_column;
    if (label_col >= static_cast<int>(width))
      throw std::runtime_error("load_dataset: label column out of range");
    table.labels.push_back(parse_label(fields[static_cast<size_t>(label_col)], line_no));
    std::vector<std::string> features;
    features.reserve(width - 1);
    for (size_t j = 0; j < width; ++j)
      if (static_cast<int>(j) != label_col) features.push_back(fields[j]);
    table.cells.push_back(std::move(features));
  }
  if (table.cells.empty()) throw std::runtime_error("load_dataset: empty corpus " + path);
  return table;
}

// Expands non-numeric columns into one indicator per distinct value
// (lexicographic order for determinism).
Matrix encode_features(const RawTable& table) {
  const size_t rows = table.cells.size();
  const size_t cols = table.cells.front().size();

  std::vector<bool> numeric(cols, true);
  for (size_t j = 0; j < cols && rows > 0; ++j) {
    for (size_t i = 0; i < rows; ++i) {
      double v;
      if (!parse_double(table.cells[i][j], v)) {
        numeric[j] = false;
        break;
      }
    }
  }

  std::vector<std::map<std::string, int>> categories(cols);
  size_t out_cols = 0;
  for (size_t j = 0; j < cols; ++j) {
    if (numeric[j]) {
      ++out_cols;
      continue;
    }
    auto& cat = categories[j];
    for (size_t i = 0; i < rows; ++i) cat.emplace(table.cells[i][j], 0);
    int next = 0;
    for (auto& [key, idx] : cat) idx = next++;
    out_cols += cat.size();
  }

  Matrix x = Matrix::Zero(static_cast<long>(rows), static_cast<long>(out_cols));
  for (size_t i = 0; i < rows; ++i) {
    long col = 0;
    for (size_t j = 0; j < cols; ++j) {
      if (numeric[j]) {
        double v;
        parse_double(table.cells[i][j], v);
        x(static_cast<long>(i), col++) = v;
      } else {
        const auto& cat = categories[j];
        x(static_cast<long>(i), col + cat.at(table.cells[i][j])) = 1.0;
        col += static_cast<long>(cat.size());
      }
    }
  }
  return x;
}

void read_libsvm(const std::string& path, const DatasetOptions& options, Matrix& x, Vector& y) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::vector<std::vector<std::pair<int, double>>> rows;
  std::vector<double> labels;
  std::string line;
  long line_no = 0;
  int max_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token))
      throw std::runtime_error("load_dataset: malformed row at line " + std::to_string(line_no));
    labels.push_back(parse_label(token, line_no));
    std::vector<std::pair<int, double>> entries;
    while (ls >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos)
        throw std::runtime_error("load_dataset: malformed feature '" + token + "' at line " +
                                 std::to_string(line_no));
      int index = 0;
      double value = 0.0;
      try {
        index = std::stoi(token.substr(0, colon));
      } catch (...) {
        throw std::runtime_error("load_dataset: bad feature index at line " +
                                 std::to_string(line_no));
      }
      if (!parse_double(token.substr(colon + 1), value))
        throw std::runtime_error("load_dataset: bad feature value at line " +
                                 std::to_string(line_no));
      if (index < 1)
        throw std::runtime_error("load_dataset: libsvm indices are 1-based, got " +
                                 std::to_string(index) + " at line " + std::to_string(line_no));
      max_index = std::max(max_index, index);
      entries.emplace_back(index - 1, value);
    }
    rows.push_back(std::move(entries));
  }
  if (rows.empty()) throw std::runtime_error("load_dataset: empty corpus " + path);
  const int dim = options.dim.value_or(max_index);
  if (dim < max_index)
    throw std::runtime_error("load_dataset: configured dim smaller than max feature index");
  x = Matrix::Zero(static_cast<long>(rows.size()), dim);
  y.resize(static_cast<long>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    y(static_cast<long>(i)) = labels[i];
    for (const auto& [j, v] : rows[i]) x(static_cast<long>(i), j) = v;
  }
}

Matrix take_rows(const Matrix& x, const std::vector<long>& order, long begin, long count) {
  Matrix out(count, x.cols());
  for (long i = 0; i < count; ++i) out.row(i) = x.row(order[static_cast<size_t>(begin + i)]);
  return out;
}

Vector take_rows(const Vector& y, const std::vector<long>& order, long begin, long count) {
  Vector out(count);
  for (long i = 0; i < count; ++i) out(i) = y(order[static_cast<size_t>(begin + i)]);
  return out;
}

}  // namespace

DatasetSplit load_dataset(const std::string& path, const DatasetOptions& options,
                          std::uint64_t seed) {
  Matrix x;
  Vector y;
  if (options.format == DatasetFormat::csv) {
    const RawTable table = read_csv(path, options);
    x = encode_features(table);
    y = Eigen::Map<const Vector>(table.labels.data(), static_cast<long>(table.labels.size()));
  } else {
    read_libsvm(path, options, x, y);
  }

  const long total = x.rows();
  const long dim_no_intercept = x.cols();
  const long dim = dim_no_intercept + (options.intercept ? 1 : 0);

  std::vector<long> order(static_cast<size_t>(total));
  std::iota(order.begin(), order.end(), 0L);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  long n_test = std::llround(options.test_fraction * static_cast<double>(total));
  n_test = std::clamp<long>(n_test, 0, total - 1);
  const long remaining = total - n_test;
  long n_init = std::max<long>(static_cast<long>(options.init_fraction * remaining), 2 * dim);
  n_init = std::min(n_init, remaining / 2);
  const long n_train = remaining - n_init;

  DatasetSplit split;
  split.name = path;
  split.test_x = take_rows(x, order, 0, n_test);
  split.test_y = take_rows(y, order, 0, n_test);
  split.init_x = take_rows(x, order, n_test, n_init);
  split.init_y = take_rows(y, order, n_test, n_init);
  split.train_x = take_rows(x, order, n_test + n_init, n_train);
  split.train_y = take_rows(y, order, n_test + n_init, n_train);

  if (options.standardize) {
    // Statistics from train+init rows only; binary indicator columns are
    // left untouched.
    const long n_fit = n_train + n_init;
    for (long j = 0; j < dim_no_intercept; ++j) {
      double mean = 0.0;
      mean += split.train_x.col(j).sum();
      mean += split.init_x.col(j).sum();
      mean /= n_fit;
      double var = (split.train_x.col(j).array() - mean).square().sum() +
                   (split.init_x.col(j).array() - mean).square().sum();
      var /= n_fit;

      bool binary = true;
      for (long i = 0; i < split.train_x.rows() && binary; ++i) {
        const double v = split.train_x(i, j);
        binary = v == 0.0 || v == 1.0;
      }
      if (binary) continue;

      const double sd = std::sqrt(var);
      const double scale = sd > 1e-12 ? 1.0 / sd : 1.0;
      split.train_x.col(j) = (split.train_x.col(j).array() - mean) * scale;
      split.init_x.col(j) = (split.init_x.col(j).array() - mean) * scale;
      if (n_test > 0) split.test_x.col(j) = (split.test_x.col(j).array() - mean) * scale;
    }
  }

  if (options.intercept) {
    auto append_ones = [](Matrix& m) {
      m.conservativeResize(Eigen::NoChange, m.cols() + 1);
      m.col(m.cols() - 1).setOnes();
    };
    append_ones(split.train_x);
    append_ones(split.init_x);
    append_ones(split.test_x);
  }

  return split;
}

}  // namespace msna
