#include "brsent/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace brsent {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::row_vector(std::span<const double> values) {
  Matrix m(1, values.size());
  std::copy(values.begin(), values.end(), m.data_.begin());
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (!same_shape(other)) {
    throw ShapeError("matrix add: " + shape_string(*this) + " vs " + shape_string(other));
  }
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (!same_shape(other)) {
    throw ShapeError("matrix sub: " + shape_string(*this) + " vs " + shape_string(other));
  }
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  add_matmul(out, a, b);
  return out;
}

void add_matmul(Matrix& out, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows() || out.rows() != a.rows() || out.cols() != b.cols()) {
    throw ShapeError("matmul: " + shape_string(a) + " * " + shape_string(b) + " -> " +
                     shape_string(out));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    auto out_row = out.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const auto b_row = b.row(p);
      for (std::size_t j = 0; j < m; ++j) out_row[j] += av * b_row[j];
    }
  }
}

void add_matmul_tn(Matrix& out, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols()) {
    throw ShapeError("matmul_tn: " + shape_string(a) + "^T * " + shape_string(b) + " -> " +
                     shape_string(out));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const auto b_row = b.row(r);
    for (std::size_t i = 0; i < k; ++i) {
      const double av = a(r, i);
      if (av == 0.0) continue;
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < m; ++j) out_row[j] += av * b_row[j];
    }
  }
}

void add_matmul_nt(Matrix& out, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols() || out.rows() != a.rows() || out.cols() != b.rows()) {
    throw ShapeError("matmul_nt: " + shape_string(a) + " * " + shape_string(b) + "^T -> " +
                     shape_string(out));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const auto a_row = a.row(i);
    auto out_row = out.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const auto b_row = b.row(j);
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
      out_row[j] += acc;
    }
  }
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("hadamard: " + shape_string(a) + " vs " + shape_string(b));
  }
  Matrix out = a;
  auto ov = out.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < ov.size(); ++k) ov[k] *= bv[k];
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.values()) v = sigmoid(v);
  return out;
}

Matrix tanh_m(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.values()) v = std::tanh(v);
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty vector");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - top);
    total += out[k];
  }
  for (double& v : out) v /= total;
  return out;
}

std::string to_string(LossKind kind) {
  return kind == LossKind::binary_crossentropy ? "binary_crossentropy"
                                               : "categorical_crossentropy";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "binary_crossentropy" || text == "bin") return LossKind::binary_crossentropy;
  if (text == "categorical_crossentropy" || text == "cat") {
    return LossKind::categorical_crossentropy;
  }
  throw std::invalid_argument("unknown loss '" + std::string(text) + "'");
}

void check_loss_head(LossKind kind, int n_out) {
  if (n_out < 1 || n_out > 3) {
    throw std::invalid_argument("head must have 1, 2 or 3 nodes, got " + std::to_string(n_out));
  }
  if (kind == LossKind::binary_crossentropy && n_out != 1) {
    throw std::invalid_argument("binary_crossentropy needs a 1-node head, got " +
                                std::to_string(n_out));
  }
  if (kind == LossKind::categorical_crossentropy && n_out < 2) {
    throw std::invalid_argument("categorical_crossentropy needs a head with >= 2 nodes");
  }
}

double binary_crossentropy(double p, int y) {
  if (y != 0 && y != 1) throw std::out_of_range("binary label must be 0 or 1");
  const double q = y == 1 ? p : 1.0 - p;
  return -std::log(std::clamp(q, kLogClamp, 1.0 - kLogClamp));
}

double categorical_crossentropy(std::span<const double> dist, std::size_t y) {
  if (y >= dist.size()) {
    throw std::out_of_range("class index " + std::to_string(y) + " out of range for " +
                            std::to_string(dist.size()) + " classes");
  }
  return -std::log(std::clamp(dist[y], kLogClamp, 1.0 - kLogClamp));
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return draw % n;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Matrix init_params(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw ShapeError("init_params needs positive dimensions");
  const double limit = glorot_limit(rows, cols);
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-limit, limit);
  return m;
}

double grad_check(const std::function<double()>& f, std::span<double> params,
                  std::span<const double> analytic, double eps) {
  if (params.size() != analytic.size()) {
    throw ShapeError("grad_check: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(analytic.size()) + " gradients");
  }
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + eps;
    const double up = f();
    params[k] = saved - eps;
    const double down = f();
    params[k] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("grad_check: non-finite objective at coordinate " + std::to_string(k));
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max(1e-8, std::abs(analytic[k]) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
  }
  return worst;
}

}  // namespace brsent
