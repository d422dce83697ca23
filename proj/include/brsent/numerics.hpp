#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace brsent {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles. Vectors are 1 x n matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_string(const Matrix& m);

Matrix matmul(const Matrix& a, const Matrix& b);
// out += a * b
void add_matmul(Matrix& out, const Matrix& a, const Matrix& b);
// out += transpose(a) * b
void add_matmul_tn(Matrix& out, const Matrix& a, const Matrix& b);
// out += a * transpose(b)
void add_matmul_nt(Matrix& out, const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);

double sigmoid(double x);
Matrix sigmoid(const Matrix& x);
Matrix tanh_m(const Matrix& x);

// Max-subtracted softmax over one logit vector.
std::vector<double> softmax(std::span<const double> logits);

enum class LossKind { binary_crossentropy, categorical_crossentropy };

inline constexpr double kLogClamp = 1e-7;

std::string to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);
// Throws std::invalid_argument unless the loss is legal for a head of n_out nodes.
void check_loss_head(LossKind kind, int n_out);

double binary_crossentropy(double p, int y);
double categorical_crossentropy(std::span<const double> dist, std::size_t y);

// Seeded generator with platform-independent draws (the std distributions
// are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

// splitmix64 of (seed, stream): independent child seeds from one master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Glorot-uniform: entries on [-L, L], L = sqrt(6 / (rows + cols)).
Matrix init_params(std::size_t rows, std::size_t cols, std::uint64_t seed);
double glorot_limit(std::size_t fan_in, std::size_t fan_out);

// Central-difference gradient check. `f` reads the parameters through
// `params`, which is perturbed in place and restored after every probe.
// Returns max_k |analytic_k - numeric_k| / max(1e-8, |analytic_k| + |numeric_k|).
double grad_check(const std::function<double()>& f, std::span<double> params,
                  std::span<const double> analytic, double eps);

}  // namespace brsent
