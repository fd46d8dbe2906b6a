#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctedd {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major float64 matrix. Batches are stored one sample per row.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Rejects non-finite entries.
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat identity(std::size_t n);
  static Mat row_vector(std::span<const double> values);
  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(double value);
  bool all_finite() const;
  bool same_shape(const Mat& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
  std::string shape_string() const;

  bool operator==(const Mat& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Throws NumericError naming `where` if any entry is NaN or infinite.
void require_finite(const Mat& m, const std::string& where);

// Finite check that only runs in debug builds.
inline void debug_check_finite([[maybe_unused]] const Mat& m, [[maybe_unused]] const char* where) {
#ifndef NDEBUG
  require_finite(m, where);
#endif
}

Mat transpose(const Mat& a);
Mat matmul(const Mat& a, const Mat& b);     // a * b
Mat matmul_nt(const Mat& a, const Mat& b);  // a * b^T
Mat matmul_tn(const Mat& a, const Mat& b);  // a^T * b

Mat hconcat(std::span<const Mat> parts);
Mat slice_cols(const Mat& a, std::size_t begin, std::size_t count);
Mat slice_rows(const Mat& a, std::size_t begin, std::size_t count);

void add_inplace(Mat& target, const Mat& delta);
void axpy_inplace(Mat& target, double alpha, const Mat& x);  // target += alpha * x
void scale_inplace(Mat& target, double factor);
Mat operator+(const Mat& a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);
Mat operator*(double s, const Mat& a);

double sum(const Mat& a);
double squared_norm(const Mat& a);
double max_abs(const Mat& a);

}  // namespace ctedd
