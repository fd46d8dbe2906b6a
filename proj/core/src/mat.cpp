#include "ctedd/mat.hpp"

#include <algorithm>
#include <cmath>

namespace ctedd {

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("Mat: data length " + std::to_string(data_.size()) + " does not match " +
                         shape_string());
  }
  require_finite(*this, "Mat construction");
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::row_vector(std::span<const double> values) {
  return Mat(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Mat::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Mat(r, c, std::move(data));
}

void Mat::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Mat::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Mat::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

void require_finite(const Mat& m, const std::string& where) {
  if (!m.all_finite()) throw NumericError(where + ": non-finite value in " + m.shape_string() + " matrix");
}

Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  return t;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + a.shape_string() + " * " + b.shape_string());
  }
  Mat out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out_row = out.row(i).data();
    const double* a_row = a.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a_row[k];
      const double* b_row = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) out_row[j] += aik * b_row[j];
    }
  }
  debug_check_finite(out, "matmul");
  return out;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: " + a.shape_string() + " * " + b.shape_string() + "^T");
  }
  return matmul(a, transpose(b));
}

Mat matmul_tn(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: " + a.shape_string() + "^T * " + b.shape_string());
  }
  Mat out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* a_row = a.row(r).data();
    const double* b_row = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = a_row[i];
      double* out_row = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) out_row[j] += ari * b_row[j];
    }
  }
  debug_check_finite(out, "matmul_tn");
  return out;
}

Mat hconcat(std::span<const Mat> parts) {
  if (parts.empty()) return {};
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Mat& p : parts) {
    if (p.rows() != rows) throw DimensionError("hconcat: row count mismatch");
    cols += p.cols();
  }
  Mat out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.row(r).data();
    for (const Mat& p : parts) {
      const auto src = p.row(r);
      std::copy(src.begin(), src.end(), dst);
      dst += src.size();
    }
  }
  return out;
}

Mat slice_cols(const Mat& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of " + a.shape_string());
  }
  Mat out(a.rows(), count);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = a(r, begin + c);
  return out;
}

Mat slice_rows(const Mat& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows()) throw DimensionError("slice_rows: out of range " + a.shape_string());
  Mat out(count, a.cols());
  const auto src = a.data().subspan(begin * a.cols(), count * a.cols());
  std::copy(src.begin(), src.end(), out.data().begin());
  return out;
}

void add_inplace(Mat& target, const Mat& delta) { axpy_inplace(target, 1.0, delta); }

void axpy_inplace(Mat& target, double alpha, const Mat& x) {
  if (!target.same_shape(x)) {
    throw DimensionError("axpy: " + target.shape_string() + " vs " + x.shape_string());
  }
  auto t = target.data();
  const auto s = x.data();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] += alpha * s[i];
}

void scale_inplace(Mat& target, double factor) {
  for (double& v : target.data()) v *= factor;
}

Mat operator+(const Mat& a, const Mat& b) {
  Mat out = a;
  add_inplace(out, b);
  return out;
}

Mat operator-(const Mat& a, const Mat& b) {
  Mat out = a;
  axpy_inplace(out, -1.0, b);
  return out;
}

Mat operator*(double s, const Mat& a) {
  Mat out = a;
  scale_inplace(out, s);
  return out;
}

double sum(const Mat& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return total;
}

double squared_norm(const Mat& a) {
  double total = 0.0;
  for (double v : a.data()) total += v * v;
  return total;
}

double max_abs(const Mat& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace ctedd
