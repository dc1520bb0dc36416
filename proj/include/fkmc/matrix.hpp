#pragma once

#include <complex>
#include <span>
#include <vector>

namespace fkmc {

using cxd = std::complex<double>;

/// Dense square complex matrix, row-major.  Dimensions stay small (d <= 8 in
/// practice); everything is value-semantic and freely shareable.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(int dim) : dim_(dim), a_(static_cast<size_t>(dim) * dim) {}

  static Matrix identity(int dim) {
    Matrix m(dim);
    for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix zero(int dim) { return Matrix(dim); }

  int dim() const { return dim_; }

  cxd& operator()(int r, int c) { return a_[static_cast<size_t>(r) * dim_ + c]; }
  const cxd& operator()(int r, int c) const {
    return a_[static_cast<size_t>(r) * dim_ + c];
  }

  cxd* data() { return a_.data(); }
  const cxd* data() const { return a_.data(); }
  size_t size() const { return a_.size(); }

  void set_zero() { std::fill(a_.begin(), a_.end(), cxd(0.0)); }
  void set_identity() {
    set_zero();
    for (int i = 0; i < dim_; ++i) (*this)(i, i) = 1.0;
  }

  /// this += s * m
  void add_scaled(const Matrix& m, cxd s) {
    for (size_t i = 0; i < a_.size(); ++i) a_[i] += s * m.a_[i];
  }

  /// out = a * b; out must not alias a or b.
  static void mul(const Matrix& a, const Matrix& b, Matrix& out) {
    const int d = a.dim_;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        cxd s = 0.0;
        for (int k = 0; k < d; ++k) s += a(i, k) * b(k, j);
        out(i, j) = s;
      }
    }
  }

  Matrix operator*(const Matrix& b) const {
    Matrix out(dim_);
    mul(*this, b, out);
    return out;
  }
  Matrix operator+(const Matrix& b) const {
    Matrix out = *this;
    for (size_t i = 0; i < a_.size(); ++i) out.a_[i] += b.a_[i];
    return out;
  }
  Matrix operator-(const Matrix& b) const {
    Matrix out = *this;
    for (size_t i = 0; i < a_.size(); ++i) out.a_[i] -= b.a_[i];
    return out;
  }
  Matrix& operator+=(const Matrix& b) {
    for (size_t i = 0; i < a_.size(); ++i) a_[i] += b.a_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& b) {
    for (size_t i = 0; i < a_.size(); ++i) a_[i] -= b.a_[i];
    return *this;
  }
  Matrix& operator*=(cxd s) {
    for (auto& v : a_) v *= s;
    return *this;
  }
  friend Matrix operator*(cxd s, Matrix m) {
    m *= s;
    return m;
  }

  Matrix adjoint() const {
    Matrix out(dim_);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) out(i, j) = std::conj((*this)(j, i));
    return out;
  }

  void adjoint_into(Matrix& out) const {
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) out(i, j) = std::conj((*this)(j, i));
  }

  cxd trace() const {
    cxd s = 0.0;
    for (int i = 0; i < dim_; ++i) s += (*this)(i, i);
    return s;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& v : a_) s += std::norm(v);
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& v : a_) {
      double w = std::max(std::abs(v.real()), std::abs(v.imag()));
      if (w > m) m = w;
    }
    return m;
  }

  bool all_finite() const {
    for (const auto& v : a_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }

  /// out = this * v
  void apply(std::span<const cxd> v, std::span<cxd> out) const {
    for (int i = 0; i < dim_; ++i) {
      cxd s = 0.0;
      for (int j = 0; j < dim_; ++j) s += (*this)(i, j) * v[j];
      out[i] = s;
    }
  }

  bool operator==(const Matrix& other) const = default;

 private:
  int dim_ = 0;
  std::vector<cxd> a_;
};

}  // namespace fkmc
