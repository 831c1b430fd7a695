// Copyright 2026 The BFT Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small dense linear algebra and spectral helpers. Everything here is 64-bit
// and sized for EEG montages (up to ~128 channels), not general BLAS.

#ifndef BFT_NUMERICS_HPP_
#define BFT_NUMERICS_HPP_

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace bft {

class Trial;

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix Identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  Matrix Transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double FrobeniusNorm(const Matrix& a);
double MaxAbs(const Matrix& a);

/// Symmetric matrix. Construction checks symmetry to 1e-12 (scaled by the
/// largest entry) and finiteness, then stores the exactly symmetrized copy.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Matrix m);

  static SymMatrix Identity(std::size_t n) { return SymMatrix(Matrix::Identity(n)); }

  std::size_t dim() const { return m_.rows(); }
  double operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
  const Matrix& matrix() const { return m_; }
  double Trace() const;

 private:
  Matrix m_;
};

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column k is the eigenvector of values[k]
};

/// Cyclic Jacobi eigendecomposition. Throws kNumerical when the off-diagonal
/// mass fails to vanish within `max_sweeps`.
SymmetricEigen JacobiEigen(const SymMatrix& m, int max_sweeps = 100);

/// V f(Λ) Vᵀ for a symmetric matrix.
SymMatrix ApplySpectralFunction(const SymMatrix& m, const std::function<double(double)>& f);

/// Default regularizer for InvSqrtPsd: 1e-8 · trace / dim.
double DefaultWhiteningEps(const SymMatrix& m);

/// V diag((λ + eps)^(-1/2)) Vᵀ. eps must be ≥ 0; any shifted eigenvalue ≤ 0
/// is a numerical error.
SymMatrix InvSqrtPsd(const SymMatrix& m, double eps);
SymMatrix InvSqrtPsd(const SymMatrix& m);

/// Principal square root, negative eigenvalues clamped to zero.
SymMatrix SqrtPsd(const SymMatrix& m);

/// (1/T) X Xᵀ of the channel-major trial data. Needs T ≥ 2.
SymMatrix Covariance(const Trial& trial);

/// softmax(x / tau) with max subtraction. Empty input gives an empty result.
std::vector<double> Softmax(std::span<const double> x, double tau = 1.0);

using Complex = std::complex<double>;

/// Complex sequence with at least one element.
struct ComplexSeries {
  std::vector<Complex> values;
  std::size_t size() const { return values.size(); }
};

/// Discrete Fourier transform of any length (radix-2 when possible,
/// Bluestein otherwise). The inverse is scaled by 1/n.
std::vector<Complex> Fft(std::span<const Complex> x, bool inverse = false);

/// Analytic signal x + i·H[x]. The real part is the input verbatim.
ComplexSeries AnalyticSignal(std::span<const double> x);

}  // namespace bft

#endif  // BFT_NUMERICS_HPP_
