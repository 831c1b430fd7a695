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

#include "bft/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "bft/error.hpp"
#include "bft/trial.hpp"

namespace bft {

Matrix Matrix::Identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::Transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  Require(a.cols() == b.rows(), ErrorKind::kDimension,
          "matrix product " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " * " +
              std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  Require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::kDimension, "matrix sum shape");
  Matrix out = a;
  for (std::size_t i = 0; i < out.values().size(); ++i) out.values()[i] += b.values()[i];
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  Require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::kDimension,
          "matrix difference shape");
  Matrix out = a;
  for (std::size_t i = 0; i < out.values().size(); ++i) out.values()[i] -= b.values()[i];
  return out;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

double FrobeniusNorm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

double MaxAbs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

SymMatrix::SymMatrix(Matrix m) : m_(std::move(m)) {
  Require(m_.rows() == m_.cols() && m_.rows() > 0, ErrorKind::kContract,
          "symmetric matrix must be square and non-empty");
  const double scale = std::max(1.0, MaxAbs(m_));
  for (double v : m_.values())
    Require(std::isfinite(v), ErrorKind::kContract, "symmetric matrix has non-finite entry");
  const std::size_t n = m_.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      Require(std::abs(m_(i, j) - m_(j, i)) <= 1e-12 * scale, ErrorKind::kContract,
              "matrix is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      const double avg = 0.5 * (m_(i, j) + m_(j, i));
      m_(i, j) = avg;
      m_(j, i) = avg;
    }
  }
}

double SymMatrix::Trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) t += m_(i, i);
  return t;
}

SymmetricEigen JacobiEigen(const SymMatrix& m, int max_sweeps) {
  const std::size_t n = m.dim();
  Matrix a = m.matrix();
  Matrix v = Matrix::Identity(n);

  auto off_diagonal = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return s;
  };
  double total = 0.0;
  for (double x : a.values()) total += x * x;
  const double tol = 1e-30 * std::max(total, 1e-300);

  bool converged = off_diagonal() <= tol;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off_diagonal() <= tol;
  }
  Require(converged, ErrorKind::kNumerical, "Jacobi eigensolver did not converge");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

SymMatrix ApplySpectralFunction(const SymMatrix& m, const std::function<double(double)>& f) {
  const SymmetricEigen eig = JacobiEigen(m);
  const std::size_t n = m.dim();
  std::vector<double> fl(n);
  for (std::size_t k = 0; k < n; ++k) fl[k] = f(eig.values[k]);
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += eig.vectors(i, k) * fl[k] * eig.vectors(j, k);
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return SymMatrix(std::move(out));
}

double DefaultWhiteningEps(const SymMatrix& m) { return 1e-8 * m.Trace() / static_cast<double>(m.dim()); }

SymMatrix InvSqrtPsd(const SymMatrix& m, double eps) {
  Require(eps >= 0.0 && std::isfinite(eps), ErrorKind::kContract, "whitening eps must be >= 0");
  const SymmetricEigen eig = JacobiEigen(m);
  for (double l : eig.values) {
    Require(l + eps > 0.0, ErrorKind::kNumerical,
            "matrix is not positive definite after regularization (eigenvalue " + std::to_string(l) + ")");
  }
  const std::size_t n = m.dim();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        s += eig.vectors(i, k) * eig.vectors(j, k) / std::sqrt(eig.values[k] + eps);
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return SymMatrix(std::move(out));
}

SymMatrix InvSqrtPsd(const SymMatrix& m) { return InvSqrtPsd(m, DefaultWhiteningEps(m)); }

SymMatrix SqrtPsd(const SymMatrix& m) {
  return ApplySpectralFunction(m, [](double l) { return std::sqrt(std::max(l, 0.0)); });
}

std::vector<double> Softmax(std::span<const double> x, double tau) {
  Require(tau > 0.0, ErrorKind::kContract, "softmax temperature must be positive");
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  const double mx = *std::max_element(x.begin(), x.end());
  Require(std::isfinite(mx), ErrorKind::kNumerical, "softmax of non-finite scores");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Require(std::isfinite(x[i]), ErrorKind::kNumerical, "softmax of non-finite scores");
    out[i] = std::exp((x[i] - mx) / tau);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

SymMatrix Covariance(const Trial& trial) {
  const std::size_t c = trial.channels();
  const std::size_t t = trial.samples();
  Require(t >= 2, ErrorKind::kDegenerateInput, "covariance needs at least 2 samples");
  Matrix out(c, c);
  for (std::size_t i = 0; i < c; ++i) {
    auto xi = trial.channel(i);
    for (std::size_t j = i; j < c; ++j) {
      auto xj = trial.channel(j);
      double s = 0.0;
      for (std::size_t k = 0; k < t; ++k) s += xi[k] * xj[k];
      out(i, j) = s / static_cast<double>(t);
      out(j, i) = out(i, j);
    }
  }
  return SymMatrix(std::move(out));
}

namespace {

bool IsPowerOfTwo(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void Radix2InPlace(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        // Twiddles from the angle directly; recurrences drift at large n.
        const Complex w(std::cos(ang * static_cast<double>(k)), std::sin(ang * static_cast<double>(k)));
        const Complex u = a[i + k];
        const Complex v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

std::vector<Complex> Bluestein(std::span<const Complex> x, bool inverse) {
  const std::size_t n = x.size();
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k² mod 2n keeps the angle argument small for long inputs.
    const std::size_t k2 = (k * k) % (2 * n);
    const double ang = sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = Complex(std::cos(ang), std::sin(ang));
  }
  std::vector<Complex> a(m), b(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    b[k] = std::conj(chirp[k]);
    b[m - k] = std::conj(chirp[k]);
  }
  Radix2InPlace(a, false);
  Radix2InPlace(b, false);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  Radix2InPlace(a, true);
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] / static_cast<double>(m) * chirp[k];
  return out;
}

}  // namespace

std::vector<Complex> Fft(std::span<const Complex> x, bool inverse) {
  Require(!x.empty(), ErrorKind::kDegenerateInput, "FFT of empty sequence");
  std::vector<Complex> out;
  if (IsPowerOfTwo(x.size())) {
    out.assign(x.begin(), x.end());
    Radix2InPlace(out, inverse);
  } else {
    out = Bluestein(x, inverse);
  }
  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(x.size());
    for (Complex& v : out) v *= inv_n;
  }
  return out;
}

ComplexSeries AnalyticSignal(std::span<const double> x) {
  const std::size_t n = x.size();
  Require(n >= 2, ErrorKind::kDegenerateInput, "analytic signal needs at least 2 samples");
  std::vector<Complex> spec(n);
  for (std::size_t i = 0; i < n; ++i) spec[i] = Complex(x[i], 0.0);
  spec = Fft(spec);
  // Keep DC (and Nyquist for even n), double positive frequencies, zero the rest.
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k < n; ++k) {
    if (n % 2 == 0 && k == half) continue;
    if (k <= (n - 1) / 2) spec[k] *= 2.0;
    else spec[k] = 0.0;
  }
  ComplexSeries out{Fft(spec, true)};
  for (std::size_t i = 0; i < n; ++i) out.values[i] = Complex(x[i], out.values[i].imag());
  return out;
}

}  // namespace bft
