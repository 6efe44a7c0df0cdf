//
// Copyright 2026 The UMEDA Authors
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
//

// Dense row-major matrices, a one-sided Jacobi SVD, and the vector helpers
// used by the privacy and aggregation code.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "umeda/error.hpp"
#include "umeda/rng.hpp"

namespace umeda {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, Vector data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ValidationError(internal::StrCat("matrix data length ", data_.size(),
                                             " != ", rows_, "x", cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ValidationError("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix Identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix Diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
  }

  static Matrix Gaussian(std::size_t rows, std::size_t cols, Rng& rng,
                         double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& x : m.data_) x = scale * rng.Normal();
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  bool SameShape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool AllFinite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double x) { return std::isfinite(x); });
  }

  Matrix& operator+=(const Matrix& o) {
    CheckShape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    CheckShape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }

  // Bitwise equality, used by the determinism checks.
  friend bool operator==(const Matrix& a, const Matrix& b) {
    if (!a.SameShape(b)) return false;
    for (std::size_t i = 0; i < a.data_.size(); ++i) {
      if (std::bit_cast<uint64_t>(a.data_[i]) != std::bit_cast<uint64_t>(b.data_[i]))
        return false;
    }
    return true;
  }

 private:
  void CheckShape(const Matrix& o) const {
    if (!SameShape(o)) {
      throw ValidationError(internal::StrCat("shape mismatch: ", rows_, "x", cols_,
                                             " vs ", o.rows_, "x", o.cols_));
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

// ---------------------------------------------------------------------------
// Basic products.

inline Matrix Transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix MatMul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ValidationError(internal::StrCat("matmul inner dims ", a.cols(), " vs ",
                                           b.rows()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

// a^T b without materializing the transpose.
inline Matrix MatMulTN(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ValidationError(internal::StrCat("matmul_tn rows ", a.rows(), " vs ",
                                           b.rows()));
  }
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto ak = a.row(k);
    auto bk = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      auto ci = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

// a b^T.
inline Matrix MatMulNT(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ValidationError(internal::StrCat("matmul_nt cols ", a.cols(), " vs ",
                                           b.cols()));
  }
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto bj = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

inline Vector MatVec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ValidationError("matvec dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += ai[k] * x[k];
    y[i] = s;
  }
  return y;
}

// First `n` columns.
inline Matrix LeadingColumns(const Matrix& a, std::size_t n) {
  if (n > a.cols()) throw ValidationError("LeadingColumns: n exceeds cols");
  Matrix out(a.rows(), n);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = a(i, j);
  return out;
}

inline double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double Norm2(std::span<const double> v) { return std::sqrt(Dot(v, v)); }

inline double FrobeniusNorm(const Matrix& a) { return Norm2(a.data()); }

inline double Trace(const Matrix& a) {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) t += a(i, i);
  return t;
}

inline double MaxAbsDiff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// ---------------------------------------------------------------------------
// vec / unvec use column-major stacking: vec([[1,2],[3,4]]) = (1,3,2,4).

inline Vector Vec(const Matrix& m) {
  Vector v(m.size());
  std::size_t k = 0;
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) v[k++] = m(i, j);
  return v;
}

inline Matrix Unvec(std::span<const double> v, std::size_t rows, std::size_t cols) {
  if (v.size() != rows * cols) {
    throw ValidationError(internal::StrCat("unvec: length ", v.size(), " != ", rows,
                                           "x", cols));
  }
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) m(i, j) = v[k++];
  return m;
}

// v * min(1, bound / ||v||). Vectors already inside the ball are returned
// unchanged (bitwise).
inline Vector ClipL2(Vector v, double bound) {
  if (!(bound > 0.0)) throw ValidationError("clip bound must be positive");
  const double norm = Norm2(v);
  if (norm <= bound) return v;
  const double scale = bound / norm;
  for (double& x : v) x *= scale;
  return v;
}

inline Vector Gaussian(Rng& rng, std::size_t n, double sigma) {
  if (sigma < 0.0) throw ValidationError("gaussian: sigma must be non-negative");
  Vector out(n, 0.0);
  if (sigma == 0.0) return out;
  for (double& x : out) x = sigma * rng.Normal();
  return out;
}

// ---------------------------------------------------------------------------
// SVD.

struct SvdResult {
  Matrix u;            // rows x k, orthonormal columns
  Vector sigma;        // k non-increasing, non-negative
  Matrix w;            // cols x k, orthonormal columns
  int sweeps = 0;
};

struct SvdOptions {
  int max_sweeps = 100;
  double tolerance = 1e-12;
};

namespace internal {

// Flips column pairs so the first entry of each u-column with magnitude above
// 1e-12 is non-negative.
inline void FixSigns(SvdResult& r) {
  for (std::size_t j = 0; j < r.u.cols(); ++j) {
    for (std::size_t i = 0; i < r.u.rows(); ++i) {
      const double x = r.u(i, j);
      if (std::abs(x) <= 1e-12) continue;
      if (x < 0.0) {
        for (std::size_t k = 0; k < r.u.rows(); ++k) r.u(k, j) = -r.u(k, j);
        for (std::size_t k = 0; k < r.w.rows(); ++k) r.w(k, j) = -r.w(k, j);
      }
      break;
    }
  }
}

// One-sided (Hestenes) Jacobi on a tall or square matrix. Columns of `a` are
// rotated in place until mutually orthogonal; the accumulated rotations form W.
inline SvdResult JacobiSvdTall(const Matrix& a, const SvdOptions& opts) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  // cols[j] holds column j of the working matrix, contiguous.
  Matrix cols = Transpose(a);
  Matrix vt = Matrix::Identity(n);  // row j = column j of W

  const double fro = FrobeniusNorm(a);
  const double negligible = std::pow(std::numeric_limits<double>::epsilon() * fro, 2);

  int sweep = 0;
  bool converged = n < 2;
  while (!converged) {
    if (sweep >= opts.max_sweeps) {
      throw Error(internal::StrCat("svd did not converge after ", sweep, " sweeps"));
    }
    ++sweep;
    bool rotated = false;
    // Squared column norms, refreshed each sweep and updated in closed form
    // after every rotation.
    Vector sq(n);
    for (std::size_t j = 0; j < n; ++j) sq[j] = Dot(cols.row(j), cols.row(j));
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto cp = cols.row(p);
        auto cq = cols.row(q);
        const double alpha = sq[p];
        const double beta = sq[q];
        if (alpha <= negligible || beta <= negligible) continue;
        const double gamma = Dot(cp, cq);
        if (std::abs(gamma) <= opts.tolerance * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        sq[p] = alpha - t * gamma;
        sq[q] = beta + t * gamma;
        for (std::size_t k = 0; k < m; ++k) {
          const double xp = cp[k];
          const double xq = cq[k];
          cp[k] = c * xp - s * xq;
          cq[k] = s * xp + c * xq;
        }
        auto vp = vt.row(p);
        auto vq = vt.row(q);
        for (std::size_t k = 0; k < n; ++k) {
          const double xp = vp[k];
          const double xq = vq[k];
          vp[k] = c * xp - s * xq;
          vq[k] = s * xp + c * xq;
        }
      }
    }
    converged = !rotated;
  }

  Vector norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = Norm2(cols.row(j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  SvdResult r;
  r.sweeps = sweep;
  r.u = Matrix(m, n);
  r.w = Matrix(n, n);
  r.sigma.assign(n, 0.0);
  const double zero_cut = std::sqrt(negligible);
  std::size_t nonzero = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    for (std::size_t i = 0; i < n; ++i) r.w(i, k) = vt(j, i);
    if (norms[j] > zero_cut && norms[j] > 0.0) {
      r.sigma[k] = norms[j];
      for (std::size_t i = 0; i < m; ++i) r.u(i, k) = cols(j, i) / norms[j];
      ++nonzero;
    }
  }
  // Complete U for (numerically) zero singular values with Gram-Schmidt
  // against the standard basis, in index order.
  std::size_t candidate = 0;
  for (std::size_t k = nonzero; k < n; ++k) {
    while (candidate < m) {
      Vector e(m, 0.0);
      e[candidate++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t c = 0; c < k; ++c) {
          double proj = 0.0;
          for (std::size_t i = 0; i < m; ++i) proj += r.u(i, c) * e[i];
          for (std::size_t i = 0; i < m; ++i) e[i] -= proj * r.u(i, c);
        }
      }
      const double nrm = Norm2(e);
      if (nrm > 0.5) {
        for (std::size_t i = 0; i < m; ++i) r.u(i, k) = e[i] / nrm;
        break;
      }
    }
  }
  return r;
}

}  // namespace internal

// Thin SVD a = u diag(sigma) w^T with k = min(rows, cols). The gauge is fixed
// by making the first non-negligible entry of every u-column non-negative.
// Throws ValidationError on non-finite input and Error when Jacobi sweeps
// exceed opts.max_sweeps.
inline SvdResult Svd(const Matrix& a, const SvdOptions& opts = {}) {
  if (!a.AllFinite()) throw ValidationError("svd: non-finite input");
  SvdResult r;
  if (a.rows() >= a.cols()) {
    r = internal::JacobiSvdTall(a, opts);
  } else {
    SvdResult t = internal::JacobiSvdTall(Transpose(a), opts);
    r.u = std::move(t.w);
    r.w = std::move(t.u);
    r.sigma = std::move(t.sigma);
    r.sweeps = t.sweeps;
  }
  internal::FixSigns(r);
  return r;
}

// u diag(scale) w^T.
inline Matrix ScaledOuter(const Matrix& u, std::span<const double> scale,
                          const Matrix& w) {
  Matrix us = u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= scale[j];
  return MatMulNT(us, w);
}

inline double SpectralNorm(const Matrix& a) {
  if (a.empty()) return 0.0;
  return Svd(a).sigma.front();
}

// ---------------------------------------------------------------------------
// Binary matrix records: "UMED", version byte, u32 rows, u32 cols, then
// rows*cols IEEE-754 doubles, all little-endian, row-major.

inline constexpr char kMatrixMagic[4] = {'U', 'M', 'E', 'D'};
inline constexpr uint8_t kMatrixFormatVersion = 1;
inline constexpr uint64_t kMaxMatrixElements = uint64_t{1} << 28;

namespace internal {

inline void PutU32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

inline void PutU64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

inline uint32_t GetU32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ValidationError("truncated file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

inline uint64_t GetU64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw ValidationError("truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace internal

inline void WriteMatrix(std::ostream& os, const Matrix& m) {
  os.write(kMatrixMagic, 4);
  os.put(static_cast<char>(kMatrixFormatVersion));
  internal::PutU32(os, static_cast<uint32_t>(m.rows()));
  internal::PutU32(os, static_cast<uint32_t>(m.cols()));
  for (double x : m.data()) internal::PutU64(os, std::bit_cast<uint64_t>(x));
}

inline Matrix ReadMatrix(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4)) throw ValidationError("truncated file: missing matrix magic");
  if (!std::equal(magic, magic + 4, kMatrixMagic))
    throw ValidationError("bad matrix magic");
  const int version = is.get();
  if (version == std::char_traits<char>::eof()) throw ValidationError("truncated file");
  if (version != kMatrixFormatVersion) {
    throw ValidationError(internal::StrCat("matrix format version ", version,
                                           " unsupported (expected ",
                                           int{kMatrixFormatVersion}, ")"));
  }
  const uint32_t rows = internal::GetU32(is);
  const uint32_t cols = internal::GetU32(is);
  if (static_cast<uint64_t>(rows) * cols > kMaxMatrixElements) {
    throw ValidationError(internal::StrCat("matrix record ", rows, "x", cols,
                                           " exceeds the size limit"));
  }
  Vector data(static_cast<std::size_t>(rows) * cols);
  for (double& x : data) x = std::bit_cast<double>(internal::GetU64(is));
  return Matrix(rows, cols, std::move(data));
}

}  // namespace umeda
