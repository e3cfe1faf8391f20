#include "inpo/tensor.hpp"

#include <cmath>
#include <cstdlib>

#include "inpo/error.hpp"

namespace inpo {

Tensor::Tensor(std::size_t rows, std::size_t cols, real_t fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<real_t>> rows) {
  Tensor t(rows.size(), rows.size() ? rows.begin()->size() : 0);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != t.cols_) throw DimensionError("from_rows: ragged rows");
    std::size_t c = 0;
    for (real_t v : row) t.at(r, c++) = v;
    ++r;
  }
  return t;
}

Tensor Tensor::scalar_of(real_t v) {
  Tensor t(1, 1);
  t[0] = v;
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1;
  return t;
}

real_t Tensor::scalar() const {
  if (!is_scalar()) throw ContractError("scalar() on non 1x1 tensor");
  return data_[0];
}

bool Tensor::all_finite() const {
  for (real_t v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dims disagree");
  Tensor out(a.rows(), b.cols());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    real_t* oi = out.data() + i * n;
    const real_t* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const real_t aip = ai[p];
      if (aip == 0) continue;
      const real_t* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) oi[j] += aip * bp[j];
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw DimensionError("matmul_nt: inner dims disagree");
  Tensor out(a.rows(), b.rows());
  const std::size_t m = a.rows(), n = a.cols(), k = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    const real_t* ai = a.data() + i * n;
    real_t* oi = out.data() + i * k;
    for (std::size_t l = 0; l < k; ++l) {
      const real_t* bl = b.data() + l * n;
      real_t s = 0;
      for (std::size_t j = 0; j < n; ++j) s += ai[j] * bl[j];
      oi[l] = s;
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw DimensionError("matmul_tn: inner dims disagree");
  Tensor out(a.cols(), b.cols());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    const real_t* ai = a.data() + i * k;
    const real_t* bi = b.data() + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const real_t ail = ai[l];
      if (ail == 0) continue;
      real_t* ol = out.data() + l * n;
      for (std::size_t j = 0; j < n; ++j) ol[j] += ail * bi[j];
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimensionError("add: shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimensionError("sub: shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimensionError("hadamard: shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor scale(const Tensor& a, real_t c) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return out;
}

real_t l1_distance(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimensionError("l1_distance: shape mismatch");
  real_t s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

real_t max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimensionError("max_abs_diff: shape mismatch");
  real_t s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

}  // namespace inpo
