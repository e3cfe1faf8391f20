#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace inpo {

#ifdef INPO_REAL32
using real_t = float;
#else
using real_t = double;
#endif

// Dense row-major matrix. Column vectors are n x 1, scalars 1 x 1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, real_t fill = 0);
  static Tensor from_rows(std::initializer_list<std::initializer_list<real_t>> rows);
  static Tensor scalar_of(real_t v);
  static Tensor identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }

  real_t& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  real_t at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  real_t& operator[](std::size_t i) { return data_[i]; }
  real_t operator[](std::size_t i) const { return data_[i]; }
  real_t scalar() const;

  real_t* data() { return data_.data(); }
  const real_t* data() const { return data_.data(); }

  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const;

  bool operator==(const Tensor& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<real_t> data_;
};

// Plain kernels, used by the tape and by test oracles.
Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T and a^T * b, for backward passes.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real_t c);

real_t l1_distance(const Tensor& a, const Tensor& b);
real_t max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace inpo
