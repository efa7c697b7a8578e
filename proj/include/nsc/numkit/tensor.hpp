#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace nsc::numkit {

/// Dense row-major matrix. Rows are samples, columns are features.
template <typename T>
class Tensor2D {
 public:
  using value_type = T;

  Tensor2D() = default;
  Tensor2D(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Tensor2D(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) throw std::invalid_argument("tensor size mismatch");
  }

  static Tensor2D from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    Tensor2D t(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw std::invalid_argument("ragged rows");
      std::copy(row.begin(), row.end(), t.row(i++).begin());
    }
    return t;
  }

  static Tensor2D row_vector(std::span<const T> v) {
    return Tensor2D(1, v.size(), std::vector<T>(v.begin(), v.end()));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return values_[r * cols_ + c];
  }
  const T& operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return values_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  Tensor2D& operator+=(const Tensor2D& other) {
    if (other.rows_ != rows_ || other.cols_ != cols_) throw std::invalid_argument("shape mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }

  Tensor2D& operator*=(T s) {
    for (auto& v : values_) v *= s;
    return *this;
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
  }

  bool same_shape(const Tensor2D& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  template <typename U>
  Tensor2D<U> cast() const {
    return Tensor2D<U>(rows_, cols_, std::vector<U>(values_.begin(), values_.end()));
  }

  /// Rows picked by index, in the given order.
  Tensor2D gather_rows(std::span<const std::size_t> idx) const {
    Tensor2D out(idx.size(), cols_);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = row(idx[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  friend bool operator==(const Tensor2D&, const Tensor2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> values_;
};

}  // namespace nsc::numkit
