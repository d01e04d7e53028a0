#pragma once

#include <complex>
#include <cstddef>
#include <cstring>
#include <span>
#include <utility>
#include <vector>

#include "parfft/common.hpp"

namespace parfft {

/// Element types that cross the transport. Wire width is fixed per kind.
enum class ElemKind { complex128, real64 };

constexpr std::size_t byte_width(ElemKind k) {
  return k == ElemKind::complex128 ? 16u : 8u;
}

template <class T>
struct elem_traits;

template <>
struct elem_traits<double> {
  static constexpr ElemKind kind = ElemKind::real64;
};

template <>
struct elem_traits<std::complex<double>> {
  static constexpr ElemKind kind = ElemKind::complex128;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_product(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

/// Row-major strides in elements; the last axis has stride 1.
inline Shape row_major_strides(const Shape& s) {
  Shape st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

/// Dense row-major array of double or complex<double>. A rank-0 shape holds
/// exactly one element (the empty product).
template <class T>
class DenseArray {
 public:
  static constexpr ElemKind kind = elem_traits<T>::kind;

  DenseArray() : data_(1) {}
  explicit DenseArray(Shape shape)
      : shape_(std::move(shape)), data_(shape_product(shape_)) {}
  DenseArray(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    detail::require(data_.size() == shape_product(shape_),
                    "DenseArray: data length does not match shape");
  }

  const Shape& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return {data_.data(), data_.size()}; }
  std::span<const T> span() const { return {data_.data(), data_.size()}; }

  T& operator[](std::size_t flat) { return data_[flat]; }
  const T& operator[](std::size_t flat) const { return data_[flat]; }

  std::size_t flat_index(std::span<const std::size_t> idx) const {
    Shape st = row_major_strides(shape_);
    std::size_t f = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) f += idx[i] * st[i];
    return f;
  }

  T& at(std::span<const std::size_t> idx) { return data_[flat_index(idx)]; }
  const T& at(std::span<const std::size_t> idx) const {
    return data_[flat_index(idx)];
  }
  T& at(std::initializer_list<std::size_t> idx) {
    return at(std::span<const std::size_t>(idx.begin(), idx.size()));
  }
  const T& at(std::initializer_list<std::size_t> idx) const {
    return at(std::span<const std::size_t>(idx.begin(), idx.size()));
  }

  /// Reinterpret the flat storage under a new shape of equal element count.
  void reshape(Shape shape) {
    detail::require(shape_product(shape) == data_.size(),
                    "DenseArray::reshape: element count must be preserved");
    shape_ = std::move(shape);
  }

  /// Drop current contents and adopt a new shape; storage is reused when the
  /// capacity allows, values are zero-initialized.
  void assign_shape(Shape shape) {
    std::size_t n = shape_product(shape);
    shape_ = std::move(shape);
    data_.assign(n, T{});
  }

  bool operator==(const DenseArray& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

namespace detail {

/// Copy one rectangular region of a row-major buffer into a packed buffer
/// laid out in the region's own row-major order. `width` is bytes/element.
inline void region_to_bytes(const std::byte* base, const Shape& sizes,
                            const Shape& subsizes, const Shape& starts,
                            std::size_t width, std::byte* out) {
  const std::size_t d = sizes.size();
  if (d == 0) {
    std::memcpy(out, base, width);
    return;
  }
  Shape strides = row_major_strides(sizes);
  std::size_t runs = 1;
  for (std::size_t i = 0; i + 1 < d; ++i) runs *= subsizes[i];
  const std::size_t run_bytes = subsizes[d - 1] * width;
  if (runs == 0 || run_bytes == 0) return;

  Shape idx(d > 1 ? d - 1 : 0, 0);
  std::size_t off = starts[d - 1];
  for (std::size_t i = 0; i + 1 < d; ++i) off += starts[i] * strides[i];
  for (std::size_t r = 0; r < runs; ++r) {
    std::memcpy(out + r * run_bytes, base + off * width, run_bytes);
    // odometer over the leading axes
    for (std::size_t i = idx.size(); i-- > 0;) {
      ++idx[i];
      off += strides[i];
      if (idx[i] < subsizes[i]) break;
      off -= strides[i] * subsizes[i];
      idx[i] = 0;
    }
  }
}

/// Inverse of region_to_bytes: scatter a packed region back into place.
inline void bytes_to_region(std::byte* base, const Shape& sizes,
                            const Shape& subsizes, const Shape& starts,
                            std::size_t width, const std::byte* in) {
  const std::size_t d = sizes.size();
  if (d == 0) {
    std::memcpy(base, in, width);
    return;
  }
  Shape strides = row_major_strides(sizes);
  std::size_t runs = 1;
  for (std::size_t i = 0; i + 1 < d; ++i) runs *= subsizes[i];
  const std::size_t run_bytes = subsizes[d - 1] * width;
  if (runs == 0 || run_bytes == 0) return;

  Shape idx(d > 1 ? d - 1 : 0, 0);
  std::size_t off = starts[d - 1];
  for (std::size_t i = 0; i + 1 < d; ++i) off += starts[i] * strides[i];
  for (std::size_t r = 0; r < runs; ++r) {
    std::memcpy(base + off * width, in + r * run_bytes, run_bytes);
    for (std::size_t i = idx.size(); i-- > 0;) {
      ++idx[i];
      off += strides[i];
      if (idx[i] < subsizes[i]) break;
      off -= strides[i] * subsizes[i];
      idx[i] = 0;
    }
  }
}

/// Swap the two leading axes of a (x, y, inner) view: out[y][x][k] = in[x][y][k].
/// `inner` counts elements, not bytes.
template <class T>
void transpose_01_kernel(const T* in, T* out, std::size_t x, std::size_t y,
                         std::size_t inner) {
  for (std::size_t i = 0; i < x; ++i)
    for (std::size_t j = 0; j < y; ++j)
      std::memcpy(out + (j * x + i) * inner, in + (i * y + j) * inner,
                  inner * sizeof(T));
}

}  // namespace detail

/// Exchange the first two axes of an array with ndim >= 2.
template <class T>
DenseArray<T> local_transpose_01(const DenseArray<T>& a) {
  detail::require(a.ndim() >= 2, "local_transpose_01: need at least two axes");
  Shape out_shape = a.shape();
  std::swap(out_shape[0], out_shape[1]);
  std::size_t inner = 1;
  for (std::size_t i = 2; i < a.ndim(); ++i) inner *= a.shape()[i];
  DenseArray<T> out(out_shape);
  detail::transpose_01_kernel(a.data(), out.data(), a.shape()[0], a.shape()[1],
                              inner);
  return out;
}

}  // namespace parfft
