#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "parfft/common.hpp"
#include "parfft/dense.hpp"

namespace parfft {
namespace detail {

template <class U>
void put_le(std::ostream& os, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i)
    b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  os.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
  unsigned char b[sizeof(U)];
  is.read(reinterpret_cast<char*>(b), sizeof(U));
  require(bool(is), "nda1: truncated input");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

inline void put_f64_le(std::ostream& os, double d) {
  put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(d));
}

inline double get_f64_le(std::istream& is) {
  return std::bit_cast<double>(get_le<std::uint64_t>(is));
}

constexpr std::uint8_t nda1_code(ElemKind k) {
  return k == ElemKind::real64 ? 1 : 2;
}

}  // namespace detail

/// NDA1 container: magic "NDA1", u8 dtype (1 = real64, 2 = complex128),
/// u8 ndim, ndim little-endian u64 extents, then the row-major payload as
/// little-endian IEEE-754 doubles (complex elements interleave re, im).
template <class T>
void write_nda1(std::ostream& os, const DenseArray<T>& a) {
  detail::require(a.ndim() <= 255, "nda1: too many axes");
  os.write("NDA1", 4);
  detail::put_le<std::uint8_t>(os, detail::nda1_code(DenseArray<T>::kind));
  detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(a.ndim()));
  for (std::size_t e : a.shape()) detail::put_le<std::uint64_t>(os, e);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if constexpr (DenseArray<T>::kind == ElemKind::complex128) {
      detail::put_f64_le(os, a[i].real());
      detail::put_f64_le(os, a[i].imag());
    } else {
      detail::put_f64_le(os, a[i]);
    }
  }
  detail::require(bool(os), "nda1: write failed");
}

template <class T>
DenseArray<T> read_nda1(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  detail::require(bool(is) && std::memcmp(magic, "NDA1", 4) == 0,
                  "nda1: bad magic");
  const auto code = detail::get_le<std::uint8_t>(is);
  detail::require(code == detail::nda1_code(DenseArray<T>::kind),
                  "nda1: element kind does not match the requested type");
  const auto ndim = detail::get_le<std::uint8_t>(is);
  Shape shape(ndim);
  for (auto& e : shape) {
    std::uint64_t v = detail::get_le<std::uint64_t>(is);
    e = static_cast<std::size_t>(v);
    detail::require(static_cast<std::uint64_t>(e) == v, "nda1: extent too large");
  }
  DenseArray<T> a(std::move(shape));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if constexpr (DenseArray<T>::kind == ElemKind::complex128) {
      double re = detail::get_f64_le(is);
      double im = detail::get_f64_le(is);
      a[i] = {re, im};
    } else {
      a[i] = detail::get_f64_le(is);
    }
  }
  return a;
}

}  // namespace parfft
