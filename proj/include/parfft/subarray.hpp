#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "parfft/common.hpp"
#include "parfft/decomp.hpp"
#include "parfft/dense.hpp"

namespace parfft {

/// A rectangular region of a row-major array: the full extents, the region
/// extents, and the region offsets. Describes both what to pack on the send
/// side and where to land bytes on the receive side; the packed wire order
/// is the region's own row-major order.
struct SubarrayLayout {
  ElemKind kind;
  Shape sizes;
  Shape subsizes;
  Shape starts;

  SubarrayLayout(ElemKind k, Shape sz, Shape sub, Shape st)
      : kind(k), sizes(std::move(sz)), subsizes(std::move(sub)),
        starts(std::move(st)) {
    detail::require(subsizes.size() == sizes.size() &&
                        starts.size() == sizes.size(),
                    "SubarrayLayout: rank mismatch");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      detail::require(subsizes[i] <= sizes[i] &&
                          starts[i] <= sizes[i] - subsizes[i],
                      "SubarrayLayout: region exceeds the array bounds");
    }
  }

  bool operator==(const SubarrayLayout&) const = default;
};

inline std::size_t layout_element_count(const SubarrayLayout& l) {
  return shape_product(l.subsizes);
}

inline std::size_t layout_byte_count(const SubarrayLayout& l) {
  return layout_element_count(l) * byte_width(l.kind);
}

/// True when two regions of the same array shape share at least one element.
inline bool regions_overlap(const SubarrayLayout& a, const SubarrayLayout& b) {
  if (a.sizes != b.sizes) return false;
  if (layout_element_count(a) == 0 || layout_element_count(b) == 0)
    return false;
  for (std::size_t i = 0; i < a.sizes.size(); ++i) {
    const std::size_t a_end = a.starts[i] + a.subsizes[i];
    const std::size_t b_end = b.starts[i] + b.subsizes[i];
    if (a_end <= b.starts[i] || b_end <= a.starts[i]) return false;
  }
  return true;
}

/// One layout per part: part p covers the p-th balanced block of `axis` and
/// the full extent of every other axis. The regions tile the array.
inline std::vector<SubarrayLayout> subarray_sequence(ElemKind kind,
                                                     const Shape& sizes,
                                                     std::size_t axis,
                                                     int parts) {
  detail::require(axis < sizes.size(), "subarray_sequence: axis out of range");
  detail::require(parts >= 1, "subarray_sequence: parts must be positive");
  std::vector<SubarrayLayout> seq;
  seq.reserve(static_cast<std::size_t>(parts));
  for (int p = 0; p < parts; ++p) {
    Block b = decompose(sizes[axis], parts, p);
    Shape sub = sizes;
    Shape st(sizes.size(), 0);
    sub[axis] = b.count;
    st[axis] = b.start;
    seq.emplace_back(kind, sizes, std::move(sub), std::move(st));
  }
  return seq;
}

/// Copy the region out of `a` in the region's row-major order.
template <class T>
std::vector<T> region_read(const DenseArray<T>& a, const SubarrayLayout& l) {
  detail::require(l.kind == DenseArray<T>::kind,
                  "region_read: element kind mismatch");
  detail::require(l.sizes == a.shape(), "region_read: layout does not fit");
  std::vector<T> out(layout_element_count(l));
  detail::region_to_bytes(reinterpret_cast<const std::byte*>(a.data()), l.sizes,
                          l.subsizes, l.starts, sizeof(T),
                          reinterpret_cast<std::byte*>(out.data()));
  return out;
}

/// Scatter packed region contents back into `a`.
template <class T>
void region_write(DenseArray<T>& a, const SubarrayLayout& l,
                  std::span<const T> values) {
  detail::require(l.kind == DenseArray<T>::kind,
                  "region_write: element kind mismatch");
  detail::require(l.sizes == a.shape(), "region_write: layout does not fit");
  detail::require(values.size() == layout_element_count(l),
                  "region_write: value count does not match the region");
  detail::bytes_to_region(reinterpret_cast<std::byte*>(a.data()), l.sizes,
                          l.subsizes, l.starts, sizeof(T),
                          reinterpret_cast<const std::byte*>(values.data()));
}

/// Transport codec: pack serializes a region for the wire, unpack lands a
/// wire buffer in a region. Wire order is pinned as region row-major.
template <class T>
std::vector<T> pack(const DenseArray<T>& a, const SubarrayLayout& l) {
  return region_read(a, l);
}

template <class T>
void unpack(DenseArray<T>& a, const SubarrayLayout& l,
            std::span<const T> wire) {
  region_write(a, l, wire);
}

}  // namespace parfft
