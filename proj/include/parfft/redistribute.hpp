#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "parfft/common.hpp"
#include "parfft/decomp.hpp"
#include "parfft/dense.hpp"
#include "parfft/subarray.hpp"
#include "parfft/transport.hpp"

namespace parfft {

/// Which grid direction, if any, partitions each array axis. Every grid
/// direction must partition exactly one axis; the rest are local.
struct AxisMap {
  static constexpr int kLocal = -1;

  std::vector<int> dir;  // dir[axis] = grid direction, or kLocal

  bool is_local(std::size_t axis) const { return dir[axis] == kLocal; }

  std::size_t axis_of(int direction) const {
    for (std::size_t a = 0; a < dir.size(); ++a)
      if (dir[a] == direction) return a;
    throw Error("AxisMap: direction partitions no axis");
  }

  bool operator==(const AxisMap&) const = default;
};

inline void validate_axis_map(const AxisMap& am, std::size_t ndim, int ndirs) {
  detail::require(am.dir.size() == ndim, "AxisMap: one entry per axis");
  std::vector<int> seen(static_cast<std::size_t>(ndirs), 0);
  for (int v : am.dir) {
    if (v == AxisMap::kLocal) continue;
    detail::require(v >= 0 && v < ndirs, "AxisMap: direction out of range");
    seen[static_cast<std::size_t>(v)]++;
  }
  for (int c : seen)
    detail::require(c == 1, "AxisMap: every direction must partition exactly one axis");
}

/// Extent of `axis` on `rank` under the given distribution.
inline Block axis_block(const Shape& global, const ProcessGrid& grid,
                        const AxisMap& am, int rank, std::size_t axis) {
  if (am.is_local(axis)) return Block{global[axis], 0};
  const int d = am.dir[axis];
  return decompose(global[axis], grid.dims()[static_cast<std::size_t>(d)],
                   grid.coords(rank)[static_cast<std::size_t>(d)]);
}

inline Shape local_shape_for(const Shape& global, const ProcessGrid& grid,
                             const AxisMap& am, int rank) {
  Shape s(global.size());
  for (std::size_t a = 0; a < global.size(); ++a)
    s[a] = axis_block(global, grid, am, rank, a).count;
  return s;
}

/// One rank's slice of a dense global array distributed over a process grid.
template <class T>
struct DistributedArray {
  Shape global_shape;
  ProcessGrid grid;
  AxisMap axis_map;
  int rank = 0;
  DenseArray<T> local;
};

template <class T>
DistributedArray<T> make_distributed(Shape global, ProcessGrid grid,
                                     AxisMap axis_map, int rank) {
  validate_axis_map(axis_map, global.size(), grid.ndims());
  detail::require(rank >= 0 && rank < grid.total_ranks(),
                  "make_distributed: rank out of range");
  Shape local = local_shape_for(global, grid, axis_map, rank);
  DistributedArray<T> u{std::move(global), std::move(grid),
                        std::move(axis_map), rank, DenseArray<T>(local)};
  return u;
}

namespace detail {

template <class T>
void check_exchange_args(const Group& g, const DenseArray<T>& a, std::size_t v,
                         const DenseArray<T>& b, std::size_t w) {
  const std::size_t d = a.ndim();
  require(b.ndim() == d, "exchange: array ranks differ");
  require(v < d && w < d && v != w, "exchange: need two distinct axes");
  const int m = g.size();
  const int my = g.rank();
  for (std::size_t i = 0; i < d; ++i) {
    if (i == v || i == w) continue;
    require(a.shape()[i] == b.shape()[i],
            "exchange: untouched axes must agree");
  }
  // a holds the full extent of v and this rank's block of w; b is the
  // reverse. The full extents live on a[v] and b[w].
  require(b.shape()[v] == decompose(a.shape()[v], m, my).count,
          "exchange: axis extents are inconsistent with the group split");
  require(a.shape()[w] == decompose(b.shape()[w], m, my).count,
          "exchange: axis extents are inconsistent with the group split");
}

}  // namespace detail

/// Swap which of two axes is partitioned over the group: `a` holds the full
/// extent of axis v and one block of axis w, `b` receives the full extent of
/// axis w and one block of axis v. One generalized all-to-all moves every
/// intersection region directly between peers; nothing is transposed and no
/// intermediate packing buffer is built by the caller.
template <class T>
void exchange(Group& g, const DenseArray<T>& a, std::size_t v,
              DenseArray<T>& b, std::size_t w) {
  detail::check_exchange_args(g, a, v, b, w);
  const auto sa = subarray_sequence(DenseArray<T>::kind, a.shape(), v, g.size());
  const auto sb = subarray_sequence(DenseArray<T>::kind, b.shape(), w, g.size());
  g.alltoallw(a, sa, b, sb);
}

/// Same exchange cached: callers that repeat a redistribution can reuse the
/// layout sequences instead of rebuilding them per call.
template <class T>
void exchange_with_layouts(Group& g, const DenseArray<T>& a,
                           std::span<const SubarrayLayout> sa,
                           DenseArray<T>& b,
                           std::span<const SubarrayLayout> sb) {
  g.alltoallw(a, sa, b, sb);
}

/// Reference route for the same axis swap: explicitly pack peer blocks into
/// a contiguous staging buffer and move them with a flat collective. When
/// both swapped extents divide the group size the packing is a pure local
/// transpose and the flat collective has uniform counts; otherwise counts
/// and displacements are computed per peer. Kept deliberately independent of
/// the subarray codec so the two routes check each other.
template <class T>
void exchange_baseline(Group& g, const DenseArray<T>& a, std::size_t v,
                       DenseArray<T>& b, std::size_t w) {
  detail::check_exchange_args(g, a, v, b, w);
  const std::size_t m = static_cast<std::size_t>(g.size());
  const std::size_t nv = a.shape()[v];  // full extent swapped out
  const std::size_t nw = b.shape()[w];  // full extent swapped in
  std::size_t xs = 1, ys = 1, xr = 1, yr = 1;
  for (std::size_t i = 0; i < v; ++i) xs *= a.shape()[i];
  for (std::size_t i = v + 1; i < a.ndim(); ++i) ys *= a.shape()[i];
  for (std::size_t i = 0; i < w; ++i) xr *= b.shape()[i];
  for (std::size_t i = w + 1; i < b.ndim(); ++i) yr *= b.shape()[i];

  if (nv % m == 0 && nw % m == 0) {
    // Uniform blocks: reshape to expose the peer axis, swap it to the front,
    // move equal-size chunks, and undo on the receive side.
    const std::size_t cv = nv / m;
    const std::size_t cw = nw / m;
    DenseArray<T> send(Shape{xs, m, cv * ys},
                       std::vector<T>(a.data(), a.data() + a.size()));
    DenseArray<T> packed = local_transpose_01(send);
    std::vector<T> received(b.size());
    g.alltoall<T>(packed.span(), received, a.size() / m);
    DenseArray<T> landed(Shape{m, xr, cw * yr}, std::move(received));
    DenseArray<T> unpacked = local_transpose_01(landed);
    std::copy(unpacked.data(), unpacked.data() + unpacked.size(), b.data());
    return;
  }

  // Ragged blocks: explicit per-peer packing with computed displacements.
  std::vector<std::size_t> scounts(m), sdispls(m), rcounts(m), rdispls(m);
  for (std::size_t q = 0; q < m; ++q) {
    scounts[q] = xs * decompose(nv, static_cast<int>(m), static_cast<int>(q)).count * ys;
    rcounts[q] = xr * decompose(nw, static_cast<int>(m), static_cast<int>(q)).count * yr;
    sdispls[q] = q == 0 ? 0 : sdispls[q - 1] + scounts[q - 1];
    rdispls[q] = q == 0 ? 0 : rdispls[q - 1] + rcounts[q - 1];
  }
  std::vector<T> send(a.size());
  for (std::size_t q = 0; q < m; ++q) {
    const Block blk = decompose(nv, static_cast<int>(m), static_cast<int>(q));
    T* out = send.data() + sdispls[q];
    for (std::size_t x = 0; x < xs; ++x)
      for (std::size_t j = 0; j < blk.count; ++j)
        for (std::size_t y = 0; y < ys; ++y)
          out[(x * blk.count + j) * ys + y] =
              a[(x * nv + blk.start + j) * ys + y];
  }
  std::vector<T> received(b.size());
  g.alltoallv<T>(send, scounts, sdispls, received, rcounts, rdispls);
  for (std::size_t p = 0; p < m; ++p) {
    const Block blk = decompose(nw, static_cast<int>(m), static_cast<int>(p));
    const T* in = received.data() + rdispls[p];
    for (std::size_t x = 0; x < xr; ++x)
      for (std::size_t j = 0; j < blk.count; ++j)
        for (std::size_t y = 0; y < yr; ++y)
          b[(x * nw + blk.start + j) * yr + y] =
              in[(x * blk.count + j) * yr + y];
  }
}

enum class RedistMethod { subarray, pack };

/// Per-rank bundle of the world group and this rank's 1-d subgroup along
/// every grid direction. Building it is collective over the world.
struct GridComm {
  Group world;
  std::vector<Group> direction;
};

inline GridComm make_grid_comm(Group& world, const ProcessGrid& grid) {
  detail::require(world.size() == grid.total_ranks(),
                  "make_grid_comm: group size does not match the grid");
  GridComm comm{world, {}};
  comm.direction.reserve(static_cast<std::size_t>(grid.ndims()));
  const auto coords = grid.coords(world.rank());
  for (int d = 0; d < grid.ndims(); ++d) {
    Group sub = world.split(grid.subgroup_index(d, world.rank()),
                            coords[static_cast<std::size_t>(d)]);
    detail::require(sub.size() == grid.dims()[static_cast<std::size_t>(d)] &&
                        sub.rank() == coords[static_cast<std::size_t>(d)],
                    "make_grid_comm: split disagrees with the grid");
    comm.direction.push_back(std::move(sub));
  }
  return comm;
}

/// Move the partition of grid direction `direction` from `from_axis` (which
/// becomes fully local) onto `to_axis` (previously local). Collective over
/// that direction's subgroups; all other directions are untouched.
template <class T>
DistributedArray<T> redistribute(GridComm& comm, const DistributedArray<T>& u,
                                 std::size_t from_axis, std::size_t to_axis,
                                 int direction,
                                 RedistMethod method = RedistMethod::subarray) {
  const std::size_t d = u.global_shape.size();
  detail::require(from_axis < d && to_axis < d && from_axis != to_axis,
                  "redistribute: need two distinct axes");
  detail::require(direction >= 0 && direction < u.grid.ndims(),
                  "redistribute: direction out of range");
  detail::require(u.axis_map.dir[from_axis] == direction,
                  "redistribute: from_axis is not partitioned by direction");
  detail::require(u.axis_map.is_local(to_axis),
                  "redistribute: to_axis is already partitioned");
  AxisMap out_map = u.axis_map;
  out_map.dir[from_axis] = AxisMap::kLocal;
  out_map.dir[to_axis] = direction;
  DistributedArray<T> out =
      make_distributed<T>(u.global_shape, u.grid, out_map, u.rank);
  Group& g = comm.direction[static_cast<std::size_t>(direction)];
  if (method == RedistMethod::subarray)
    exchange(g, u.local, to_axis, out.local, from_axis);
  else
    exchange_baseline(g, u.local, to_axis, out.local, from_axis);
  return out;
}

}  // namespace parfft
