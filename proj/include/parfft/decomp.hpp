#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "parfft/common.hpp"

namespace parfft {

/// One part of a 1-d block decomposition: a half-open range
/// [start, start + count) of global indices.
struct Block {
  std::size_t count = 0;
  std::size_t start = 0;

  bool operator==(const Block&) const = default;
};

/// Balanced contiguous split of n indices over `parts` parts. Parts with
/// index below n % parts get one extra element, so sizes differ by at most
/// one and larger parts come first. The parts tile [0, n) in order.
inline Block decompose(std::size_t n, int parts, int part) {
  detail::require(parts >= 1, "decompose: parts must be positive");
  detail::require(part >= 0 && part < parts, "decompose: part out of range");
  const std::size_t q = n / static_cast<std::size_t>(parts);
  const std::size_t r = n % static_cast<std::size_t>(parts);
  const std::size_t p = static_cast<std::size_t>(part);
  Block b;
  if (p < r) {
    b.count = q + 1;
    b.start = (q + 1) * p;
  } else {
    b.count = q;
    b.start = q * p + r;
  }
  return b;
}

/// Factor nprocs into ndims grid extents, non-increasing and as balanced as
/// possible (the lexicographically smallest non-increasing factorization).
inline std::vector<int> dims_create(int nprocs, int ndims) {
  detail::require(nprocs >= 1, "dims_create: nprocs must be positive");
  detail::require(ndims >= 1, "dims_create: ndims must be positive");
  std::vector<int> best;
  std::vector<int> cur(static_cast<std::size_t>(ndims), 1);
  // Enumerate non-increasing factorizations depth-first.
  auto search = [&](auto&& self, int pos, int remaining, int cap) -> void {
    if (pos == ndims - 1) {
      if (remaining > cap) return;
      cur[static_cast<std::size_t>(pos)] = remaining;
      if (best.empty() || cur < best) best = cur;
      return;
    }
    for (int f = std::min(cap, remaining); f >= 1; --f) {
      if (remaining % f != 0) continue;
      cur[static_cast<std::size_t>(pos)] = f;
      self(self, pos + 1, remaining / f, f);
    }
  };
  search(search, 0, nprocs, nprocs);
  return best;
}

/// Cartesian arrangement of ranks 0..nprocs-1 with row-major rank order
/// (the last direction varies fastest). For every direction the grid knows
/// the 1-d subgroups: ranks that differ only in that direction's coordinate,
/// ordered by it.
class ProcessGrid {
 public:
  struct Subgroup {
    std::vector<int> members;  // world ranks, ordered by the varying coordinate
    int position = 0;          // index of the querying rank within members
  };

  ProcessGrid(int nprocs, std::vector<int> dims) : dims_(std::move(dims)) {
    detail::require(!dims_.empty(), "ProcessGrid: need at least one direction");
    long long prod = 1;
    for (int d : dims_) {
      detail::require(d >= 1, "ProcessGrid: grid extents must be positive");
      prod *= d;
    }
    detail::require(prod == nprocs,
                    "ProcessGrid: grid extents must multiply to the rank count");
    nprocs_ = nprocs;
    // Materialize the subgroup table per direction.
    groups_.resize(dims_.size());
    group_of_.assign(dims_.size(), std::vector<int>(size_t(nprocs_), 0));
    for (std::size_t dir = 0; dir < dims_.size(); ++dir) {
      const int nslices = nprocs_ / dims_[dir];
      groups_[dir].assign(static_cast<std::size_t>(nslices), {});
      for (int r = 0; r < nprocs_; ++r) {
        const int slice = slice_index(static_cast<int>(dir), r);
        groups_[dir][static_cast<std::size_t>(slice)].push_back(r);
        group_of_[dir][static_cast<std::size_t>(r)] = slice;
      }
      for (auto& g : groups_[dir])
        std::sort(g.begin(), g.end(), [&](int a, int b) {
          return coords(a)[dir] < coords(b)[dir];
        });
    }
  }

  int total_ranks() const { return nprocs_; }
  int ndims() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }

  std::vector<int> coords(int rank) const {
    detail::require(rank >= 0 && rank < nprocs_, "ProcessGrid: rank out of range");
    std::vector<int> c(dims_.size());
    int rem = rank;
    for (std::size_t i = dims_.size(); i-- > 0;) {
      c[i] = rem % dims_[i];
      rem /= dims_[i];
    }
    return c;
  }

  int rank_of(const std::vector<int>& c) const {
    detail::require(c.size() == dims_.size(), "ProcessGrid: bad coordinate rank");
    int r = 0;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      detail::require(c[i] >= 0 && c[i] < dims_[i],
                      "ProcessGrid: coordinate out of range");
      r = r * dims_[i] + c[i];
    }
    return r;
  }

  /// 1-d subgroup along `direction` containing `rank`.
  Subgroup subgroup(int direction, int rank) const {
    check_direction(direction);
    const auto& members =
        groups_[static_cast<std::size_t>(direction)]
               [static_cast<std::size_t>(slice_of(direction, rank))];
    Subgroup s{members, coords(rank)[static_cast<std::size_t>(direction)]};
    return s;
  }

  /// Identifier of the subgroup along `direction` containing `rank`; equal
  /// for exactly the ranks that share a subgroup. Usable as a split color.
  int subgroup_index(int direction, int rank) const {
    check_direction(direction);
    return slice_of(direction, rank);
  }

 private:
  void check_direction(int direction) const {
    detail::require(direction >= 0 && direction < ndims(),
                    "ProcessGrid: direction out of range");
  }

  int slice_of(int direction, int rank) const {
    detail::require(rank >= 0 && rank < nprocs_, "ProcessGrid: rank out of range");
    return group_of_[static_cast<std::size_t>(direction)]
                    [static_cast<std::size_t>(rank)];
  }

  // Flatten all coordinates except `dir`, row-major over the remaining dims.
  int slice_index(int dir, int rank) const {
    std::vector<int> c = coords(rank);
    int s = 0;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (static_cast<int>(i) == dir) continue;
      s = s * dims_[i] + c[i];
    }
    return s;
  }

  int nprocs_ = 1;
  std::vector<int> dims_;
  std::vector<std::vector<std::vector<int>>> groups_;  // [dir][slice] -> ranks
  std::vector<std::vector<int>> group_of_;             // [dir][rank] -> slice
};

inline ProcessGrid grid_create(int nprocs, std::vector<int> dims) {
  return ProcessGrid(nprocs, std::move(dims));
}

}  // namespace parfft
