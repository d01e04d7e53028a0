#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <functional>
#include <utility>
#include <variant>
#include <vector>

#include "parfft/common.hpp"
#include "parfft/decomp.hpp"
#include "parfft/dense.hpp"
#include "parfft/fft.hpp"
#include "parfft/redistribute.hpp"
#include "parfft/subarray.hpp"
#include "parfft/transport.hpp"

namespace parfft {

struct TransformStep {
  std::size_t axis;
  Direction direction;

  bool operator==(const TransformStep&) const = default;
};

struct RedistributeStep {
  int direction;          // grid direction whose partition moves
  std::size_t from_axis;  // partitioned before the step, local after
  std::size_t to_axis;    // local before the step, partitioned after

  bool operator==(const RedistributeStep&) const = default;
};

using PlanStep = std::variant<TransformStep, RedistributeStep>;

enum class WorkBufferScheme { two_largest, per_shape };

struct PlanOptions {
  RedistMethod method = RedistMethod::subarray;
  WorkBufferScheme buffers = WorkBufferScheme::two_largest;
};

/// Replicate the global array on every rank: each rank contributes its whole
/// local block and lands every peer's block at that block's global offsets.
template <class T>
DenseArray<T> gather(Group& g, const DistributedArray<T>& u) {
  detail::require(g.size() == u.grid.total_ranks(),
                  "gather: group size does not match the grid");
  const std::size_t m = static_cast<std::size_t>(g.size());
  const Shape local = u.local.shape();
  std::vector<SubarrayLayout> send(
      m, SubarrayLayout(DenseArray<T>::kind, local, local,
                        Shape(local.size(), 0)));
  std::vector<SubarrayLayout> recv;
  recv.reserve(m);
  for (std::size_t p = 0; p < m; ++p) {
    Shape sub(u.global_shape.size());
    Shape st(u.global_shape.size());
    for (std::size_t a = 0; a < u.global_shape.size(); ++a) {
      const Block b = axis_block(u.global_shape, u.grid, u.axis_map,
                                 static_cast<int>(p), a);
      sub[a] = b.count;
      st[a] = b.start;
    }
    recv.emplace_back(DenseArray<T>::kind, u.global_shape, std::move(sub),
                      std::move(st));
  }
  DenseArray<T> out(u.global_shape);
  g.alltoallw(u.local, send, out, recv);
  return out;
}

/// Cut one rank's block out of a replicated global array. Purely local.
template <class T>
DistributedArray<T> scatter(const DenseArray<T>& global,
                            const ProcessGrid& grid, const AxisMap& axis_map,
                            int rank) {
  DistributedArray<T> u =
      make_distributed<T>(global.shape(), grid, axis_map, rank);
  Shape sub(global.ndim()), st(global.ndim());
  for (std::size_t a = 0; a < global.ndim(); ++a) {
    const Block b = axis_block(u.global_shape, grid, axis_map, rank, a);
    sub[a] = b.count;
    st[a] = b.start;
  }
  const SubarrayLayout block(DenseArray<T>::kind, global.shape(), sub, st);
  std::vector<T> vals = region_read(global, block);
  u.local = DenseArray<T>(u.local.shape(), std::move(vals));
  return u;
}

/// Precomputed SPMD program for the full d-dimensional transform of one
/// global shape on one process grid, plus the per-rank work buffers, layout
/// caches, and per-axis line engines needed to run it repeatedly.
///
/// The grid has m directions, m <= d-1. The input distribution assigns
/// direction i to axis i; the forward program first transforms the local
/// axes d-1 .. m, then for i = m-1 .. 0 moves direction i's partition from
/// axis i to axis i+1 and transforms the freshly aligned axis i. It ends
/// with axis 0 local and axis i+1 partitioned by direction i. The backward
/// program is the exact reverse with inverted transform directions.
class Plan {
 public:
  struct Timers {
    double redistribute = 0.0;
    double transform = 0.0;
  };

  /// Collective over `world`, which must cover the whole grid.
  Plan(Group& world, Shape global_shape, ProcessGrid grid,
       PlanOptions options = {})
      : global_(std::move(global_shape)),
        grid_(std::move(grid)),
        options_(options),
        comm_(make_grid_comm(world, grid_)),
        rank_(world.rank()) {
    const std::size_t d = global_.size();
    const std::size_t m = static_cast<std::size_t>(grid_.ndims());
    detail::require(m < d,
                    "Plan: the grid must have fewer directions than the array "
                    "has axes");
    for (std::size_t e : global_)
      detail::require(e >= 1, "Plan: global extents must be positive");

    // Distribution state t = number of partition moves done so far.
    maps_.resize(m + 1);
    shapes_.resize(m + 1);
    sizes_.resize(m + 1);
    for (std::size_t t = 0; t <= m; ++t) {
      AxisMap am{std::vector<int>(d, AxisMap::kLocal)};
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t axis = i >= m - t ? i + 1 : i;
        am.dir[axis] = static_cast<int>(i);
      }
      maps_[t] = std::move(am);
      shapes_[t] = local_shape_for(global_, grid_, maps_[t], rank_);
      sizes_[t] = shape_product(shapes_[t]);
    }

    for (std::size_t axis = d; axis-- > m;)
      forward_.emplace_back(TransformStep{axis, Direction::forward});
    for (std::size_t i = m; i-- > 0;) {
      forward_.emplace_back(
          RedistributeStep{static_cast<int>(i), i, i + 1});
      forward_.emplace_back(TransformStep{i, Direction::forward});
    }
    for (std::size_t i = 0; i < m; ++i) {
      backward_.emplace_back(TransformStep{i, Direction::backward});
      backward_.emplace_back(
          RedistributeStep{static_cast<int>(i), i + 1, i});
    }
    for (std::size_t axis = m; axis < d; ++axis)
      backward_.emplace_back(TransformStep{axis, Direction::backward});

    engines_.reserve(d);
    for (std::size_t axis = 0; axis < d; ++axis)
      engines_.emplace_back(global_[axis]);

    // Work buffers. States alternate between the two buffers; the one
    // serving the parity of the biggest state gets the biggest capacity, so
    // every state fits in its buffer and a redistribution never reads and
    // writes the same storage.
    if (options_.buffers == WorkBufferScheme::two_largest) {
      std::size_t largest_state = 0;
      for (std::size_t t = 1; t <= m; ++t)
        if (sizes_[t] > sizes_[largest_state]) largest_state = t;
      std::vector<std::size_t> sorted = sizes_;
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      const std::size_t cap_big = sorted[0];
      const std::size_t cap_second = sorted[1];
      buffers_.emplace_back(Shape{cap_big});
      buffers_.emplace_back(Shape{cap_second});
      buffer_of_state_.resize(m + 1);
      for (std::size_t t = 0; t <= m; ++t)
        buffer_of_state_[t] = t % 2 == largest_state % 2 ? 0 : 1;
    } else {
      buffer_of_state_.resize(m + 1);
      for (std::size_t t = 0; t <= m; ++t) {
        buffers_.emplace_back(Shape{sizes_[t]});
        buffer_of_state_[t] = t;
      }
    }

    cache_layouts(forward_, forward_cache_, /*start_state=*/0, /*dt=*/1);
    cache_layouts(backward_, backward_cache_, /*start_state=*/m, /*dt=*/-1);
  }

  const Shape& global_shape() const { return global_; }
  const ProcessGrid& grid() const { return grid_; }
  const std::vector<PlanStep>& forward_steps() const { return forward_; }
  const std::vector<PlanStep>& backward_steps() const { return backward_; }
  const AxisMap& input_map() const { return maps_.front(); }
  const AxisMap& output_map() const { return maps_.back(); }
  const std::vector<AxisMap>& state_maps() const { return maps_; }
  const std::vector<Shape>& state_local_shapes() const { return shapes_; }

  std::vector<std::size_t> work_buffer_capacities() const {
    std::vector<std::size_t> caps;
    for (const auto& b : buffers_) caps.push_back(b.size());
    return caps;
  }
  const std::vector<std::size_t>& buffer_of_state() const {
    return buffer_of_state_;
  }

  /// Run the program. Collective over the grid; `in` must carry the plan's
  /// input distribution (forward) or output distribution (backward). When
  /// `timers` is given, per-step costs are accumulated into it using `clock`
  /// (seconds; defaults to the wall clock).
  DistributedArray<Complex> execute(Direction dir,
                                    const DistributedArray<Complex>& in,
                                    Timers* timers = nullptr,
                                    const std::function<double()>& clock_in = {}) {
    const std::size_t m = static_cast<std::size_t>(grid_.ndims());
    const bool fwd = dir == Direction::forward;
    std::size_t t = fwd ? 0 : m;
    check_input(in, t);
    // Timing goes through the caller's clock object (not a copy) so that
    // stateful injected clocks observe every call.
    std::function<double()> fallback;
    if (timers && !clock_in)
      fallback = [] {
        return std::chrono::duration<double>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
      };
    const std::function<double()>& clock = clock_in ? clock_in : fallback;

    DenseArray<Complex>* cur = &buffers_[buffer_of_state_[t]];
    cur->assign_shape(shapes_[t]);
    std::copy(in.local.data(), in.local.data() + in.local.size(), cur->data());

    const auto& steps = fwd ? forward_ : backward_;
    const auto& cache = fwd ? forward_cache_ : backward_cache_;
    for (std::size_t s = 0; s < steps.size(); ++s) {
      const double t0 = timers ? clock() : 0.0;
      if (const auto* tr = std::get_if<TransformStep>(&steps[s])) {
        partial_transform_inplace(*cur, tr->axis, tr->direction,
                                  engines_[tr->axis], &scratch_);
        if (timers) timers->transform += clock() - t0;
      } else {
        const auto& rd = std::get<RedistributeStep>(steps[s]);
        const std::size_t tn = fwd ? t + 1 : t - 1;
        DenseArray<Complex>* nxt = &buffers_[buffer_of_state_[tn]];
        nxt->assign_shape(shapes_[tn]);
        Group& g = comm_.direction[static_cast<std::size_t>(rd.direction)];
        if (options_.method == RedistMethod::subarray) {
          const auto& [sa, sb] = cache[s];
          exchange_with_layouts(g, *cur, sa, *nxt, sb);
        } else {
          exchange_baseline(g, *cur, rd.to_axis, *nxt, rd.from_axis);
        }
        cur = nxt;
        t = tn;
        if (timers) timers->redistribute += clock() - t0;
      }
    }

    DistributedArray<Complex> out = make_distributed<Complex>(
        global_, grid_, maps_[t], rank_);
    std::copy(cur->data(), cur->data() + cur->size(), out.local.data());
    return out;
  }

 private:
  using LayoutPair =
      std::pair<std::vector<SubarrayLayout>, std::vector<SubarrayLayout>>;

  void check_input(const DistributedArray<Complex>& in, std::size_t t) const {
    detail::require(in.global_shape == global_,
                    "Plan::execute: global shape mismatch");
    detail::require(in.grid.dims() == grid_.dims(),
                    "Plan::execute: grid mismatch");
    detail::require(in.rank == rank_, "Plan::execute: rank mismatch");
    detail::require(in.axis_map == maps_[t],
                    "Plan::execute: input distribution does not match the "
                    "plan's entry layout");
    detail::require(in.local.shape() == shapes_[t],
                    "Plan::execute: local shape mismatch");
  }

  void cache_layouts(const std::vector<PlanStep>& steps,
                     std::vector<LayoutPair>& cache, std::size_t start_state,
                     int dt) {
    cache.assign(steps.size(), {});
    std::size_t t = start_state;
    for (std::size_t s = 0; s < steps.size(); ++s) {
      if (!std::holds_alternative<RedistributeStep>(steps[s])) continue;
      const auto& rd = std::get<RedistributeStep>(steps[s]);
      const std::size_t tn = static_cast<std::size_t>(
          static_cast<long long>(t) + dt);
      const int parts =
          grid_.dims()[static_cast<std::size_t>(rd.direction)];
      cache[s] = {subarray_sequence(ElemKind::complex128, shapes_[t],
                                    rd.to_axis, parts),
                  subarray_sequence(ElemKind::complex128, shapes_[tn],
                                    rd.from_axis, parts)};
      t = tn;
    }
  }

  Shape global_;
  ProcessGrid grid_;
  PlanOptions options_;
  GridComm comm_;
  int rank_;
  std::vector<AxisMap> maps_;    // per state
  std::vector<Shape> shapes_;    // per state, this rank
  std::vector<std::size_t> sizes_;
  std::vector<PlanStep> forward_;
  std::vector<PlanStep> backward_;
  std::vector<LayoutPair> forward_cache_;
  std::vector<LayoutPair> backward_cache_;
  std::vector<Fft1d> engines_;   // per axis, length = global extent
  std::vector<DenseArray<Complex>> buffers_;
  std::vector<std::size_t> buffer_of_state_;
  std::vector<Complex> scratch_;
};

inline Plan make_plan(Group& world, Shape global_shape, ProcessGrid grid,
                      PlanOptions options = {}) {
  return Plan(world, std::move(global_shape), std::move(grid), options);
}

}  // namespace parfft
