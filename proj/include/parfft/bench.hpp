#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "parfft/common.hpp"
#include "parfft/decomp.hpp"
#include "parfft/dense.hpp"
#include "parfft/fft.hpp"
#include "parfft/plan.hpp"
#include "parfft/redistribute.hpp"
#include "parfft/transport.hpp"

namespace parfft {

struct BenchConfig {
  Shape shape;
  int ranks = 1;
  std::string grid = "auto";  // "auto" or explicit like "2x4"
  RedistMethod method = RedistMethod::subarray;
  int repeats = 50;
  int inner = 3;
  std::uint64_t seed = 1;
  std::string out;  // CSV path; empty = stdout only
  bool capture_forward = false;  // keep one gathered forward result
};

/// Per-rank elapsed seconds for one outer repeat.
struct RepeatSample {
  std::vector<double> total;
  std::vector<double> redist;
  std::vector<double> fft;
};

struct BenchTimings {
  double t_total_min = 0.0;
  double t_redist_min = 0.0;
  double t_fft_min = 0.0;
};

struct BenchRecord {
  BenchConfig config;
  std::vector<int> grid_dims;
  BenchTimings timings;
  bool check_pass = false;
  std::vector<RepeatSample> samples;  // raw, samples[repeat].metric[rank]
  DenseArray<Complex> forward_global;  // only if config.capture_forward
};

using ClockFn = std::function<double()>;
/// Builds one clock per rank; invoked inside that rank's thread, so it must
/// be safe to call concurrently. An empty factory means the wall clock.
using ClockFactory = std::function<ClockFn(int rank)>;

inline ClockFn wall_clock() {
  return [] {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
  };
}

/// The measurement reduction: per repeat take the slowest rank, report the
/// fastest repeat, divided by the transforms per repeat.
inline BenchTimings reduce_protocol(const std::vector<RepeatSample>& samples,
                                    int inner) {
  detail::require(!samples.empty() && inner >= 1,
                  "reduce_protocol: need at least one repeat and inner >= 1");
  auto reduce = [&](auto pick) {
    double best = 0.0;
    bool first = true;
    for (const auto& s : samples) {
      const std::vector<double>& v = pick(s);
      detail::require(!v.empty(), "reduce_protocol: empty rank sample");
      double worst = v[0];
      for (double x : v) worst = std::max(worst, x);
      if (first || worst < best) best = worst;
      first = false;
    }
    return best / static_cast<double>(inner);
  };
  BenchTimings t;
  t.t_total_min = reduce([](const RepeatSample& s) -> const std::vector<double>& { return s.total; });
  t.t_redist_min = reduce([](const RepeatSample& s) -> const std::vector<double>& { return s.redist; });
  t.t_fft_min = reduce([](const RepeatSample& s) -> const std::vector<double>& { return s.fft; });
  return t;
}

/// Deterministic unit-scale complex field: both parts uniform in [-1, 1),
/// drawn from a fixed-sequence generator so every platform sees identical
/// data for a given seed.
inline DenseArray<Complex> random_global(const Shape& shape,
                                         std::uint64_t seed) {
  DenseArray<Complex> a(shape);
  std::mt19937_64 eng(seed);
  auto unit = [&] {
    const double v = static_cast<double>(eng() >> 11) * 0x1.0p-53;
    return 2.0 * v - 1.0;
  };
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double re = unit();
    const double im = unit();
    a[i] = {re, im};
  }
  return a;
}

/// Largest elementwise deviation of `got` from `want`, scaled by the largest
/// magnitude in `want` (absolute when `want` is all zero).
inline double rel_error(const DenseArray<Complex>& got,
                        const DenseArray<Complex>& want) {
  detail::require(got.shape() == want.shape(), "rel_error: shape mismatch");
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    diff = std::max(diff, std::abs(got[i] - want[i]));
    scale = std::max(scale, std::abs(want[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

inline std::string join_x(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(v[i]);
  }
  return s;
}

inline std::string join_x(const Shape& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(v[i]);
  }
  return s;
}

/// Resolve the grid spec against the shape: "auto" factors the ranks over
/// d-1 directions (the most general decomposition the plan supports);
/// explicit specs are validated.
inline std::vector<int> resolve_grid(const BenchConfig& cfg) {
  const std::size_t d = cfg.shape.size();
  detail::require(d >= 2, "config: need at least two axes");
  detail::require(cfg.ranks >= 1, "config: ranks must be positive");
  if (cfg.grid == "auto")
    return dims_create(cfg.ranks, static_cast<int>(d) - 1);
  std::vector<int> dims;
  std::size_t pos = 0;
  const std::string& s = cfg.grid;
  while (pos < s.size()) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s.substr(pos), &used);
    } catch (...) {
      throw Error("config: bad grid spec '" + s + "'");
    }
    detail::require(v >= 1, "config: grid extents must be positive");
    dims.push_back(v);
    pos += used;
    if (pos < s.size()) {
      detail::require(s[pos] == 'x', "config: bad grid spec '" + s + "'");
      ++pos;
      detail::require(pos < s.size(), "config: bad grid spec '" + s + "'");
    }
  }
  detail::require(!dims.empty(), "config: bad grid spec '" + s + "'");
  detail::require(dims.size() <= d - 1,
                  "config: grid needs fewer directions than the shape has axes");
  long long prod = 1;
  for (int v : dims) prod *= v;
  detail::require(prod == cfg.ranks, "config: grid extents must multiply to ranks");
  return dims;
}

inline void validate_config(const BenchConfig& cfg) {
  detail::require(cfg.shape.size() >= 2, "config: need at least two axes");
  for (std::size_t e : cfg.shape)
    detail::require(e >= 1, "config: extents must be positive");
  detail::require(cfg.ranks >= 1, "config: ranks must be positive");
  detail::require(cfg.repeats >= 1, "config: repeats must be positive");
  detail::require(cfg.inner >= 1, "config: inner must be positive");
}

namespace detail {

struct BenchRankResult {
  std::vector<double> total, redist, fft;  // per repeat
  bool check = false;
  DenseArray<Complex> forward_global;
};

}  // namespace detail

/// Run the measurement protocol: `repeats` outer loops, each opening with a
/// barrier and timing `inner` consecutive forward+backward transforms of the
/// same chained data. The round-trip identity of the chained data is the
/// correctness check; timings are only reported when it passes.
inline BenchRecord run_bench(const BenchConfig& cfg,
                             const ClockFactory& clock_factory = {}) {
  validate_config(cfg);
  const std::vector<int> dims = resolve_grid(cfg);
  const DenseArray<Complex> global0 = random_global(cfg.shape, cfg.seed);

  auto body = [&](Group& world, int rank) -> detail::BenchRankResult {
    ProcessGrid grid(cfg.ranks, dims);
    Plan plan(world, cfg.shape, grid,
              PlanOptions{cfg.method, WorkBufferScheme::two_largest});
    DistributedArray<Complex> u =
        scatter<Complex>(global0, grid, plan.input_map(), rank);
    const DenseArray<Complex> u0 = u.local;
    ClockFn clock = clock_factory ? clock_factory(rank) : wall_clock();

    detail::BenchRankResult rr;
    rr.total.reserve(static_cast<std::size_t>(cfg.repeats));
    for (int rep = 0; rep < cfg.repeats; ++rep) {
      world.barrier();
      Plan::Timers timers;
      const double t0 = clock();
      for (int k = 0; k < cfg.inner; ++k) {
        DistributedArray<Complex> v =
            plan.execute(Direction::forward, u, &timers, clock);
        u = plan.execute(Direction::backward, v, &timers, clock);
      }
      const double t1 = clock();
      rr.total.push_back(t1 - t0);
      rr.redist.push_back(timers.redistribute);
      rr.fft.push_back(timers.transform);
    }
    rr.check = rel_error(u.local, u0) <= 1e-10;
    if (cfg.capture_forward) {
      DistributedArray<Complex> fresh =
          scatter<Complex>(global0, grid, plan.input_map(), rank);
      DistributedArray<Complex> v = plan.execute(Direction::forward, fresh);
      rr.forward_global = gather(world, v);
    }
    return rr;
  };

  std::vector<detail::BenchRankResult> per_rank =
      run_simulated(cfg.ranks, body);

  BenchRecord rec;
  rec.config = cfg;
  rec.grid_dims = dims;
  rec.samples.resize(static_cast<std::size_t>(cfg.repeats));
  for (int rep = 0; rep < cfg.repeats; ++rep) {
    auto& s = rec.samples[static_cast<std::size_t>(rep)];
    for (int r = 0; r < cfg.ranks; ++r) {
      const auto& rr = per_rank[static_cast<std::size_t>(r)];
      s.total.push_back(rr.total[static_cast<std::size_t>(rep)]);
      s.redist.push_back(rr.redist[static_cast<std::size_t>(rep)]);
      s.fft.push_back(rr.fft[static_cast<std::size_t>(rep)]);
    }
  }
  rec.check_pass = true;
  for (const auto& rr : per_rank) rec.check_pass = rec.check_pass && rr.check;
  if (rec.check_pass) rec.timings = reduce_protocol(rec.samples, cfg.inner);
  if (cfg.capture_forward) rec.forward_global = per_rank[0].forward_global;
  return rec;
}

inline std::string csv_header() {
  return "method,shape,grid,ranks,repeats,inner,t_total_min,t_redist_min,"
         "t_fft_min,check";
}

inline std::string csv_row(const BenchRecord& rec) {
  char num[3][32];
  std::snprintf(num[0], sizeof num[0], "%.9e", rec.timings.t_total_min);
  std::snprintf(num[1], sizeof num[1], "%.9e", rec.timings.t_redist_min);
  std::snprintf(num[2], sizeof num[2], "%.9e", rec.timings.t_fft_min);
  std::string s;
  s += rec.config.method == RedistMethod::subarray ? "subarray" : "pack";
  s += ',';
  s += join_x(rec.config.shape);
  s += ',';
  s += join_x(rec.grid_dims);
  s += ',';
  s += std::to_string(rec.config.ranks);
  s += ',';
  s += std::to_string(rec.config.repeats);
  s += ',';
  s += std::to_string(rec.config.inner);
  s += ',';
  s += num[0];
  s += ',';
  s += num[1];
  s += ',';
  s += num[2];
  s += ',';
  s += rec.check_pass ? "pass" : "fail";
  return s;
}

struct VerifyReport {
  std::vector<std::pair<std::string, bool>> checks;
  bool all_pass = true;

  void add(std::string name, bool pass) {
    all_pass = all_pass && pass;
    checks.emplace_back(std::move(name), pass);
  }
};

namespace detail {

struct VerifyRankResult {
  DenseArray<Complex> forward_local;
  DenseArray<Complex> back_local;
  std::vector<AxisMap> state_maps;
  Shape forward_local_shape;
  AxisMap output_map{};
  int forward_transforms = 0, forward_redists = 0;
  int backward_transforms = 0, backward_redists = 0;
  bool roundtrip_ok = false;
};

/// Host-side reassembly of one global array from per-rank locals.
inline DenseArray<Complex> assemble(const Shape& global,
                                    const ProcessGrid& grid,
                                    const AxisMap& am,
                                    const std::vector<DenseArray<Complex>>& locals) {
  DenseArray<Complex> out(global);
  for (int r = 0; r < grid.total_ranks(); ++r) {
    Shape sub(global.size()), st(global.size());
    for (std::size_t a = 0; a < global.size(); ++a) {
      const Block b = axis_block(global, grid, am, r, a);
      sub[a] = b.count;
      st[a] = b.start;
    }
    region_write(out, SubarrayLayout(ElemKind::complex128, global, sub, st),
                 locals[static_cast<std::size_t>(r)].span());
  }
  return out;
}

}  // namespace detail

/// Oracle-equivalence suite for one configuration: execute forward and
/// backward on the simulated transport and compare against the serial
/// reference transform, plus the structural plan properties. Guarded to
/// small shapes because the reference is quadratic per axis.
inline VerifyReport verify(const BenchConfig& cfg) {
  validate_config(cfg);
  detail::require(shape_product(cfg.shape) <= (std::size_t{1} << 20),
                  "verify: shape too large for the reference transform "
                  "(needs at most 2^20 elements)");
  const std::vector<int> dims = resolve_grid(cfg);
  const DenseArray<Complex> global0 = random_global(cfg.shape, cfg.seed);

  auto body = [&](Group& world, int rank) -> detail::VerifyRankResult {
    ProcessGrid grid(cfg.ranks, dims);
    Plan plan(world, cfg.shape, grid,
              PlanOptions{cfg.method, WorkBufferScheme::two_largest});
    DistributedArray<Complex> u =
        scatter<Complex>(global0, grid, plan.input_map(), rank);
    DenseArray<Complex> round = gather(world, u);
    DistributedArray<Complex> f = plan.execute(Direction::forward, u);
    DistributedArray<Complex> b = plan.execute(Direction::backward, f);
    detail::VerifyRankResult vr;
    vr.forward_local = f.local;
    vr.back_local = b.local;
    vr.state_maps = plan.state_maps();
    vr.output_map = plan.output_map();
    for (const PlanStep& s : plan.forward_steps()) {
      if (std::holds_alternative<TransformStep>(s))
        vr.forward_transforms++;
      else
        vr.forward_redists++;
    }
    for (const PlanStep& s : plan.backward_steps()) {
      if (std::holds_alternative<TransformStep>(s))
        vr.backward_transforms++;
      else
        vr.backward_redists++;
    }
    vr.roundtrip_ok = round == global0;
    return vr;
  };

  std::vector<detail::VerifyRankResult> per_rank =
      run_simulated(cfg.ranks, body);

  const ProcessGrid grid(cfg.ranks, dims);
  const std::size_t d = cfg.shape.size();
  const std::size_t m = static_cast<std::size_t>(grid.ndims());
  VerifyReport rep;

  std::vector<DenseArray<Complex>> fwd_locals, back_locals;
  for (const auto& vr : per_rank) {
    fwd_locals.push_back(vr.forward_local);
    back_locals.push_back(vr.back_local);
  }
  const AxisMap& out_map = per_rank[0].output_map;
  const AxisMap& in_map = per_rank[0].state_maps.front();
  DenseArray<Complex> fwd_global =
      detail::assemble(cfg.shape, grid, out_map, fwd_locals);
  DenseArray<Complex> back_global =
      detail::assemble(cfg.shape, grid, in_map, back_locals);

  const DenseArray<Complex> ref = dftn_oracle(global0, Direction::forward);
  rep.add("forward matches the serial n-dim reference (<= 1e-10 relative)",
          rel_error(fwd_global, ref) <= 1e-10);
  rep.add("backward inverts forward (<= 1e-12 relative)",
          rel_error(back_global, global0) <= 1e-12);

  bool counts_ok = true;
  for (const auto& vr : per_rank)
    counts_ok = counts_ok && vr.forward_transforms == static_cast<int>(d) &&
                vr.forward_redists == static_cast<int>(m) &&
                vr.backward_transforms == static_cast<int>(d) &&
                vr.backward_redists == static_cast<int>(m);
  rep.add("plan has d transform stages and m redistributions both ways",
          counts_ok);

  bool conserve_ok = true;
  for (const AxisMap& am : per_rank[0].state_maps) {
    std::size_t total = 0;
    for (int r = 0; r < grid.total_ranks(); ++r)
      total += shape_product(local_shape_for(cfg.shape, grid, am, r));
    conserve_ok = conserve_ok && total == shape_product(cfg.shape);
  }
  rep.add("every distribution state conserves the element count", conserve_ok);

  bool round_ok = true;
  for (const auto& vr : per_rank) round_ok = round_ok && vr.roundtrip_ok;
  rep.add("scatter then gather reproduces the input bitwise", round_ok);

  return rep;
}

}  // namespace parfft
