#include <gtest/gtest.h>

#include "parfft/plan.hpp"
#include "test_support.hpp"

using namespace parfft;

namespace {

// Shorthand builders for expected step lists.
PlanStep T(std::size_t axis, Direction d) { return TransformStep{axis, d}; }
PlanStep R(int dir, std::size_t from, std::size_t to) {
  return RedistributeStep{dir, from, to};
}

std::vector<DistributedArray<Complex>> run_plan(
    const Shape& global, const std::vector<int>& dims,
    const DenseArray<Complex>& input, Direction dir, PlanOptions opts = {}) {
  int nprocs = 1;
  for (int d : dims) nprocs *= d;
  const ProcessGrid grid(nprocs, dims);
  return run_simulated(nprocs, [&](Group& world, int rank) {
    Plan plan = make_plan(world, global, grid, opts);
    const AxisMap& in_map =
        dir == Direction::forward ? plan.input_map() : plan.output_map();
    auto u = scatter(input, grid, in_map, rank);
    return plan.execute(dir, u);
  });
}

DenseArray<Complex> rebuild(const Shape& global, const ProcessGrid& grid,
                            const std::vector<DistributedArray<Complex>>& outs) {
  std::vector<DenseArray<Complex>> locals;
  for (const auto& o : outs) locals.push_back(o.local);
  return testsup::assemble_global(global, grid, outs[0].axis_map, locals);
}

}  // namespace

TEST(PlanSteps, SlabProgram) {
  // d=3, one grid direction: transform axes 2 and 1 locally, then move the
  // partition off axis 0 and transform it.
  const ProcessGrid grid(4, {4});
  run_simulated(4, [&](Group& world, int) {
    Plan plan = make_plan(world, {8, 8, 8}, grid);
    const std::vector<PlanStep> fwd{T(2, Direction::forward),
                                    T(1, Direction::forward), R(0, 0, 1),
                                    T(0, Direction::forward)};
    EXPECT_EQ(plan.forward_steps(), fwd);
    const std::vector<PlanStep> bwd{T(0, Direction::backward), R(0, 1, 0),
                                    T(1, Direction::backward),
                                    T(2, Direction::backward)};
    EXPECT_EQ(plan.backward_steps(), bwd);
    EXPECT_EQ(plan.input_map().dir, (std::vector<int>{0, -1, -1}));
    EXPECT_EQ(plan.output_map().dir, (std::vector<int>{-1, 0, -1}));
  });
}

TEST(PlanSteps, PencilProgram) {
  const ProcessGrid grid(12, {3, 4});
  run_simulated(12, [&](Group& world, int) {
    Plan plan = make_plan(world, {12, 12, 12}, grid);
    const std::vector<PlanStep> fwd{T(2, Direction::forward), R(1, 1, 2),
                                    T(1, Direction::forward), R(0, 0, 1),
                                    T(0, Direction::forward)};
    EXPECT_EQ(plan.forward_steps(), fwd);
    const std::vector<PlanStep> bwd{T(0, Direction::backward), R(0, 1, 0),
                                    T(1, Direction::backward), R(1, 2, 1),
                                    T(2, Direction::backward)};
    EXPECT_EQ(plan.backward_steps(), bwd);
    EXPECT_EQ(plan.input_map().dir, (std::vector<int>{0, 1, -1}));
    EXPECT_EQ(plan.output_map().dir, (std::vector<int>{-1, 0, 1}));
  });
}

TEST(PlanSteps, FourDimThreeDirections) {
  const ProcessGrid grid(8, {2, 2, 2});
  run_simulated(8, [&](Group& world, int) {
    Plan plan = make_plan(world, {4, 4, 4, 4}, grid);
    const std::vector<PlanStep> fwd{T(3, Direction::forward), R(2, 2, 3),
                                    T(2, Direction::forward), R(1, 1, 2),
                                    T(1, Direction::forward), R(0, 0, 1),
                                    T(0, Direction::forward)};
    EXPECT_EQ(plan.forward_steps(), fwd);
    EXPECT_EQ(plan.backward_steps().size(), 7u);
  });
}

TEST(PlanSteps, StateShapesFollowThePartition) {
  // 12^3 pencils on 3x4: every rank sees (4,3,12) -> (4,12,3) -> (12,4,3).
  const ProcessGrid grid(12, {3, 4});
  run_simulated(12, [&](Group& world, int) {
    Plan plan = make_plan(world, {12, 12, 12}, grid);
    const auto& shapes = plan.state_local_shapes();
    ASSERT_EQ(shapes.size(), 3u);
    EXPECT_EQ(shapes[0], (Shape{4, 3, 12}));
    EXPECT_EQ(shapes[1], (Shape{4, 12, 3}));
    EXPECT_EQ(shapes[2], (Shape{12, 4, 3}));
  });
}

TEST(PlanSteps, RequiresFewerDirectionsThanAxes) {
  const ProcessGrid grid(4, {2, 2});
  EXPECT_THROW(run_simulated(4,
                             [&](Group& world, int) {
                               make_plan(world, {8, 8}, grid);
                             }),
               Error);
}

TEST(PlanBuffers, TwoLargestCapacitiesAndAlternation) {
  // Uneven extents make the state sizes differ across ranks and states.
  const ProcessGrid grid(6, {2, 3});
  run_simulated(6, [&](Group& world, int rank) {
    Plan plan = make_plan(world, {8, 9, 10}, grid);
    const auto caps = plan.work_buffer_capacities();
    ASSERT_EQ(caps.size(), 2u);
    std::vector<std::size_t> sizes;
    for (const auto& s : plan.state_local_shapes())
      sizes.push_back(shape_product(s));
    std::vector<std::size_t> sorted = sizes;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    EXPECT_EQ(caps[0], sorted[0]) << "rank " << rank;
    EXPECT_EQ(caps[1], sorted[1]);
    // Adjacent states use different buffers and every state fits its buffer.
    const auto& of = plan.buffer_of_state();
    for (std::size_t t = 0; t + 1 < of.size(); ++t) EXPECT_NE(of[t], of[t + 1]);
    for (std::size_t t = 0; t < of.size(); ++t)
      EXPECT_LE(sizes[t], caps[of[t]]);
  });
}

TEST(PlanBuffers, PerShapeSchemeAllocatesPerState) {
  const ProcessGrid grid(6, {2, 3});
  run_simulated(6, [&](Group& world, int) {
    PlanOptions opts;
    opts.buffers = WorkBufferScheme::per_shape;
    Plan plan = make_plan(world, {8, 9, 10}, grid, opts);
    const auto caps = plan.work_buffer_capacities();
    ASSERT_EQ(caps.size(), 3u);
    for (std::size_t t = 0; t < 3; ++t) {
      EXPECT_EQ(plan.buffer_of_state()[t], t);
      EXPECT_EQ(caps[t], shape_product(plan.state_local_shapes()[t]));
    }
  });
}

TEST(PlanExecute, ConstantFieldConcentratesAtZero) {
  const Shape global{4, 4, 4};
  const ProcessGrid grid(4, {2, 2});
  DenseArray<Complex> ones(global);
  for (std::size_t i = 0; i < ones.size(); ++i) ones[i] = {1.0, 0.0};
  const auto outs = run_plan(global, {2, 2}, ones, Direction::forward);
  const auto spec = rebuild(global, grid, outs);
  EXPECT_NEAR(std::abs(spec[0] - Complex{1.0, 0.0}), 0.0, 1e-14);
  for (std::size_t i = 1; i < spec.size(); ++i)
    EXPECT_NEAR(std::abs(spec[i]), 0.0, 1e-14);
}

TEST(PlanExecute, MatchesSerialReference) {
  const Shape global{8, 9, 10};
  const ProcessGrid grid(6, {2, 3});
  const auto input = testsup::random_complex(global, 60);
  const auto outs = run_plan(global, {2, 3}, input, Direction::forward);
  const auto got = rebuild(global, grid, outs);
  const auto want = dftn_oracle(input, Direction::forward);
  EXPECT_LT(testsup::rel_error(got, want), 1e-12);
}

TEST(PlanExecute, BackwardInvertsForward) {
  const Shape global{6, 5, 4};
  const ProcessGrid grid(6, {2, 3});
  const auto input = testsup::random_complex(global, 61);
  run_simulated(6, [&](Group& world, int rank) {
    Plan plan = make_plan(world, global, grid);
    auto u = scatter(input, grid, plan.input_map(), rank);
    auto hat = plan.execute(Direction::forward, u);
    auto back = plan.execute(Direction::backward, hat);
    EXPECT_EQ(back.axis_map, plan.input_map());
    EXPECT_LT(testsup::rel_error(back.local, u.local), 1e-13);
  });
}

TEST(PlanExecute, RejectsWrongInputDistribution) {
  const Shape global{8, 8, 8};
  const ProcessGrid grid(4, {2, 2});
  run_simulated(4, [&](Group& world, int rank) {
    Plan plan = make_plan(world, global, grid);
    // Build an input carrying the *output* distribution instead.
    auto u = make_distributed<Complex>(global, grid, plan.output_map(), rank);
    EXPECT_THROW(plan.execute(Direction::forward, u), Error);
    world.barrier();
  });
}

TEST(PlanExecute, ElementCountConservedAcrossStates) {
  // Summed over ranks, every intermediate state holds the full array.
  const Shape global{7, 6, 5};
  const ProcessGrid grid(6, {2, 3});
  run_simulated(6, [&](Group& world, int) {
    Plan plan = make_plan(world, global, grid);
    std::size_t per_state[3] = {0, 0, 0};
    for (std::size_t t = 0; t < 3; ++t)
      per_state[t] = shape_product(plan.state_local_shapes()[t]);
    // Collect the totals via the transport itself.
    std::vector<double> send(18), recv(18);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t p = 0; p < 6; ++p)
        send[p * 3 + t] = static_cast<double>(per_state[t]);
    world.alltoall<double>(send, recv, 3);
    for (std::size_t t = 0; t < 3; ++t) {
      double total = 0;
      for (std::size_t p = 0; p < 6; ++p) total += recv[p * 3 + t];
      EXPECT_EQ(total, static_cast<double>(shape_product(global)));
    }
  });
}

TEST(PlanExecute, PackMethodMatchesSubarrayBitwise) {
  const Shape global{8, 9, 10};
  const ProcessGrid grid(6, {2, 3});
  const auto input = testsup::random_complex(global, 62);
  PlanOptions pack_opts;
  pack_opts.method = RedistMethod::pack;
  const auto direct = run_plan(global, {2, 3}, input, Direction::forward);
  const auto staged = run_plan(global, {2, 3}, input, Direction::forward,
                               pack_opts);
  for (std::size_t r = 0; r < 6; ++r)
    EXPECT_TRUE(direct[r].local == staged[r].local);
}

TEST(PlanExecute, CountingClockFillsTimers) {
  const Shape global{8, 8, 8};
  const ProcessGrid grid(4, {2, 2});
  const auto input = testsup::random_complex(global, 63);
  run_simulated(4, [&](Group& world, int rank) {
    Plan plan = make_plan(world, global, grid);
    auto u = scatter(input, grid, plan.input_map(), rank);
    Plan::Timers timers;
    int calls = 0;
    const std::function<double()> clock = [&calls] {
      return static_cast<double>(calls++);
    };
    plan.execute(Direction::forward, u, &timers, clock);
    // d=3 transforms and m=2 redistributions, two clock reads per step.
    EXPECT_EQ(calls, 10);
    EXPECT_EQ(timers.transform, 3.0);
    EXPECT_EQ(timers.redistribute, 2.0);
  });
}

TEST(GatherScatter, RoundTripIsExact) {
  const Shape global{6, 7, 4};
  const ProcessGrid grid(6, {2, 3});
  const AxisMap am{{0, 1, AxisMap::kLocal}};
  const auto reference = testsup::random_complex(global, 64);
  const auto replicas = run_simulated(6, [&](Group& world, int rank) {
    auto u = scatter(reference, grid, am, rank);
    DenseArray<Complex> everything = gather(world, u);
    // Scatter of the gathered array must reproduce the local bitwise.
    auto again = scatter(everything, grid, am, rank);
    EXPECT_TRUE(again.local == u.local);
    return everything;
  });
  for (const auto& rep : replicas) EXPECT_TRUE(rep == reference);
}

TEST(GatherScatter, SingleRankDegenerate) {
  const ProcessGrid grid(1, {1});
  const auto reference = testsup::random_complex({3, 4}, 65);
  run_simulated(1, [&](Group& world, int rank) {
    const AxisMap am{{0, AxisMap::kLocal}};
    auto u = scatter(reference, grid, am, rank);
    EXPECT_TRUE(u.local == reference);
    EXPECT_TRUE(gather(world, u) == reference);
  });
}
