#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "parfft/common.hpp"
#include "parfft/dense.hpp"
#include "parfft/subarray.hpp"

namespace parfft {

struct SimOptions {
  /// Upper bound on how long a rank may sit inside one collective before the
  /// run is declared stuck. The structural no-progress check below usually
  /// fires long before this; the timeout is a backstop for ranks that spin
  /// outside the transport forever.
  std::chrono::milliseconds stall_timeout{60000};
};

namespace detail {

enum class OpKind { barrier, alltoallw, alltoall, alltoallv, split };

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::barrier: return "barrier";
    case OpKind::alltoallw: return "alltoallw";
    case OpKind::alltoall: return "alltoall";
    case OpKind::alltoallv: return "alltoallv";
    case OpKind::split: return "split";
  }
  return "?";
}

/// One rank's arguments to one collective call, type-erased to bytes. The
/// calling thread blocks until the instance completes, so the pointers stay
/// valid for the duration.
struct Contribution {
  OpKind kind{};
  // alltoallw
  const std::byte* send_base = nullptr;
  std::byte* recv_base = nullptr;
  std::size_t width = 0;
  std::span<const SubarrayLayout> send_layouts{};
  std::span<const SubarrayLayout> recv_layouts{};
  // alltoall / alltoallv (flat element buffers)
  const std::byte* send_flat = nullptr;
  std::byte* recv_flat = nullptr;
  std::size_t count = 0;  // alltoall: elements per peer
  std::span<const std::size_t> scounts{}, sdispls{}, rcounts{}, rdispls{};
  // split in/out
  int color = 0;
  int key = 0;
  int child_id = -1;
  int child_size = 0;
  int child_rank = 0;
};

struct Instance {
  OpKind kind{};
  std::uint64_t seq = 0;
  int expected = 0;
  int arrived = 0;
  int waiters = 0;  // members currently asleep in this instance
  bool done = false;
  bool failed = false;
  std::string error;
  std::chrono::steady_clock::time_point deadline;
  std::vector<std::optional<Contribution>> contribs;  // by group rank
};

/// Shared state behind one simulated world. Every collective funnels through
/// one mutex: the last member to arrive validates the pairwise arguments and
/// performs the whole data movement before anyone wakes, so results never
/// depend on thread scheduling.
class SimEngine {
 public:
  SimEngine(int world_size, SimOptions opts) : opts_(opts), world_(world_size) {
    groups_.push_back(world_size);  // group 0 is the world
    member_seq_.emplace_back(static_cast<std::size_t>(world_size), 0);
  }

  int world_size() const { return world_; }

  /// Submit this rank's part of collective `c` on group `gid` and block
  /// until the instance completes. Returns the contribution with any
  /// out-fields (split results) filled in.
  Contribution collective(int gid, int grank, Contribution c) {
    std::unique_lock<std::mutex> lk(mu_);
    if (aborted_) throw Error(abort_msg_);
    const int gsize = groups_[static_cast<std::size_t>(gid)];
    const std::uint64_t seq =
        member_seq_[static_cast<std::size_t>(gid)]
                   [static_cast<std::size_t>(grank)]++;
    auto it = pending_.find(gid);
    std::shared_ptr<Instance> inst;
    if (it == pending_.end()) {
      inst = std::make_shared<Instance>();
      inst->kind = c.kind;
      inst->seq = seq;
      inst->expected = gsize;
      inst->deadline = std::chrono::steady_clock::now() + opts_.stall_timeout;
      inst->contribs.assign(static_cast<std::size_t>(gsize), std::nullopt);
      pending_.emplace(gid, inst);
    } else {
      inst = it->second;
    }
    if (inst->kind != c.kind || inst->seq != seq) {
      abort_locked("collective mismatch: rank " + std::to_string(grank) +
                   " of group " + std::to_string(gid) + " called " +
                   op_name(c.kind) + " while peers are in " +
                   op_name(inst->kind));
      throw Error(abort_msg_);
    }
    if (inst->contribs[static_cast<std::size_t>(grank)]) {
      abort_locked("duplicate contribution from rank " + std::to_string(grank) +
                   " of group " + std::to_string(gid));
      throw Error(abort_msg_);
    }
    inst->contribs[static_cast<std::size_t>(grank)] = std::move(c);
    inst->arrived++;

    if (inst->arrived == inst->expected) {
      execute_locked(*inst);
      inst->done = true;
      // The sleepers of this instance have their resolution; stop counting
      // them as blocked now, before they physically wake, so a rank racing
      // ahead into its next collective cannot trip the no-progress check.
      blocked_ -= inst->waiters;
      inst->waiters = 0;
      pending_.erase(gid);
      cv_.notify_all();
    } else {
      blocked_++;
      inst->waiters++;
      check_progress_locked(*inst);
      while (!inst->done && !inst->failed && !aborted_) {
        if (cv_.wait_until(lk, inst->deadline) == std::cv_status::timeout &&
            !inst->done && !inst->failed && !aborted_) {
          abort_locked("transport stalled: " + std::string(op_name(inst->kind)) +
                       " on group " + std::to_string(gid) + " saw only " +
                       std::to_string(inst->arrived) + " of " +
                       std::to_string(inst->expected) +
                       " members before the timeout");
        }
      }
      if (!inst->done) {
        // Failure or abort: the completion path never ran for this
        // instance, so this sleeper removes itself from the count.
        blocked_--;
        inst->waiters--;
      }
    }
    if (inst->failed) throw Error(inst->error);
    if (!inst->done) throw Error(abort_msg_);
    return *inst->contribs[static_cast<std::size_t>(grank)];
  }

  void rank_finished() {
    std::lock_guard<std::mutex> lk(mu_);
    finished_++;
    if (blocked_ > 0 && blocked_ + finished_ == world_ && !pending_.empty()) {
      const auto& inst = *pending_.begin()->second;
      abort_locked("deadlock: " + std::string(op_name(inst.kind)) +
                   " is waiting on " +
                   std::to_string(inst.expected - inst.arrived) +
                   " member(s) that already left the simulation");
    }
  }

  void rank_failed(const std::string& what) {
    std::lock_guard<std::mutex> lk(mu_);
    finished_++;
    abort_locked("a rank failed outside the transport: " + what);
  }

  bool aborted() const {
    std::lock_guard<std::mutex> lk(mu_);
    return aborted_;
  }

  std::string abort_message() const {
    std::lock_guard<std::mutex> lk(mu_);
    return abort_msg_;
  }

 private:
  /// Every rank is either blocked in an incomplete collective or has left the
  /// simulation, and a complete instance never lingers (the last arrival
  /// executes it synchronously), so no pending instance can ever fill up:
  /// declare deadlock immediately instead of waiting for the timeout.
  void check_progress_locked(const Instance& current) {
    if (blocked_ + finished_ < world_) return;
    abort_locked("deadlock: " + std::string(op_name(current.kind)) +
                 " cannot complete; every rank is blocked or finished and " +
                 std::to_string(current.expected - current.arrived) +
                 " member(s) are still missing");
  }

  void abort_locked(const std::string& msg) {
    if (aborted_) return;  // first failure wins
    aborted_ = true;
    abort_msg_ = msg;
    for (auto& [gid, inst] : pending_) {
      inst->failed = true;
      inst->error = msg;
    }
    pending_.clear();
    cv_.notify_all();
  }

  void fail_instance_locked(Instance& inst, const std::string& msg) {
    inst.failed = true;
    inst.error = msg;
    abort_locked(msg);
  }

  void execute_locked(Instance& inst) {
    switch (inst.kind) {
      case OpKind::barrier: return;
      case OpKind::split: return execute_split_locked(inst);
      case OpKind::alltoallw: return execute_alltoallw_locked(inst);
      case OpKind::alltoall: return execute_alltoall_locked(inst);
      case OpKind::alltoallv: return execute_alltoallv_locked(inst);
    }
  }

  void execute_split_locked(Instance& inst) {
    // Children are created in ascending color order; within a child, ranks
    // are ordered by (key, parent rank).
    std::map<int, std::vector<int>> by_color;
    for (int p = 0; p < inst.expected; ++p)
      by_color[inst.contribs[static_cast<std::size_t>(p)]->color].push_back(p);
    for (auto& [color, members] : by_color) {
      std::stable_sort(members.begin(), members.end(), [&](int a, int b) {
        return inst.contribs[static_cast<std::size_t>(a)]->key <
               inst.contribs[static_cast<std::size_t>(b)]->key;
      });
      const int child_id = static_cast<int>(groups_.size());
      groups_.push_back(static_cast<int>(members.size()));
      member_seq_.emplace_back(members.size(), 0);
      for (std::size_t i = 0; i < members.size(); ++i) {
        auto& contrib = *inst.contribs[static_cast<std::size_t>(members[i])];
        contrib.child_id = child_id;
        contrib.child_size = static_cast<int>(members.size());
        contrib.child_rank = static_cast<int>(i);
      }
    }
  }

  void execute_alltoallw_locked(Instance& inst) {
    const int m = inst.expected;
    for (int p = 0; p < m; ++p) {
      const auto& cp = *inst.contribs[static_cast<std::size_t>(p)];
      for (int q = 0; q < m; ++q) {
        const auto& cq = *inst.contribs[static_cast<std::size_t>(q)];
        const auto& sl = cp.send_layouts[static_cast<std::size_t>(q)];
        const auto& rl = cq.recv_layouts[static_cast<std::size_t>(p)];
        if (cp.width != cq.width || sl.kind != rl.kind)
          return fail_instance_locked(inst,
                                      "alltoallw: element kind mismatch across ranks");
        if (layout_element_count(sl) != layout_element_count(rl))
          return fail_instance_locked(
              inst, "alltoallw: rank " + std::to_string(p) + " sends " +
                        std::to_string(layout_element_count(sl)) +
                        " elements to rank " + std::to_string(q) +
                        " which expects " +
                        std::to_string(layout_element_count(rl)));
      }
    }
    // Movement in sender-major order; each region travels through a staging
    // buffer in its packed row-major wire form.
    std::vector<std::byte> staging;
    for (int p = 0; p < m; ++p) {
      const auto& cp = *inst.contribs[static_cast<std::size_t>(p)];
      for (int q = 0; q < m; ++q) {
        auto& cq = *inst.contribs[static_cast<std::size_t>(q)];
        const auto& sl = cp.send_layouts[static_cast<std::size_t>(q)];
        const auto& rl = cq.recv_layouts[static_cast<std::size_t>(p)];
        const std::size_t bytes = layout_element_count(sl) * cp.width;
        if (bytes == 0) continue;
        staging.resize(bytes);
        region_to_bytes(cp.send_base, sl.sizes, sl.subsizes, sl.starts,
                        cp.width, staging.data());
        bytes_to_region(cq.recv_base, rl.sizes, rl.subsizes, rl.starts,
                        cq.width, staging.data());
      }
    }
  }

  void execute_alltoall_locked(Instance& inst) {
    const int m = inst.expected;
    const std::size_t count = inst.contribs[0]->count;
    const std::size_t width = inst.contribs[0]->width;
    for (int p = 0; p < m; ++p) {
      const auto& cp = *inst.contribs[static_cast<std::size_t>(p)];
      if (cp.count != count || cp.width != width)
        return fail_instance_locked(inst,
                                    "alltoall: block size mismatch across ranks");
    }
    const std::size_t block = count * width;
    for (int p = 0; p < m; ++p) {
      const auto& cp = *inst.contribs[static_cast<std::size_t>(p)];
      for (int q = 0; q < m; ++q) {
        auto& cq = *inst.contribs[static_cast<std::size_t>(q)];
        std::memcpy(cq.recv_flat + static_cast<std::size_t>(p) * block,
                    cp.send_flat + static_cast<std::size_t>(q) * block, block);
      }
    }
  }

  void execute_alltoallv_locked(Instance& inst) {
    const int m = inst.expected;
    const std::size_t width = inst.contribs[0]->width;
    for (int p = 0; p < m; ++p) {
      const auto& cp = *inst.contribs[static_cast<std::size_t>(p)];
      if (cp.width != width)
        return fail_instance_locked(inst,
                                    "alltoallv: element width mismatch across ranks");
      for (int q = 0; q < m; ++q) {
        const auto& cq = *inst.contribs[static_cast<std::size_t>(q)];
        if (cp.scounts[static_cast<std::size_t>(q)] !=
            cq.rcounts[static_cast<std::size_t>(p)])
          return fail_instance_locked(
              inst, "alltoallv: rank " + std::to_string(p) + " sends " +
                        std::to_string(cp.scounts[static_cast<std::size_t>(q)]) +
                        " elements to rank " + std::to_string(q) +
                        " which expects " +
                        std::to_string(cq.rcounts[static_cast<std::size_t>(p)]));
      }
    }
    for (int p = 0; p < m; ++p) {
      const auto& cp = *inst.contribs[static_cast<std::size_t>(p)];
      for (int q = 0; q < m; ++q) {
        auto& cq = *inst.contribs[static_cast<std::size_t>(q)];
        const std::size_t n = cp.scounts[static_cast<std::size_t>(q)];
        if (n == 0) continue;
        std::memcpy(
            cq.recv_flat + cq.rdispls[static_cast<std::size_t>(p)] * width,
            cp.send_flat + cp.sdispls[static_cast<std::size_t>(q)] * width,
            n * width);
      }
    }
  }

  mutable std::mutex mu_;
  std::condition_variable cv_;
  SimOptions opts_;
  int world_ = 1;
  std::vector<int> groups_;  // group id -> size
  std::vector<std::vector<std::uint64_t>> member_seq_;  // [gid][grank]
  std::unordered_map<int, std::shared_ptr<Instance>> pending_;
  int blocked_ = 0;
  int finished_ = 0;
  bool aborted_ = false;
  std::string abort_msg_;
};

struct GroupAccess;

}  // namespace detail

/// Handle to one rank's membership in one communicator-like group. Handles
/// are cheap to copy within the owning rank's thread; they must not be used
/// from any other thread.
class Group {
 public:
  int size() const { return size_; }
  int rank() const { return rank_; }

  void barrier() {
    detail::Contribution c;
    c.kind = detail::OpKind::barrier;
    engine_->collective(id_, rank_, std::move(c));
  }

  /// Partition the group: ranks passing equal colors land in a common child
  /// group, ordered by (key, parent rank). Collective over the whole group.
  Group split(int color, int key) {
    detail::Contribution c;
    c.kind = detail::OpKind::split;
    c.color = color;
    c.key = key;
    detail::Contribution r = engine_->collective(id_, rank_, std::move(c));
    return Group(engine_, r.child_id, r.child_size, r.child_rank);
  }

  /// Generalized all-to-all: region send_layouts[q] of this rank's send
  /// array lands as region recv_layouts[p] of rank q's recv array, where p
  /// is this rank. Regions cross the wire in their own row-major order.
  /// Receive regions must be pairwise disjoint.
  template <class T>
  void alltoallw(const DenseArray<T>& send,
                 std::span<const SubarrayLayout> send_layouts,
                 DenseArray<T>& recv,
                 std::span<const SubarrayLayout> recv_layouts) {
    const std::size_t m = static_cast<std::size_t>(size_);
    detail::require(send_layouts.size() == m && recv_layouts.size() == m,
                    "alltoallw: need one layout per group member");
    for (std::size_t q = 0; q < m; ++q) {
      detail::require(send_layouts[q].kind == DenseArray<T>::kind &&
                          recv_layouts[q].kind == DenseArray<T>::kind,
                      "alltoallw: layout kind does not match the element type");
      detail::require(send_layouts[q].sizes == send.shape(),
                      "alltoallw: send layout does not match the send array");
      detail::require(recv_layouts[q].sizes == recv.shape(),
                      "alltoallw: recv layout does not match the recv array");
    }
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b)
        detail::require(!regions_overlap(recv_layouts[a], recv_layouts[b]),
                        "alltoallw: receive regions overlap");
    detail::Contribution c;
    c.kind = detail::OpKind::alltoallw;
    c.send_base = reinterpret_cast<const std::byte*>(send.data());
    c.recv_base = reinterpret_cast<std::byte*>(recv.data());
    c.width = sizeof(T);
    c.send_layouts = send_layouts;
    c.recv_layouts = recv_layouts;
    engine_->collective(id_, rank_, std::move(c));
  }

  /// Flat all-to-all with a uniform per-peer element count.
  template <class T>
  void alltoall(std::span<const T> send, std::span<T> recv,
                std::size_t count_per_peer) {
    const std::size_t m = static_cast<std::size_t>(size_);
    detail::require(send.size() == m * count_per_peer &&
                        recv.size() == m * count_per_peer,
                    "alltoall: buffer length must be count * group size");
    detail::Contribution c;
    c.kind = detail::OpKind::alltoall;
    c.send_flat = reinterpret_cast<const std::byte*>(send.data());
    c.recv_flat = reinterpret_cast<std::byte*>(recv.data());
    c.width = sizeof(T);
    c.count = count_per_peer;
    engine_->collective(id_, rank_, std::move(c));
  }

  /// Flat all-to-all with per-peer counts and displacements (in elements).
  template <class T>
  void alltoallv(std::span<const T> send, std::span<const std::size_t> scounts,
                 std::span<const std::size_t> sdispls, std::span<T> recv,
                 std::span<const std::size_t> rcounts,
                 std::span<const std::size_t> rdispls) {
    const std::size_t m = static_cast<std::size_t>(size_);
    detail::require(scounts.size() == m && sdispls.size() == m &&
                        rcounts.size() == m && rdispls.size() == m,
                    "alltoallv: need one count and displacement per member");
    for (std::size_t q = 0; q < m; ++q) {
      detail::require(sdispls[q] + scounts[q] <= send.size(),
                      "alltoallv: send block exceeds the send buffer");
      detail::require(rdispls[q] + rcounts[q] <= recv.size(),
                      "alltoallv: recv block exceeds the recv buffer");
    }
    detail::Contribution c;
    c.kind = detail::OpKind::alltoallv;
    c.send_flat = reinterpret_cast<const std::byte*>(send.data());
    c.recv_flat = reinterpret_cast<std::byte*>(recv.data());
    c.width = sizeof(T);
    c.scounts = scounts;
    c.sdispls = sdispls;
    c.rcounts = rcounts;
    c.rdispls = rdispls;
    engine_->collective(id_, rank_, std::move(c));
  }

 private:
  friend struct detail::GroupAccess;

  Group(std::shared_ptr<detail::SimEngine> engine, int id, int size, int rank)
      : engine_(std::move(engine)), id_(id), size_(size), rank_(rank) {}

  std::shared_ptr<detail::SimEngine> engine_;
  int id_;
  int size_;
  int rank_;
};

namespace detail {

struct GroupAccess {
  static Group make(std::shared_ptr<SimEngine> engine, int id, int size,
                    int rank) {
    return Group(std::move(engine), id, size, rank);
  }
};

}  // namespace detail

/// Run `body(world_group, rank)` on one thread per virtual rank and return
/// the per-rank results in rank order. A collective mismatch, a structural
/// deadlock, or a rank failure aborts every rank and surfaces here as an
/// exception; results are deterministic across runs.
template <class F>
auto run_simulated(int world_size, F body, SimOptions opts = {}) {
  static_assert(std::is_invocable_v<F&, Group&, int>,
                "run_simulated: body must be callable as "
                "body(Group& world, int rank)");
  using R0 = std::invoke_result_t<F&, Group&, int>;
  using R = std::conditional_t<std::is_void_v<R0>, std::monostate, R0>;
  detail::require(world_size >= 1, "run_simulated: need at least one rank");
  auto engine = std::make_shared<detail::SimEngine>(world_size, opts);
  std::vector<std::optional<R>> results(static_cast<std::size_t>(world_size));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(world_size));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(world_size));
  for (int r = 0; r < world_size; ++r) {
    threads.emplace_back([&, r] {
      Group world = detail::GroupAccess::make(engine, 0, world_size, r);
      try {
        if constexpr (std::is_void_v<R0>) {
          body(world, r);
          results[static_cast<std::size_t>(r)] = std::monostate{};
        } else {
          results[static_cast<std::size_t>(r)] = body(world, r);
        }
        engine->rank_finished();
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
        engine->rank_failed(e.what());
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
        engine->rank_failed("unknown exception");
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (engine->aborted()) throw Error(engine->abort_message());
  std::vector<R> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

}  // namespace parfft
