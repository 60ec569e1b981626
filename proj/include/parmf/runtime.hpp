#ifndef PARMF_RUNTIME_HPP
#define PARMF_RUNTIME_HPP

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "parmf/sparse.hpp"
#include "parmf/types.hpp"

// Bulk-synchronous execution substrate shared by both solvers. Work is split
// into contiguous index blocks owned by workers; a stage applies one kernel
// body to every owned index and no worker proceeds past the stage barrier
// until all are done. Everything observable is deterministic in the worker
// count: kernels may only write state attached to their owned indices.

namespace parmf {

/// Contiguous assignment of [0, count) to p workers.
class Partition {
public:
    Partition() : bounds_{0, 0} {}
    Partition(int p, std::vector<index_t> bounds)
        : p_(p), bounds_(std::move(bounds)) {}

    int workers() const { return p_; }
    index_t count() const { return bounds_.back(); }

    std::pair<index_t, index_t> range(int r) const {
        return {bounds_[r], bounds_[r + 1]};
    }

    int owner_of(index_t i) const {
        auto it = std::upper_bound(bounds_.begin(), bounds_.end(), i);
        return static_cast<int>(it - bounds_.begin()) - 1;
    }

    std::vector<index_t> indices_of(int r) const {
        std::vector<index_t> out(static_cast<size_t>(bounds_[r + 1] - bounds_[r]));
        std::iota(out.begin(), out.end(), bounds_[r]);
        return out;
    }

private:
    int p_ = 1;
    std::vector<index_t> bounds_;  // p+1 entries, bounds_[0] == 0
};

/// Even split: block sizes ceil(count/p) or floor(count/p), larger blocks
/// first. Workers past the index supply get empty blocks.
inline Partition partition_uniform(index_t count, int p) {
    if (p < 1) throw std::invalid_argument("worker count must be >= 1");
    std::vector<index_t> bounds(static_cast<size_t>(p) + 1, 0);
    const index_t base = count / p;
    const index_t rem = count % p;
    for (int r = 0; r < p; ++r)
        bounds[r + 1] = bounds[r] + base + (r < rem ? 1 : 0);
    return Partition(p, std::move(bounds));
}

/// Per-index work estimate for a user-side sweep: 4|Omega_i| arithmetic
/// operations for row i.
template <class Real>
std::vector<std::int64_t> row_costs(const RatingsMatrix<Real>& a) {
    std::vector<std::int64_t> c(static_cast<size_t>(a.rows()));
    for (index_t i = 0; i < a.rows(); ++i) c[i] = 4 * a.row_nnz(i);
    return c;
}

/// Column-side mirror of row_costs.
template <class Real>
std::vector<std::int64_t> col_costs(const RatingsMatrix<Real>& a) {
    std::vector<std::int64_t> c(static_cast<size_t>(a.cols()));
    for (index_t j = 0; j < a.cols(); ++j) c[j] = 4 * a.col_nnz(j);
    return c;
}

/// Contiguous partition minimizing the bottleneck (max per-worker cost):
/// binary search on the bottleneck value, then a greedy sweep packing each
/// block up to that budget. Deterministic.
inline Partition partition_balanced(std::span<const std::int64_t> costs, int p) {
    if (p < 1) throw std::invalid_argument("worker count must be >= 1");
    for (auto c : costs)
        if (c < 0) throw std::invalid_argument("costs must be non-negative");
    const index_t count = static_cast<index_t>(costs.size());

    std::int64_t lo = 0, total = 0;
    for (auto c : costs) {
        lo = std::max(lo, c);
        total += c;
    }
    auto blocks_needed = [&](std::int64_t budget) {
        int blocks = 1;
        std::int64_t cur = 0;
        for (auto c : costs) {
            if (cur + c > budget) {
                ++blocks;
                cur = c;
            } else {
                cur += c;
            }
        }
        return blocks;
    };
    std::int64_t hi = total;
    while (lo < hi) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (blocks_needed(mid) <= p) hi = mid;
        else lo = mid + 1;
    }

    std::vector<index_t> bounds;
    bounds.reserve(static_cast<size_t>(p) + 1);
    bounds.push_back(0);
    std::int64_t cur = 0;
    for (index_t i = 0; i < count; ++i) {
        if (cur + costs[i] > lo && static_cast<int>(bounds.size()) <= p - 1) {
            bounds.push_back(i);
            cur = costs[i];
        } else {
            cur += costs[i];
        }
    }
    while (static_cast<int>(bounds.size()) < p + 1) bounds.push_back(count);
    return Partition(p, std::move(bounds));
}

/// Wall time and declared transfer volume of one executed stage.
struct StageTiming {
    std::string name;
    double seconds = 0.0;
    std::uint64_t bytes_in = 0;
    std::uint64_t bytes_out = 0;
};

/// Persistent team of workers executing partitioned kernels with a full
/// barrier after each stage. The calling thread doubles as worker 0; a pool
/// of size p spawns p-1 background threads. A kernel exception stops that
/// worker's slice; the other workers still complete theirs, so the set of
/// recorded errors depends only on the data, and the error of the
/// lowest-numbered failing worker is rethrown after the barrier.
class WorkerPool {
public:
    explicit WorkerPool(int p) : size_(std::max(1, p)) {
        errors_.resize(static_cast<size_t>(size_));
        for (int r = 1; r < size_; ++r)
            threads_.emplace_back([this, r] { worker_loop(r); });
    }

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    ~WorkerPool() {
        {
            std::unique_lock lock(mu_);
            shutdown_ = true;
            ++generation_;
        }
        cv_work_.notify_all();
        for (auto& t : threads_) t.join();
    }

    int size() const { return size_; }

    /// Runs `body(worker, index)` once for every index of the partition and
    /// returns after all workers have finished (the stage barrier).
    void run(const Partition& part, const std::function<void(int, index_t)>& body) {
        if (part.workers() != size_)
            throw std::logic_error("partition worker count does not match pool size");
        if (size_ == 1) {
            auto [b, e] = part.range(0);
            for (index_t i = b; i < e; ++i) body(0, i);
            return;
        }
        {
            std::unique_lock lock(mu_);
            part_ = &part;
            body_ = &body;
            std::fill(errors_.begin(), errors_.end(), nullptr);
            pending_ = size_ - 1;
            ++generation_;
        }
        cv_work_.notify_all();
        run_slice(0);
        {
            std::unique_lock lock(mu_);
            cv_done_.wait(lock, [this] { return pending_ == 0; });
            part_ = nullptr;
            body_ = nullptr;
        }
        for (auto& e : errors_)
            if (e) std::rethrow_exception(e);
    }

private:
    void run_slice(int r) {
        auto [b, e] = part_->range(r);
        try {
            for (index_t i = b; i < e; ++i) (*body_)(r, i);
        } catch (...) {
            errors_[static_cast<size_t>(r)] = std::current_exception();
        }
    }

    void worker_loop(int r) {
        std::uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock lock(mu_);
                cv_work_.wait(lock, [&] { return generation_ != seen; });
                seen = generation_;
                if (shutdown_) return;
            }
            run_slice(r);
            {
                std::unique_lock lock(mu_);
                if (--pending_ == 0) cv_done_.notify_one();
            }
        }
    }

    int size_;
    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::condition_variable cv_work_;
    std::condition_variable cv_done_;
    std::uint64_t generation_ = 0;
    int pending_ = 0;
    bool shutdown_ = false;
    const Partition* part_ = nullptr;
    const std::function<void(int, index_t)>* body_ = nullptr;
    std::vector<std::exception_ptr> errors_;
};

/// One bulk-synchronous stage: a kernel over a partition plus the declared
/// buffer hand-offs into and out of the stage. The byte counts model the
/// host/device copies of a staged device schedule; execution here is host
/// only, so they are accounting, not actual copies.
struct Stage {
    std::string name;
    const Partition* partition = nullptr;
    std::function<void(int, index_t)> body;
    std::uint64_t bytes_in = 0;
    std::uint64_t bytes_out = 0;
};

/// Ordered stages with an implied barrier after each one.
struct StagePlan {
    std::vector<Stage> stages;
};

inline StageTiming run_stage(WorkerPool& pool, const Stage& stage) {
    const auto t0 = std::chrono::steady_clock::now();
    pool.run(*stage.partition, stage.body);
    const auto t1 = std::chrono::steady_clock::now();
    return {stage.name, std::chrono::duration<double>(t1 - t0).count(),
            stage.bytes_in, stage.bytes_out};
}

inline std::vector<StageTiming> run_plan(WorkerPool& pool, const StagePlan& plan) {
    std::vector<StageTiming> timings;
    timings.reserve(plan.stages.size());
    for (const auto& stage : plan.stages)
        timings.push_back(run_stage(pool, stage));
    return timings;
}

/// Sequential wall time divided by parallel wall time for the same workload.
inline double speedup(double seq_seconds, double par_seconds) {
    if (!(par_seconds > 0.0))
        throw std::domain_error("parallel time must be positive");
    return seq_seconds / par_seconds;
}

}  // namespace parmf

#endif  // PARMF_RUNTIME_HPP
