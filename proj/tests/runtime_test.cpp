#include "parmf/runtime.hpp"

#include <atomic>
#include <chrono>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "testutil.hpp"

using namespace parmf;

namespace {

TEST(PartitionUniform, KnownSplits) {
    const auto even = partition_uniform(4, 2);
    EXPECT_EQ(even.range(0), (std::pair<index_t, index_t>{0, 2}));
    EXPECT_EQ(even.range(1), (std::pair<index_t, index_t>{2, 4}));

    const auto odd = partition_uniform(5, 2);
    EXPECT_EQ(odd.range(0).second - odd.range(0).first, 3);
    EXPECT_EQ(odd.range(1).second - odd.range(1).first, 2);

    const auto sparse = partition_uniform(3, 8);
    int empty = 0;
    for (int r = 0; r < 8; ++r)
        if (sparse.range(r).first == sparse.range(r).second) ++empty;
    EXPECT_EQ(empty, 5);

    EXPECT_THROW(partition_uniform(4, 0), std::invalid_argument);
}

TEST(Partition, CompletenessAndOwnership) {
    for (int p : {1, 3, 7}) {
        const auto part = partition_uniform(23, p);
        std::vector<index_t> all;
        for (int r = 0; r < p; ++r) {
            const auto idx = part.indices_of(r);
            for (auto i : idx) {
                EXPECT_EQ(part.owner_of(i), r);
                all.push_back(i);
            }
        }
        std::sort(all.begin(), all.end());
        std::vector<index_t> expect(23);
        std::iota(expect.begin(), expect.end(), 0);
        EXPECT_EQ(all, expect);
    }
}

TEST(PartitionBalanced, SplitsHeavyHeadOffEvenly) {
    // costs 4|Omega_i| for rows with |Omega| = [4,1,1,1,1]: both halves 16
    const std::vector<std::int64_t> costs{16, 4, 4, 4, 4};
    const auto part = partition_balanced(costs, 2);
    EXPECT_EQ(part.range(0), (std::pair<index_t, index_t>{0, 1}));
    EXPECT_EQ(part.range(1), (std::pair<index_t, index_t>{1, 5}));
}

TEST(PartitionBalanced, EqualCostsReduceToUniform) {
    const std::vector<std::int64_t> costs(12, 7);
    const auto bal = partition_balanced(costs, 4);
    const auto uni = partition_uniform(12, 4);
    for (int r = 0; r < 4; ++r) EXPECT_EQ(bal.range(r), uni.range(r));
}

TEST(PartitionBalanced, SingleWorkerTakesAll) {
    const std::vector<std::int64_t> costs{5, 1, 9, 2};
    const auto part = partition_balanced(costs, 1);
    EXPECT_EQ(part.range(0), (std::pair<index_t, index_t>{0, 4}));
}

TEST(PartitionBalanced, NeverWorseThanUniform) {
    std::mt19937 gen(99);
    for (int rep = 0; rep < 20; ++rep) {
        const int count = 1 + static_cast<int>(testutil::bounded(gen, 60));
        const int p = 1 + static_cast<int>(testutil::bounded(gen, 8));
        std::vector<std::int64_t> costs(count);
        for (auto& c : costs) c = testutil::bounded(gen, 50);

        auto bottleneck = [&](const Partition& part) {
            std::int64_t worst = 0;
            for (int r = 0; r < part.workers(); ++r) {
                auto [b, e] = part.range(r);
                std::int64_t s = 0;
                for (index_t i = b; i < e; ++i) s += costs[i];
                worst = std::max(worst, s);
            }
            return worst;
        };
        const auto bal = partition_balanced(costs, p);
        const auto uni = partition_uniform(count, p);
        EXPECT_LE(bottleneck(bal), bottleneck(uni));
        EXPECT_EQ(bal.count(), count);
    }
}

TEST(WorkerPool, ExactlyOnceForAnyWorkerCount) {
    for (int p : {1, 2, 4, 8}) {
        WorkerPool pool(p);
        const auto part = partition_uniform(137, p);
        std::vector<int> hits(137, 0);
        pool.run(part, [&](int, index_t i) { hits[i]++; });
        for (int h : hits) EXPECT_EQ(h, 1);
    }
}

TEST(WorkerPool, IdentityKernelLeavesBuffersAloneAndRecordsTime) {
    WorkerPool pool(2);
    const auto part = partition_uniform(64, 2);
    std::vector<double> buf(64, 1.5);
    Stage stage{"identity", &part, [&](int, index_t i) { (void)buf[i]; }, 128, 128};
    const auto timing = run_stage(pool, stage);
    for (double v : buf) EXPECT_EQ(v, 1.5);
    EXPECT_GT(timing.seconds, 0.0);
    EXPECT_EQ(timing.bytes_in, 128u);
    EXPECT_EQ(timing.name, "identity");
}

TEST(WorkerPool, SurfacesLowestWorkerError) {
    WorkerPool pool(4);
    const auto part = partition_uniform(40, 4);
    // workers 1 and 3 both fail on their first owned index
    auto body = [&](int worker, index_t i) {
        if (worker == 1 && i == part.range(1).first)
            throw std::runtime_error("boom from worker 1");
        if (worker == 3 && i == part.range(3).first)
            throw std::runtime_error("boom from worker 3");
    };
    for (int rep = 0; rep < 10; ++rep) {
        try {
            pool.run(part, body);
            FAIL() << "expected an exception";
        } catch (const std::runtime_error& e) {
            EXPECT_STREQ(e.what(), "boom from worker 1");
        }
    }
}

TEST(WorkerPool, PartitionMismatchIsALogicError) {
    WorkerPool pool(2);
    const auto part = partition_uniform(10, 3);
    EXPECT_THROW(pool.run(part, [](int, index_t) {}), std::logic_error);
}

TEST(WorkerPool, FixedOrderReductionMatchesSequentialSimulation) {
    std::mt19937 gen(12);
    std::vector<double> values(1000);
    for (auto& v : values) v = testutil::uniform(gen, -1.0, 1.0);

    for (int p : {1, 2, 4}) {
        WorkerPool pool(p);
        const auto part = partition_uniform(1000, p);
        std::vector<double> partial(static_cast<size_t>(p), 0.0);
        pool.run(part, [&](int worker, index_t i) { partial[worker] += values[i]; });
        double combined = 0.0;
        for (double s : partial) combined += s;

        // oracle: same grouping, computed sequentially
        double expect = 0.0;
        for (int r = 0; r < p; ++r) {
            double s = 0.0;
            auto [b, e] = part.range(r);
            for (index_t i = b; i < e; ++i) s += values[i];
            expect += s;
        }
        EXPECT_EQ(combined, expect);

        if (p == 1) {
            double plain = 0.0;
            for (double v : values) plain += v;
            EXPECT_EQ(combined, plain);
        }
    }
}

TEST(StagePlan, RunsStagesInOrderWithBarriers) {
    WorkerPool pool(3);
    const auto part = partition_uniform(30, 3);
    std::vector<double> x(30, 0.0);
    StagePlan plan;
    plan.stages.push_back({"fill", &part, [&](int, index_t i) { x[i] = i; }, 0, 0});
    plan.stages.push_back({"double", &part, [&](int, index_t i) { x[i] *= 2.0; }, 0, 0});
    const auto t0 = std::chrono::steady_clock::now();
    const auto timings = run_plan(pool, plan);
    const auto wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (index_t i = 0; i < 30; ++i) EXPECT_EQ(x[i], 2.0 * i);
    ASSERT_EQ(timings.size(), 2u);
    double stage_sum = 0.0;
    for (const auto& t : timings) {
        EXPECT_GE(t.seconds, 0.0);
        stage_sum += t.seconds;
    }
    EXPECT_LE(stage_sum, wall);
}

TEST(Speedup, RatioAndReferenceTimings) {
    EXPECT_DOUBLE_EQ(speedup(10.0, 10.0), 1.0);
    // published multi-core/accelerator timing pairs round to 3.8 and 14.8
    EXPECT_NEAR(speedup(521.512, 136.023), 3.8, 0.05);
    EXPECT_NEAR(speedup(1252.35, 84.7718), 14.8, 0.05);
    EXPECT_THROW(speedup(1.0, 0.0), std::domain_error);
}

}  // namespace
