#ifndef PARMF_BENCH_HPP
#define PARMF_BENCH_HPP

#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "parmf/als.hpp"
#include "parmf/ccd.hpp"
#include "parmf/report.hpp"

// Benchmark driver: runs one training configuration once per requested worker
// count and reduces the runs to a speedup table against the 1-worker baseline.
// The solvers are deterministic in the worker count, so the final-RMSE column
// of a correct run is constant.

namespace parmf {

enum class Algorithm { kAls, kCcd, kCcdpp };

inline const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::kAls: return "als";
        case Algorithm::kCcd: return "ccd";
        case Algorithm::kCcdpp: return "ccdpp";
    }
    return "?";
}

struct RunSpec {
    Algorithm algorithm = Algorithm::kCcdpp;
    int k = 5;
    double lambda = 0.1;
    int outer_iters = 15;
    int inner_iters = 15;
    int workers = 1;
    Precision precision = Precision::kDouble;
    std::uint64_t seed = 0;
};

/// Runs one training according to `spec` on an already-built matrix.
template <class Real>
std::pair<FactorModel<Real>, TrainReport> run_training(
    const RunSpec& spec, const RatingsMatrix<Real>& a,
    span_arg<const Triplet<Real>> probe) {
    switch (spec.algorithm) {
        case Algorithm::kAls: {
            AlsConfig<Real> c;
            c.k = spec.k;
            c.lambda = static_cast<Real>(spec.lambda);
            c.outer_iters = spec.outer_iters;
            c.workers = spec.workers;
            c.seed = spec.seed;
            return als_train(c, a, probe);
        }
        case Algorithm::kCcd:
        case Algorithm::kCcdpp: {
            CcdConfig<Real> c;
            c.k = spec.k;
            c.lambda = static_cast<Real>(spec.lambda);
            c.outer_iters = spec.outer_iters;
            c.inner_iters = spec.inner_iters;
            c.workers = spec.workers;
            c.seed = spec.seed;
            c.variant = spec.algorithm == Algorithm::kCcd ? CcdVariant::kCcd
                                                          : CcdVariant::kCcdpp;
            return c.variant == CcdVariant::kCcd ? ccd_train(c, a, probe)
                                                 : ccdpp_train(c, a, probe);
        }
    }
    throw std::logic_error("unknown algorithm");
}

struct BenchResult {
    std::vector<BenchRow> rows;
    std::vector<TrainReport> reports;
};

/// Runs `spec` once per worker count. The list must contain 1 (the speedup
/// baseline). Times come from the solver-stage totals.
template <class Real>
BenchResult bench_run(RunSpec spec, const RatingsMatrix<Real>& a,
                      span_arg<const Triplet<Real>> probe,
                      std::span<const int> worker_list) {
    if (worker_list.empty())
        throw std::invalid_argument("worker list is empty");
    if (std::find(worker_list.begin(), worker_list.end(), 1) == worker_list.end())
        throw std::invalid_argument("worker list must contain 1 (the baseline)");

    BenchResult result;
    double base_seconds = 0.0;
    bool base_found = false;
    for (const int w : worker_list) {
        spec.workers = w;
        auto [model, report] = run_training(spec, a, probe);
        if (w == 1 && !base_found) {
            base_seconds = report.train_seconds;
            base_found = true;
        }
        result.reports.push_back(std::move(report));
    }
    for (const auto& report : result.reports) {
        BenchRow row;
        row.workers = report.workers;
        row.seconds = report.train_seconds;
        row.speedup_vs_one = speedup(base_seconds, report.train_seconds);
        row.final_rmse = report.final_rmse;
        result.rows.push_back(row);
    }
    return result;
}

}  // namespace parmf

#endif  // PARMF_BENCH_HPP
