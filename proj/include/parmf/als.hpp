#ifndef PARMF_ALS_HPP
#define PARMF_ALS_HPP

#include <chrono>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "parmf/dense.hpp"
#include "parmf/model.hpp"
#include "parmf/report.hpp"
#include "parmf/runtime.hpp"
#include "parmf/sparse.hpp"

// Alternating least squares. Each epoch solves every user row of W exactly
// against the fixed H (normal equations via Cholesky), synchronizes, then
// solves every item row of H against the new W. Rows are independent, so the
// two phases parallelize over row blocks; the Gram accumulation order within
// a row solve is fixed (ascending opposing index), which makes the result
// bit-identical for any worker count.

namespace parmf {

template <class Real>
struct AlsConfig {
    int k = 5;
    Real lambda = Real(0.1);
    int outer_iters = 15;
    int workers = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (k < 1) throw std::invalid_argument("k must be >= 1");
        if (!(lambda > Real(0))) throw std::invalid_argument("als requires lambda > 0");
        if (outer_iters < 1) throw std::invalid_argument("outer_iters must be >= 1");
        if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    }
};

namespace detail {

// Normal-equation solve for one row: out = (F_S^T F_S + lambda I)^(-1) F^T b
// where F is the opposing factor matrix and S the observed slice. `gram` is
// caller-owned k*k scratch. An empty slice short-circuits to the zero vector.
template <class Real>
void solve_row(Slice slice, std::span<const Real> values,
               std::span<const Real> opposing, int k, Real lambda,
               std::span<Real> out, std::span<Real> gram) {
    if (slice.empty()) {
        std::fill(out.begin(), out.end(), Real(0));
        return;
    }
    std::fill(gram.begin(), gram.end(), Real(0));
    std::fill(out.begin(), out.end(), Real(0));
    for (const auto [idx, pos] : slice) {
        std::span<const Real> f{opposing.data() + static_cast<size_t>(idx) * k,
                                static_cast<size_t>(k)};
        gram_add_row_upper<Real>(gram, f, k);
        const Real r = values[pos];
        for (int t = 0; t < k; ++t) out[t] += r * f[t];
    }
    gram_finish<Real>(gram, lambda, k);
    cholesky_factor_inplace<Real>(gram, k);
    cholesky_solve_inplace<Real>(std::span<const Real>(gram.data(), gram.size()),
                                 out, k);
}

}  // namespace detail

/// Exact regularized solve for user row i given the item factors.
template <class Real>
void solve_user_row(const RatingsMatrix<Real>& a, index_t i,
                    span_arg<const Real> item_factors, int k, Real lambda,
                    span_arg<Real> out, span_arg<Real> gram_scratch) {
    detail::solve_row<Real>(a.row_slice(i), a.val_row(), item_factors, k, lambda,
                            out, gram_scratch);
}

template <class Real>
SmallVector<Real> solve_user_row(const RatingsMatrix<Real>& a, index_t i,
                                 span_arg<const Real> item_factors, int k,
                                 Real lambda) {
    SmallVector<Real> out(static_cast<size_t>(k));
    std::vector<Real> gram(static_cast<size_t>(k) * k);
    solve_user_row(a, i, item_factors, k, lambda, std::span<Real>(out), gram);
    return out;
}

/// Exact regularized solve for item row j given the user factors.
template <class Real>
void solve_item_row(const RatingsMatrix<Real>& a, index_t j,
                    span_arg<const Real> user_factors, int k, Real lambda,
                    span_arg<Real> out, span_arg<Real> gram_scratch) {
    detail::solve_row<Real>(a.col_slice(j), a.val_col(), user_factors, k, lambda,
                            out, gram_scratch);
}

template <class Real>
SmallVector<Real> solve_item_row(const RatingsMatrix<Real>& a, index_t j,
                                 span_arg<const Real> user_factors, int k,
                                 Real lambda) {
    SmallVector<Real> out(static_cast<size_t>(k));
    std::vector<Real> gram(static_cast<size_t>(k) * k);
    solve_item_row(a, j, user_factors, k, lambda, std::span<Real>(out), gram);
    return out;
}

/// Worker pool, load-balanced row/column partitions and per-worker scratch
/// for one training run.
template <class Real>
struct AlsRuntime {
    WorkerPool pool;
    Partition users;
    Partition items;
    std::vector<std::vector<Real>> gram;  // one k*k buffer per worker

    AlsRuntime(const RatingsMatrix<Real>& a, int workers, int k)
        : pool(workers),
          users(partition_balanced(row_costs(a), workers)),
          items(partition_balanced(col_costs(a), workers)),
          gram(static_cast<size_t>(workers),
               std::vector<Real>(static_cast<size_t>(k) * k)) {}
};

namespace detail {

template <class Real>
Stage make_user_phase_stage(FactorModel<Real>& model, const RatingsMatrix<Real>& a,
                            Real lambda, AlsRuntime<Real>& rt) {
    const int k = model.rank();
    return Stage{
        "als/update-W",
        &rt.users,
        [&model, &a, lambda, &rt, k](int worker, index_t i) {
            solve_user_row<Real>(a, i, model.h(), k, lambda,
                                 model.user_factors(i), rt.gram[worker]);
        },
        static_cast<std::uint64_t>(model.h().size() * sizeof(Real)),
        static_cast<std::uint64_t>(model.w().size() * sizeof(Real))};
}

template <class Real>
Stage make_item_phase_stage(FactorModel<Real>& model, const RatingsMatrix<Real>& a,
                            Real lambda, AlsRuntime<Real>& rt) {
    const int k = model.rank();
    return Stage{
        "als/update-H",
        &rt.items,
        [&model, &a, lambda, &rt, k](int worker, index_t j) {
            solve_item_row<Real>(a, j, model.w(), k, lambda,
                                 model.item_factors(j), rt.gram[worker]);
        },
        static_cast<std::uint64_t>(model.w().size() * sizeof(Real)),
        static_cast<std::uint64_t>(model.h().size() * sizeof(Real))};
}

}  // namespace detail

/// Recomputes every W row from the current H. All reads see the pre-phase H.
template <class Real>
StageTiming als_update_users(FactorModel<Real>& model, const RatingsMatrix<Real>& a,
                             Real lambda, AlsRuntime<Real>& rt) {
    return run_stage(rt.pool, detail::make_user_phase_stage(model, a, lambda, rt));
}

/// Recomputes every H row from the current W.
template <class Real>
StageTiming als_update_items(FactorModel<Real>& model, const RatingsMatrix<Real>& a,
                             Real lambda, AlsRuntime<Real>& rt) {
    return run_stage(rt.pool, detail::make_item_phase_stage(model, a, lambda, rt));
}

/// One full epoch: W phase, barrier, H phase.
template <class Real>
std::vector<StageTiming> als_epoch(FactorModel<Real>& model,
                                   const RatingsMatrix<Real>& a, Real lambda,
                                   AlsRuntime<Real>& rt) {
    StagePlan plan;
    plan.stages.push_back(detail::make_user_phase_stage(model, a, lambda, rt));
    plan.stages.push_back(detail::make_item_phase_stage(model, a, lambda, rt));
    return run_plan(rt.pool, plan);
}

/// Trains for config.outer_iters epochs from the seeded random-H start and
/// reports per-epoch stage time, objective and probe RMSE.
template <class Real>
std::pair<FactorModel<Real>, TrainReport> als_train(
    const AlsConfig<Real>& config, const RatingsMatrix<Real>& a,
    span_arg<const Triplet<Real>> probe) {
    config.validate();
    for (const auto& t : probe) {
        if (t.user < 0 || t.user >= a.rows() || t.item < 0 || t.item >= a.cols())
            throw std::invalid_argument("probe index outside training dimensions");
    }

    FactorModel<Real> model(a.rows(), a.cols(), config.k);
    init_random_items(model, config.seed);
    AlsRuntime<Real> rt(a, config.workers, config.k);

    TrainReport report;
    report.algorithm = "als";
    report.precision = precision_name(sizeof(Real) == 4 ? Precision::kSingle
                                                        : Precision::kDouble);
    report.workers = config.workers;
    report.k = config.k;
    report.lambda = static_cast<double>(config.lambda);
    report.outer_iters = config.outer_iters;
    report.inner_iters = 1;
    report.seed = config.seed;
    report.users = a.rows();
    report.items = a.cols();
    report.nnz = a.nnz();

    const auto wall0 = std::chrono::steady_clock::now();
    for (int iter = 1; iter <= config.outer_iters; ++iter) {
        const auto timings = als_epoch(model, a, config.lambda, rt);
        report.add_stage_timings(timings);
        IterationRow row;
        row.iteration = iter;
        for (const auto& t : timings) row.seconds += t.seconds;
        row.objective = objective(model, a, static_cast<double>(config.lambda));
        if (!probe.empty()) row.rmse = rmse(model, probe);
        report.train_seconds += row.seconds;
        report.rows.push_back(row);
    }
    const auto wall1 = std::chrono::steady_clock::now();
    report.wall_seconds = std::chrono::duration<double>(wall1 - wall0).count();
    report.final_objective = report.rows.back().objective;
    report.final_rmse = report.rows.back().rmse;
    return {std::move(model), std::move(report)};
}

}  // namespace parmf

#endif  // PARMF_ALS_HPP
