#ifndef PARMF_CCD_HPP
#define PARMF_CCD_HPP

#include <chrono>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "parmf/model.hpp"
#include "parmf/report.hpp"
#include "parmf/runtime.hpp"
#include "parmf/sparse.hpp"

// Coordinate descent solvers.
//
// CCD sweeps single coordinates: for each user row i and feature t it closes
// the 1-D quadratic in w_it over the observed items, applies the shift to the
// residual, then mirrors the sweep over item rows. It runs sequentially.
//
// CCD++ refits one factor column pair per step as a rank-one subproblem: the
// residual is promoted to Rhat = R + w_t h_t^T in place, (u, v) alternate
// through closed-form row updates for a fixed number of inner iterations, and
// the column pair plus the true residual are written back. Every phase is a
// bulk-synchronous stage over a row or column partition; per-row update order
// is fixed, so results are bit-identical for any worker count.

namespace parmf {

enum class CcdVariant { kCcd, kCcdpp };

template <class Real>
struct CcdConfig {
    int k = 5;
    Real lambda = Real(0.1);
    int outer_iters = 15;
    int inner_iters = 15;
    int workers = 1;
    CcdVariant variant = CcdVariant::kCcdpp;
    std::uint64_t seed = 0;

    void validate() const {
        if (k < 1) throw std::invalid_argument("k must be >= 1");
        if (lambda < Real(0)) throw std::invalid_argument("lambda must be >= 0");
        if (outer_iters < 1) throw std::invalid_argument("outer_iters must be >= 1");
        if (inner_iters < 1) throw std::invalid_argument("inner_iters must be >= 1");
        if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Item/user-wise CCD
// ---------------------------------------------------------------------------

/// Closed-form minimizer for coordinate w_it given the residual:
/// z* = sum_j (R_ij + w_it h_jt) h_jt / (lambda + sum_j h_jt^2) over j in
/// Omega_i. A zero denominator (lambda = 0 with no usable terms) yields 0.
template <class Real>
Real ccd_z_star(const FactorModel<Real>& model, const ResidualMatrix<Real>& r,
                index_t i, int t, Real lambda) {
    const auto& a = r.pattern();
    const Real wit = model.w_at(i, t);
    Real num = Real(0), den = lambda;
    for (const auto [j, pos] : a.row_slice(i)) {
        const Real hjt = model.h_at(j, t);
        num += (r.row_value(pos) + wit * hjt) * hjt;
        den += hjt * hjt;
    }
    if (den == Real(0)) return Real(0);
    return num / den;
}

/// Applies z*: shifts the residual row by (z* - w_it) h_jt in both layouts
/// and stores the new coordinate.
template <class Real>
void ccd_apply_z(FactorModel<Real>& model, ResidualMatrix<Real>& r, index_t i,
                 int t, Real z_star) {
    const auto& a = r.pattern();
    const Real delta = z_star - model.w_at(i, t);
    for (const auto [j, pos] : a.row_slice(i))
        r.set_from_row(pos, r.row_value(pos) - delta * model.h_at(j, t));
    model.w_at(i, t) = z_star;
}

/// Column mirror of ccd_z_star for coordinate h_jt over Omega-bar_j.
template <class Real>
Real ccd_s_star(const FactorModel<Real>& model, const ResidualMatrix<Real>& r,
                index_t j, int t, Real lambda) {
    const auto& a = r.pattern();
    const Real hjt = model.h_at(j, t);
    Real num = Real(0), den = lambda;
    for (const auto [i, pos] : a.col_slice(j)) {
        const Real wit = model.w_at(i, t);
        num += (r.col_value(pos) + wit * hjt) * wit;
        den += wit * wit;
    }
    if (den == Real(0)) return Real(0);
    return num / den;
}

template <class Real>
void ccd_apply_s(FactorModel<Real>& model, ResidualMatrix<Real>& r, index_t j,
                 int t, Real s_star) {
    const auto& a = r.pattern();
    const Real delta = s_star - model.h_at(j, t);
    for (const auto [i, pos] : a.col_slice(j))
        r.set_from_col(pos, r.col_value(pos) - delta * model.w_at(i, t));
    model.h_at(j, t) = s_star;
}

/// One CCD epoch: full W sweep (each row cycling t = 0..k-1), then the
/// mirrored H sweep. Each coordinate update is an exact 1-D minimization, so
/// the objective never increases.
template <class Real>
void ccd_epoch(FactorModel<Real>& model, ResidualMatrix<Real>& r, Real lambda) {
    const auto& a = r.pattern();
    const int k = model.rank();
    for (index_t i = 0; i < a.rows(); ++i)
        for (int t = 0; t < k; ++t)
            ccd_apply_z(model, r, i, t, ccd_z_star(model, r, i, t, lambda));
    for (index_t j = 0; j < a.cols(); ++j)
        for (int t = 0; t < k; ++t)
            ccd_apply_s(model, r, j, t, ccd_s_star(model, r, j, t, lambda));
}

// ---------------------------------------------------------------------------
// Feature-wise CCD++
// ---------------------------------------------------------------------------

namespace detail {

template <class Real>
Stage make_build_rhat_stage(ResidualMatrix<Real>& r, std::span<const Real> u,
                            std::span<const Real> v, const Partition& rows) {
    const auto& a = r.pattern();
    return Stage{
        "ccdpp/build-rhat",
        &rows,
        [&r, &a, u, v](int, index_t i) {
            const Real ui = u[i];
            if (ui == Real(0)) return;  // Rhat == R for zeroed factor columns
            const auto row_start = a.row_start();
            const auto col_of = a.col_of();
            auto vals = r.val_row();
            for (offset_t p = row_start[i]; p < row_start[i + 1]; ++p)
                r.set_from_row(p, vals[p] + ui * v[col_of[p]]);
        },
        static_cast<std::uint64_t>((u.size() + v.size()) * sizeof(Real)),
        0};
}

template <class Real>
Stage make_update_u_stage(const ResidualMatrix<Real>& rhat, std::span<Real> u,
                          std::span<const Real> v, Real lambda,
                          const Partition& rows) {
    const auto& a = rhat.pattern();
    return Stage{
        "ccdpp/update-u",
        &rows,
        [&rhat, &a, u, v, lambda](int, index_t i) {
            const auto row_start = a.row_start();
            const auto col_of = a.col_of();
            const auto vals = rhat.val_row();
            Real num = Real(0), den = lambda;
            for (offset_t p = row_start[i]; p < row_start[i + 1]; ++p) {
                const Real vj = v[col_of[p]];
                num += vals[p] * vj;
                den += vj * vj;
            }
            u[i] = den == Real(0) ? Real(0) : num / den;
        },
        0, 0};
}

template <class Real>
Stage make_update_v_stage(const ResidualMatrix<Real>& rhat,
                          std::span<const Real> u, std::span<Real> v,
                          Real lambda, const Partition& cols) {
    const auto& a = rhat.pattern();
    return Stage{
        "ccdpp/update-v",
        &cols,
        [&rhat, &a, u, v, lambda](int, index_t j) {
            const auto col_start = a.col_start();
            const auto row_of = a.row_of();
            const auto vals = rhat.val_col();
            Real num = Real(0), den = lambda;
            for (offset_t q = col_start[j]; q < col_start[j + 1]; ++q) {
                const Real ui = u[row_of[q]];
                num += vals[q] * ui;
                den += ui * ui;
            }
            v[j] = den == Real(0) ? Real(0) : num / den;
        },
        0, 0};
}

template <class Real>
Stage make_writeback_rows_stage(ResidualMatrix<Real>& r, FactorModel<Real>& model,
                                int t, std::span<const Real> u,
                                std::span<const Real> v, const Partition& rows) {
    const auto& a = r.pattern();
    return Stage{
        "ccdpp/writeback-W+R",
        &rows,
        [&r, &a, &model, t, u, v](int, index_t i) {
            const Real ui = u[i];
            model.w_at(i, t) = ui;
            const auto row_start = a.row_start();
            const auto col_of = a.col_of();
            auto vals = r.val_row();
            for (offset_t p = row_start[i]; p < row_start[i + 1]; ++p)
                r.set_from_row(p, vals[p] - ui * v[col_of[p]]);
        },
        0,
        static_cast<std::uint64_t>(u.size() * sizeof(Real))};
}

template <class Real>
Stage make_writeback_cols_stage(FactorModel<Real>& model, int t,
                                std::span<const Real> v, const Partition& cols) {
    return Stage{
        "ccdpp/writeback-H",
        &cols,
        [&model, t, v](int, index_t j) { model.h_at(j, t) = v[j]; },
        0,
        static_cast<std::uint64_t>(v.size() * sizeof(Real))};
}

}  // namespace detail

/// Promotes R to Rhat in place: Rhat_ij = R_ij + u_i v_j over the owned rows,
/// mirrored into both layouts.
template <class Real>
StageTiming ccdpp_build_rhat(ResidualMatrix<Real>& r, span_arg<const Real> u,
                             span_arg<const Real> v, const Partition& rows,
                             WorkerPool& pool) {
    return run_stage(pool, detail::make_build_rhat_stage(r, u, v, rows));
}

/// u_i <- sum_j Rhat_ij v_j / (lambda + sum_j v_j^2) for every owned row.
template <class Real>
StageTiming ccdpp_update_u(const ResidualMatrix<Real>& rhat, span_arg<Real> u,
                           span_arg<const Real> v, Real lambda,
                           const Partition& rows, WorkerPool& pool) {
    return run_stage(pool, detail::make_update_u_stage(rhat, u, v, lambda, rows));
}

/// Column mirror of ccdpp_update_u over the column partition.
template <class Real>
StageTiming ccdpp_update_v(const ResidualMatrix<Real>& rhat,
                           span_arg<const Real> u, span_arg<Real> v,
                           Real lambda, const Partition& cols, WorkerPool& pool) {
    return run_stage(pool, detail::make_update_v_stage(rhat, u, v, lambda, cols));
}

/// Writes (u, v) into factor column t and restores the true residual
/// R = Rhat - u v^T in both layouts.
template <class Real>
std::vector<StageTiming> ccdpp_writeback(ResidualMatrix<Real>& r,
                                         FactorModel<Real>& model, int t,
                                         span_arg<const Real> u,
                                         span_arg<const Real> v,
                                         const Partition& rows,
                                         const Partition& cols, WorkerPool& pool) {
    StagePlan plan;
    plan.stages.push_back(detail::make_writeback_rows_stage(r, model, t, u, v, rows));
    plan.stages.push_back(detail::make_writeback_cols_stage(model, t, v, cols));
    return run_plan(pool, plan);
}

// ---------------------------------------------------------------------------
// Training drivers
// ---------------------------------------------------------------------------

namespace detail {

template <class Real>
TrainReport make_ccd_report(const CcdConfig<Real>& config,
                            const RatingsMatrix<Real>& a, const char* algorithm) {
    TrainReport report;
    report.algorithm = algorithm;
    report.precision = precision_name(sizeof(Real) == 4 ? Precision::kSingle
                                                        : Precision::kDouble);
    report.workers = config.workers;
    report.k = config.k;
    report.lambda = static_cast<double>(config.lambda);
    report.outer_iters = config.outer_iters;
    report.inner_iters = config.inner_iters;
    report.seed = config.seed;
    report.users = a.rows();
    report.items = a.cols();
    report.nnz = a.nnz();
    return report;
}

template <class Real>
void check_probe(const RatingsMatrix<Real>& a, std::span<const Triplet<Real>> probe) {
    for (const auto& t : probe)
        if (t.user < 0 || t.user >= a.rows() || t.item < 0 || t.item >= a.cols())
            throw std::invalid_argument("probe index outside training dimensions");
}

}  // namespace detail

/// Item/user-wise CCD training: outer_iters full W/H sweeps. The coordinate
/// sweeps are inherently ordered, so this variant always runs on one worker,
/// and it has no inner loop (inner_iters is ignored).
template <class Real>
std::pair<FactorModel<Real>, TrainReport> ccd_train(
    const CcdConfig<Real>& config, const RatingsMatrix<Real>& a,
    span_arg<const Triplet<Real>> probe) {
    config.validate();
    detail::check_probe(a, probe);

    FactorModel<Real> model(a.rows(), a.cols(), config.k);
    init_random_items(model, config.seed);
    ResidualMatrix<Real> r = residual_from(a);  // W = 0, so R = A

    auto report = detail::make_ccd_report(config, a, "ccd");
    report.workers = 1;
    report.inner_iters = 1;

    const auto wall0 = std::chrono::steady_clock::now();
    for (int iter = 1; iter <= config.outer_iters; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();
        ccd_epoch(model, r, config.lambda);
        const auto t1 = std::chrono::steady_clock::now();

        IterationRow row;
        row.iteration = iter;
        row.seconds = std::chrono::duration<double>(t1 - t0).count();
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

/// Feature-wise CCD++ training (the staged bulk-synchronous schedule): per
/// outer iteration and factor column t, gather (u, v), build Rhat, alternate
/// inner u/v updates, write the column pair and the restored residual back.
template <class Real>
std::pair<FactorModel<Real>, TrainReport> ccdpp_train(
    const CcdConfig<Real>& config, const RatingsMatrix<Real>& a,
    span_arg<const Triplet<Real>> probe) {
    config.validate();
    detail::check_probe(a, probe);

    FactorModel<Real> model(a.rows(), a.cols(), config.k);
    init_random_items(model, config.seed);
    ResidualMatrix<Real> r = residual_from(a);

    WorkerPool pool(config.workers);
    const Partition rows = partition_balanced(row_costs(a), config.workers);
    const Partition cols = partition_balanced(col_costs(a), config.workers);

    std::vector<Real> u(static_cast<size_t>(a.rows()));
    std::vector<Real> v(static_cast<size_t>(a.cols()));

    auto report = detail::make_ccd_report(config, a, "ccdpp");

    const auto wall0 = std::chrono::steady_clock::now();
    for (int iter = 1; iter <= config.outer_iters; ++iter) {
        IterationRow row;
        row.iteration = iter;
        for (int t = 0; t < config.k; ++t) {
            for (index_t i = 0; i < a.rows(); ++i) u[i] = model.w_at(i, t);
            for (index_t j = 0; j < a.cols(); ++j) v[j] = model.h_at(j, t);

            StagePlan plan;
            plan.stages.push_back(detail::make_build_rhat_stage(r, {u}, {v}, rows));
            for (int inner = 0; inner < config.inner_iters; ++inner) {
                plan.stages.push_back(
                    detail::make_update_u_stage<Real>(r, {u}, {v}, config.lambda, rows));
                plan.stages.push_back(
                    detail::make_update_v_stage<Real>(r, {u}, {v}, config.lambda, cols));
            }
            plan.stages.push_back(
                detail::make_writeback_rows_stage(r, model, t, {u}, {v}, rows));
            plan.stages.push_back(
                detail::make_writeback_cols_stage(model, t, {v}, cols));

            const auto timings = run_plan(pool, plan);
            report.add_stage_timings(timings);
            for (const auto& st : timings) row.seconds += st.seconds;
        }
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

#endif  // PARMF_CCD_HPP
