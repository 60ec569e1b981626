#ifndef PARMF_TESTS_TESTUTIL_HPP
#define PARMF_TESTS_TESTUTIL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <unordered_set>
#include <vector>

#include "parmf/io.hpp"
#include "parmf/model.hpp"
#include "parmf/sparse.hpp"

// Fixture generators and independent oracles. The oracles deliberately avoid
// the library's residual/solver machinery: they recompute everything from
// triplets and dense factor copies so they can catch bookkeeping bugs.

namespace testutil {

using parmf::FactorModel;
using parmf::RatingsMatrix;
using parmf::ResidualMatrix;
using parmf::Triplet;
using parmf::index_t;
using parmf::offset_t;

inline double unit(std::mt19937& gen) {
    return (static_cast<double>(gen()) + 1.0) * (1.0 / 4294967296.0);
}

inline double uniform(std::mt19937& gen, double lo, double hi) {
    return lo + (hi - lo) * unit(gen);
}

inline double gaussian(std::mt19937& gen) {
    const double u1 = unit(gen), u2 = unit(gen);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline std::uint32_t bounded(std::mt19937& gen, std::uint32_t n) {
    return gen() % n;
}

/// Random sparse fixture: `target` distinct (user, item) cells with ratings
/// uniform in [lo, hi].
template <class Real = double>
std::vector<Triplet<Real>> random_triplets(index_t m, index_t n, int target,
                                           std::uint32_t seed, double lo = 1.0,
                                           double hi = 5.0) {
    std::mt19937 gen(seed);
    std::unordered_set<std::int64_t> used;
    std::vector<Triplet<Real>> out;
    while (static_cast<int>(out.size()) < target &&
           out.size() < static_cast<size_t>(m) * n) {
        const index_t i = static_cast<index_t>(bounded(gen, m));
        const index_t j = static_cast<index_t>(bounded(gen, n));
        const std::int64_t key = static_cast<std::int64_t>(i) * n + j;
        if (!used.insert(key).second) continue;
        out.push_back({i, j, static_cast<Real>(uniform(gen, lo, hi))});
    }
    return out;
}

/// Fully observed m x n matrix generated from planted rank-k factors with
/// entries uniform in (0, scale].
template <class Real = double>
std::vector<Triplet<Real>> planted_full(index_t m, index_t n, int k, double scale,
                                        std::uint32_t seed) {
    std::mt19937 gen(seed);
    std::vector<double> w(static_cast<size_t>(m) * k), h(static_cast<size_t>(n) * k);
    for (auto& x : w) x = unit(gen) * scale;
    for (auto& x : h) x = unit(gen) * scale;
    std::vector<Triplet<Real>> out;
    out.reserve(static_cast<size_t>(m) * n);
    for (index_t i = 0; i < m; ++i)
        for (index_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int t = 0; t < k; ++t)
                s += w[static_cast<size_t>(i) * k + t] * h[static_cast<size_t>(j) * k + t];
            out.push_back({i, j, static_cast<Real>(s)});
        }
    return out;
}

/// Rating-survey style synthetic data: a planted low-rank signal plus user
/// and item biases and noise, quantized to the 1..5 star scale, with a
/// popularity-skewed item distribution.
template <class Real = double>
std::vector<Triplet<Real>> synth_ratings(index_t m, index_t n, int true_rank,
                                         std::int64_t target_nnz,
                                         std::uint32_t seed) {
    std::mt19937 gen(seed);
    const double fscale = 0.45 / std::sqrt(static_cast<double>(true_rank));
    std::vector<double> w(static_cast<size_t>(m) * true_rank);
    std::vector<double> h(static_cast<size_t>(n) * true_rank);
    for (auto& x : w) x = gaussian(gen) * fscale;
    for (auto& x : h) x = gaussian(gen) * fscale;
    std::vector<double> bu(m), bi(n);
    for (auto& x : bu) x = gaussian(gen) * 0.35;
    for (auto& x : bi) x = gaussian(gen) * 0.35;

    std::vector<double> cdf(n);
    double acc = 0.0;
    for (index_t j = 0; j < n; ++j) {
        acc += 1.0 / std::pow(static_cast<double>(j) + 1.0, 0.8);
        cdf[j] = acc;
    }
    for (auto& x : cdf) x /= acc;

    std::unordered_set<std::int64_t> used;
    std::vector<Triplet<Real>> out;
    out.reserve(static_cast<size_t>(target_nnz));
    while (static_cast<std::int64_t>(out.size()) < target_nnz) {
        const index_t i = static_cast<index_t>(bounded(gen, static_cast<std::uint32_t>(m)));
        const double r = unit(gen);
        const index_t j = static_cast<index_t>(
            std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
        const std::int64_t key = static_cast<std::int64_t>(i) * n + j;
        if (!used.insert(key).second) continue;
        double score = 3.6 + bu[i] + bi[j] + gaussian(gen) * 0.35;
        for (int t = 0; t < true_rank; ++t)
            score += w[static_cast<size_t>(i) * true_rank + t] *
                     h[static_cast<size_t>(j) * true_rank + t] /
                     (fscale * fscale) * 0.12;
        score = std::min(5.0, std::max(1.0, std::round(score)));
        out.push_back({i, j, static_cast<Real>(score)});
    }
    return out;
}

/// Deterministic probe carve-out for in-memory fixtures: shuffles entry
/// positions and moves the first `probe_count` into the probe.
template <class Real>
void carve_probe(std::vector<Triplet<Real>>& train, std::vector<Triplet<Real>>& probe,
                 size_t probe_count, std::uint32_t seed) {
    std::mt19937 gen(seed);
    for (std::uint32_t i = static_cast<std::uint32_t>(train.size()); i > 1; --i)
        std::swap(train[i - 1], train[bounded(gen, i)]);
    probe.assign(train.end() - static_cast<std::ptrdiff_t>(probe_count), train.end());
    train.resize(train.size() - probe_count);
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Golden-section search for the minimum of a unimodal 1-D function.
inline double golden_minimize(const std::function<double(double)>& f, double lo,
                              double hi, int iters = 200) {
    const double phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < iters; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    return (a + b) / 2.0;
}

/// Minimizer for a 1-D quadratic: golden-section localization followed by one
/// wide-spacing parabolic interpolation (exact for quadratics, and the wide
/// step keeps the vertex formula clear of the golden search's noise floor).
inline double quadratic_minimize(const std::function<double(double)>& f, double lo,
                                 double hi) {
    const double x0 = golden_minimize(f, lo, hi, 80);
    const double h = 1.0;
    const double fa = f(x0 - h), fb = f(x0), fc = f(x0 + h);
    const double denom = fa - 2.0 * fb + fc;  // 2 c h^2 for curvature c
    if (!(denom > 0.0)) return x0;            // flat or degenerate
    return x0 + h * (fa - fc) / (2.0 * denom);
}

/// Single-coordinate objective for w_it as a function of the trial value z,
/// computed from ratings and dense factors only (no residuals):
/// f(z) = sum_{j in Omega_i} (A_ij - (w_i.h_j - w_it h_jt) - z h_jt)^2 + lambda z^2.
template <class Real>
double coordinate_objective_w(const std::vector<Triplet<Real>>& triplets,
                              const FactorModel<Real>& model, index_t i, int t,
                              double lambda, double z) {
    double f = lambda * z * z;
    for (const auto& tr : triplets) {
        if (tr.user != i) continue;
        double dot = 0.0;
        for (int s = 0; s < model.rank(); ++s)
            dot += static_cast<double>(model.w_at(i, s)) *
                   static_cast<double>(model.h_at(tr.item, s));
        const double partial =
            dot - static_cast<double>(model.w_at(i, t)) *
                      static_cast<double>(model.h_at(tr.item, t));
        const double e = static_cast<double>(tr.rating) - partial -
                         z * static_cast<double>(model.h_at(tr.item, t));
        f += e * e;
    }
    return f;
}

/// Column mirror of coordinate_objective_w for h_jt.
template <class Real>
double coordinate_objective_h(const std::vector<Triplet<Real>>& triplets,
                              const FactorModel<Real>& model, index_t j, int t,
                              double lambda, double z) {
    double f = lambda * z * z;
    for (const auto& tr : triplets) {
        if (tr.item != j) continue;
        double dot = 0.0;
        for (int s = 0; s < model.rank(); ++s)
            dot += static_cast<double>(model.w_at(tr.user, s)) *
                   static_cast<double>(model.h_at(j, s));
        const double partial =
            dot - static_cast<double>(model.w_at(tr.user, t)) *
                      static_cast<double>(model.h_at(j, t));
        const double e = static_cast<double>(tr.rating) - partial -
                         z * static_cast<double>(model.w_at(tr.user, t));
        f += e * e;
    }
    return f;
}

/// Largest |R_ij - (A_ij - w_i.h_j)| over all entries, checked in both
/// layouts from scratch.
template <class Real>
double residual_max_error(const RatingsMatrix<Real>& a, const ResidualMatrix<Real>& r,
                          const FactorModel<Real>& model) {
    double worst = 0.0;
    for (index_t i = 0; i < a.rows(); ++i) {
        for (const auto [j, pos] : a.row_slice(i)) {
            double dot = 0.0;
            for (int t = 0; t < model.rank(); ++t)
                dot += static_cast<double>(model.w_at(i, t)) *
                       static_cast<double>(model.h_at(j, t));
            const double expect = static_cast<double>(a.val_row()[pos]) - dot;
            worst = std::max(worst,
                             std::abs(static_cast<double>(r.row_value(pos)) - expect));
        }
    }
    for (index_t j = 0; j < a.cols(); ++j) {
        for (const auto [i, pos] : a.col_slice(j)) {
            double dot = 0.0;
            for (int t = 0; t < model.rank(); ++t)
                dot += static_cast<double>(model.w_at(i, t)) *
                       static_cast<double>(model.h_at(j, t));
            const double expect = static_cast<double>(a.val_col()[pos]) - dot;
            worst = std::max(worst,
                             std::abs(static_cast<double>(r.col_value(pos)) - expect));
        }
    }
    return worst;
}

/// True if the two residual layouts agree bitwise through the cross-links.
template <class Real>
bool residual_layouts_agree(const ResidualMatrix<Real>& r) {
    const auto& a = r.pattern();
    for (offset_t p = 0; p < a.nnz(); ++p)
        if (r.val_row()[p] != r.val_col()[a.row_to_col(p)]) return false;
    return true;
}

/// Dense symmetric solve via Gauss-Jordan elimination with partial pivoting.
/// Independent of the Cholesky path.
inline std::vector<double> dense_solve(std::vector<double> a, std::vector<double> b,
                                       int k) {
    for (int col = 0; col < k; ++col) {
        int piv = col;
        for (int r = col + 1; r < k; ++r)
            if (std::abs(a[r * k + col]) > std::abs(a[piv * k + col])) piv = r;
        for (int c = 0; c < k; ++c) std::swap(a[col * k + c], a[piv * k + c]);
        std::swap(b[col], b[piv]);
        const double d = a[col * k + col];
        for (int c = 0; c < k; ++c) a[col * k + c] /= d;
        b[col] /= d;
        for (int r = 0; r < k; ++r) {
            if (r == col) continue;
            const double factor = a[r * k + col];
            if (factor == 0.0) continue;
            for (int c = 0; c < k; ++c) a[r * k + c] -= factor * a[col * k + c];
            b[r] -= factor * b[col];
        }
    }
    return b;
}

/// Random symmetric positive definite matrix B B^T + 0.1 I.
inline std::vector<double> random_spd(int k, std::mt19937& gen) {
    std::vector<double> b(static_cast<size_t>(k) * k);
    for (auto& x : b) x = uniform(gen, -1.0, 1.0);
    std::vector<double> m(static_cast<size_t>(k) * k, 0.0);
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) {
            double s = 0.0;
            for (int t = 0; t < k; ++t) s += b[r * k + t] * b[c * k + t];
            m[r * k + c] = s;
        }
    for (int d = 0; d < k; ++d) m[d * k + d] += 0.1;
    return m;
}

/// Objective of the rank-one subproblem with (u, v) standing in for factor
/// column t: sum (Rhat_ij - u_i v_j)^2 + lambda(|u|^2 + |v|^2) plus the
/// penalty of the untouched columns. Comparable across phases and equal to
/// the full objective right after writeback.
template <class Real>
double rank_one_objective(const RatingsMatrix<Real>& a, const ResidualMatrix<Real>& rhat,
                          const FactorModel<Real>& model, int t,
                          const std::vector<Real>& u, const std::vector<Real>& v,
                          double lambda) {
    double loss = 0.0;
    for (index_t i = 0; i < a.rows(); ++i)
        for (const auto [j, pos] : a.row_slice(i)) {
            const double e = static_cast<double>(rhat.row_value(pos)) -
                             static_cast<double>(u[i]) * static_cast<double>(v[j]);
            loss += e * e;
        }
    double reg = 0.0;
    for (index_t i = 0; i < a.rows(); ++i)
        for (int s = 0; s < model.rank(); ++s)
            if (s != t) reg += static_cast<double>(model.w_at(i, s)) *
                               static_cast<double>(model.w_at(i, s));
    for (index_t j = 0; j < a.cols(); ++j)
        for (int s = 0; s < model.rank(); ++s)
            if (s != t) reg += static_cast<double>(model.h_at(j, s)) *
                               static_cast<double>(model.h_at(j, s));
    for (const auto x : u) reg += static_cast<double>(x) * static_cast<double>(x);
    for (const auto x : v) reg += static_cast<double>(x) * static_cast<double>(x);
    return loss + lambda * reg;
}

/// Internal triplets -> external-id rows (1-based), e.g. for CLI fixtures.
template <class Real>
std::vector<parmf::RawTriplet> to_raw(const std::vector<Triplet<Real>>& ts) {
    std::vector<parmf::RawTriplet> out;
    out.reserve(ts.size());
    for (const auto& t : ts)
        out.push_back({t.user + 1, t.item + 1, static_cast<double>(t.rating)});
    return out;
}

}  // namespace testutil

#endif  // PARMF_TESTS_TESTUTIL_HPP
