#ifndef PARMF_DENSE_HPP
#define PARMF_DENSE_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "parmf/types.hpp"

// Small k-by-k dense kernels for the alternating least-squares solves:
// Gram accumulation, unpivoted Cholesky, and the two triangular substitutions.
// Everything operates on caller-owned row-major buffers and is safe to call
// from many workers at once on distinct outputs.

namespace parmf {

template <class Real>
struct SmallMatrix {
    int k = 0;
    std::vector<Real> a;  // row-major k*k

    SmallMatrix() = default;
    explicit SmallMatrix(int order)
        : k(order), a(static_cast<size_t>(order) * order, Real(0)) {}

    Real& operator()(int r, int c) { return a[static_cast<size_t>(r) * k + c]; }
    Real operator()(int r, int c) const { return a[static_cast<size_t>(r) * k + c]; }
};

template <class Real>
using SmallVector = std::vector<Real>;

/// Adds h h^T to the upper triangle of `gram` (row-major k*k).
template <class Real>
inline void gram_add_row_upper(std::span<Real> gram, std::span<const Real> h, int k) {
    for (int r = 0; r < k; ++r) {
        const Real hr = h[r];
        Real* row = gram.data() + static_cast<size_t>(r) * k;
        for (int c = r; c < k; ++c) row[c] += hr * h[c];
    }
}

/// Adds lambda to the diagonal and mirrors the upper triangle into the lower
/// one, so the result is symmetric down to the last bit.
template <class Real>
inline void gram_finish(std::span<Real> gram, Real lambda, int k) {
    for (int r = 0; r < k; ++r) {
        gram[static_cast<size_t>(r) * k + r] += lambda;
        for (int c = r + 1; c < k; ++c)
            gram[static_cast<size_t>(c) * k + r] = gram[static_cast<size_t>(r) * k + c];
    }
}

/// sum_j rows[j] rows[j]^T + lambda I.
template <class Real>
SmallMatrix<Real> gram_plus_ridge(std::span<const SmallVector<Real>> rows,
                                  Real lambda, int k) {
    if (lambda < Real(0)) throw std::invalid_argument("lambda must be >= 0");
    SmallMatrix<Real> g(k);
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != k)
            throw std::invalid_argument("row length does not match k");
        gram_add_row_upper<Real>(g.a, row, k);
    }
    gram_finish<Real>(g.a, lambda, k);
    return g;
}

/// In-place Cholesky of a symmetric positive definite row-major matrix.
/// On return the lower triangle holds L (with L L^T = input) and the strict
/// upper triangle is zeroed. Throws not_positive_definite on a bad pivot,
/// which with a Gram input signals lambda = 0 on a rank-deficient system.
template <class Real>
void cholesky_factor_inplace(std::span<Real> a, int k) {
    for (int j = 0; j < k; ++j) {
        Real d = a[static_cast<size_t>(j) * k + j];
        for (int t = 0; t < j; ++t) {
            const Real l = a[static_cast<size_t>(j) * k + t];
            d -= l * l;
        }
        if (!(d > Real(0)))
            throw not_positive_definite("non-positive pivot at column " +
                                        std::to_string(j));
        const Real ljj = std::sqrt(d);
        a[static_cast<size_t>(j) * k + j] = ljj;
        for (int i = j + 1; i < k; ++i) {
            Real s = a[static_cast<size_t>(i) * k + j];
            for (int t = 0; t < j; ++t)
                s -= a[static_cast<size_t>(i) * k + t] * a[static_cast<size_t>(j) * k + t];
            a[static_cast<size_t>(i) * k + j] = s / ljj;
        }
    }
    for (int r = 0; r < k; ++r)
        for (int c = r + 1; c < k; ++c) a[static_cast<size_t>(r) * k + c] = Real(0);
}

template <class Real>
SmallMatrix<Real> cholesky_factor(const SmallMatrix<Real>& m) {
    SmallMatrix<Real> l = m;
    cholesky_factor_inplace<Real>(l.a, l.k);
    return l;
}

/// Solves L L^T x = b in place (x enters as b). `l` is a lower-triangular
/// Cholesky factor. Throws std::domain_error on a zero diagonal entry.
template <class Real>
void cholesky_solve_inplace(std::span<const Real> l, std::span<Real> x, int k) {
    for (int i = 0; i < k; ++i)
        if (l[static_cast<size_t>(i) * k + i] == Real(0))
            throw std::domain_error("singular triangular factor");
    // forward: L y = b
    for (int i = 0; i < k; ++i) {
        Real s = x[i];
        for (int t = 0; t < i; ++t) s -= l[static_cast<size_t>(i) * k + t] * x[t];
        x[i] = s / l[static_cast<size_t>(i) * k + i];
    }
    // backward: L^T x = y
    for (int i = k - 1; i >= 0; --i) {
        Real s = x[i];
        for (int t = i + 1; t < k; ++t) s -= l[static_cast<size_t>(t) * k + i] * x[t];
        x[i] = s / l[static_cast<size_t>(i) * k + i];
    }
}

template <class Real>
SmallVector<Real> cholesky_solve(const SmallMatrix<Real>& l, const SmallVector<Real>& b) {
    SmallVector<Real> x = b;
    cholesky_solve_inplace<Real>(l.a, x, l.k);
    return x;
}

}  // namespace parmf

#endif  // PARMF_DENSE_HPP
