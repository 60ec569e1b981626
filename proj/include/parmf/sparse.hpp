#ifndef PARMF_SPARSE_HPP
#define PARMF_SPARSE_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "parmf/types.hpp"

// Sparse ratings storage kept in both row-major and column-major layouts at
// once, with a cross-link table mapping every row-layout entry position to
// its column-layout position. User-wise sweeps walk the row layout, item-wise
// sweeps walk the column layout, and a value written through either side is
// mirrored into the other in O(1).

namespace parmf {

template <class Real>
struct Triplet {
    index_t user;
    index_t item;
    Real rating;
};

/// One element of a row or column slice: the opposing index and the entry's
/// position in that layout's value array.
struct SliceEntry {
    index_t index;
    offset_t pos;
};

/// Lightweight view over one row (or column) of a dual-layout matrix.
/// Entries come out in strictly increasing index order.
class Slice {
public:
    Slice(const index_t* idx, offset_t first, offset_t count)
        : idx_(idx), first_(first), count_(count) {}

    class iterator {
    public:
        iterator(const index_t* idx, offset_t pos) : idx_(idx), pos_(pos) {}
        SliceEntry operator*() const { return {idx_[pos_], pos_}; }
        iterator& operator++() { ++pos_; return *this; }
        bool operator!=(const iterator& o) const { return pos_ != o.pos_; }
    private:
        const index_t* idx_;
        offset_t pos_;
    };

    iterator begin() const { return {idx_ - first_, first_}; }
    iterator end() const { return {idx_ - first_, first_ + count_}; }
    offset_t size() const { return count_; }
    bool empty() const { return count_ == 0; }
    SliceEntry operator[](offset_t i) const { return {idx_[i], first_ + i}; }

private:
    const index_t* idx_;   // points at the first index of the slice
    offset_t first_;       // entry position of the first element
    offset_t count_;
};

template <class Real>
class RatingsMatrix {
public:
    RatingsMatrix() = default;

    /// Builds both layouts from (user, item, rating) triplets. The result is
    /// canonical: it does not depend on the order of the input.
    /// Throws std::out_of_range for indices outside [0,m)x[0,n) and
    /// std::invalid_argument for duplicate pairs or non-finite ratings.
    static RatingsMatrix from_triplets(std::span<const Triplet<Real>> triplets,
                                       index_t m, index_t n) {
        if (m < 0 || n < 0)
            throw std::invalid_argument("matrix dimensions must be non-negative");
        RatingsMatrix a;
        a.m_ = m;
        a.n_ = n;
        const offset_t nnz = static_cast<offset_t>(triplets.size());

        for (const auto& t : triplets) {
            if (t.user < 0 || t.user >= m)
                throw std::out_of_range("user index " + std::to_string(t.user) +
                                        " out of range for m=" + std::to_string(m));
            if (t.item < 0 || t.item >= n)
                throw std::out_of_range("item index " + std::to_string(t.item) +
                                        " out of range for n=" + std::to_string(n));
            if (!std::isfinite(static_cast<double>(t.rating)))
                throw std::invalid_argument("non-finite rating at user " +
                                            std::to_string(t.user));
        }

        a.row_start_.assign(static_cast<size_t>(m) + 1, 0);
        a.col_start_.assign(static_cast<size_t>(n) + 1, 0);
        a.col_of_.resize(nnz);
        a.row_of_.resize(nnz);
        a.val_row_.resize(nnz);
        a.val_col_.resize(nnz);
        a.row_to_col_.resize(nnz);
        a.col_to_row_.resize(nnz);

        // Stable two-pass counting sort: bucket by column, then by row, so the
        // row layout comes out ordered by (row, col) without a comparison sort.
        for (const auto& t : triplets) a.col_start_[t.item + 1]++;
        for (index_t j = 0; j < n; ++j) a.col_start_[j + 1] += a.col_start_[j];

        std::vector<offset_t> by_col(nnz);
        {
            std::vector<offset_t> fill(a.col_start_.begin(), a.col_start_.end() - 1);
            for (offset_t e = 0; e < nnz; ++e)
                by_col[fill[triplets[e].item]++] = e;
        }

        for (const auto& t : triplets) a.row_start_[t.user + 1]++;
        for (index_t i = 0; i < m; ++i) a.row_start_[i + 1] += a.row_start_[i];
        {
            std::vector<offset_t> fill(a.row_start_.begin(), a.row_start_.end() - 1);
            for (offset_t q = 0; q < nnz; ++q) {
                const auto& t = triplets[by_col[q]];
                const offset_t p = fill[t.user]++;
                a.col_of_[p] = t.item;
                a.val_row_[p] = t.rating;
            }
        }

        for (index_t i = 0; i < m; ++i)
            for (offset_t p = a.row_start_[i] + 1; p < a.row_start_[i + 1]; ++p)
                if (a.col_of_[p - 1] == a.col_of_[p])
                    throw std::invalid_argument(
                        "duplicate rating for user " + std::to_string(i) +
                        ", item " + std::to_string(a.col_of_[p]));

        // Column layout mirrored from the sorted row layout; visiting rows in
        // ascending order keeps each column's row indices strictly increasing.
        {
            std::vector<offset_t> fill(a.col_start_.begin(), a.col_start_.end() - 1);
            for (index_t i = 0; i < m; ++i) {
                for (offset_t p = a.row_start_[i]; p < a.row_start_[i + 1]; ++p) {
                    const offset_t q = fill[a.col_of_[p]]++;
                    a.row_of_[q] = i;
                    a.val_col_[q] = a.val_row_[p];
                    a.row_to_col_[p] = q;
                    a.col_to_row_[q] = p;
                }
            }
        }
        return a;
    }

    index_t rows() const { return m_; }
    index_t cols() const { return n_; }
    offset_t nnz() const { return static_cast<offset_t>(val_row_.size()); }

    std::span<const offset_t> row_start() const { return row_start_; }
    std::span<const index_t> col_of() const { return col_of_; }
    std::span<const Real> val_row() const { return val_row_; }

    std::span<const offset_t> col_start() const { return col_start_; }
    std::span<const index_t> row_of() const { return row_of_; }
    std::span<const Real> val_col() const { return val_col_; }

    /// Cross-link: position of row-layout entry `p` in the column layout.
    offset_t row_to_col(offset_t p) const { return row_to_col_[p]; }
    /// Inverse cross-link.
    offset_t col_to_row(offset_t q) const { return col_to_row_[q]; }
    std::span<const offset_t> xlink() const { return row_to_col_; }

    offset_t row_nnz(index_t i) const { return row_start_[i + 1] - row_start_[i]; }
    offset_t col_nnz(index_t j) const { return col_start_[j + 1] - col_start_[j]; }

    /// Observed items of user i, as (item, row-layout position) pairs.
    Slice row_slice(index_t i) const {
        check_row(i);
        const offset_t b = row_start_[i];
        return Slice(col_of_.data() + b, b, row_start_[i + 1] - b);
    }

    /// Observed users of item j, as (user, column-layout position) pairs.
    Slice col_slice(index_t j) const {
        check_col(j);
        const offset_t b = col_start_[j];
        return Slice(row_of_.data() + b, b, col_start_[j + 1] - b);
    }

    /// Enumerates the matrix back into (row, col)-sorted triplets.
    std::vector<Triplet<Real>> to_triplets() const {
        std::vector<Triplet<Real>> out;
        out.reserve(val_row_.size());
        for (index_t i = 0; i < m_; ++i)
            for (offset_t p = row_start_[i]; p < row_start_[i + 1]; ++p)
                out.push_back({i, col_of_[p], val_row_[p]});
        return out;
    }

    void check_row(index_t i) const {
        if (i < 0 || i >= m_)
            throw std::out_of_range("row " + std::to_string(i) + " out of range");
    }
    void check_col(index_t j) const {
        if (j < 0 || j >= n_)
            throw std::out_of_range("col " + std::to_string(j) + " out of range");
    }

private:
    index_t m_ = 0;
    index_t n_ = 0;
    std::vector<offset_t> row_start_;
    std::vector<index_t> col_of_;
    std::vector<Real> val_row_;
    std::vector<offset_t> col_start_;
    std::vector<index_t> row_of_;
    std::vector<Real> val_col_;
    std::vector<offset_t> row_to_col_;
    std::vector<offset_t> col_to_row_;
};

/// Residual values over a parent matrix's sparsity pattern, kept in both
/// layouts. The parent must outlive the residual. Writes through either
/// layout are mirrored so the two stay value-synchronized entry by entry;
/// concurrent writers must own entry-disjoint regions.
template <class Real>
class ResidualMatrix {
public:
    explicit ResidualMatrix(const RatingsMatrix<Real>& a)
        : a_(&a),
          val_row_(a.val_row().begin(), a.val_row().end()),
          val_col_(a.val_col().begin(), a.val_col().end()) {}

    const RatingsMatrix<Real>& pattern() const { return *a_; }

    std::span<Real> val_row() { return val_row_; }
    std::span<const Real> val_row() const { return val_row_; }
    std::span<Real> val_col() { return val_col_; }
    std::span<const Real> val_col() const { return val_col_; }

    Real row_value(offset_t p) const { return val_row_[p]; }
    Real col_value(offset_t q) const { return val_col_[q]; }

    /// Writes entry `p` of the row layout and mirrors it into the column layout.
    void set_from_row(offset_t p, Real v) {
        val_row_[p] = v;
        val_col_[a_->row_to_col(p)] = v;
    }

    /// Writes entry `q` of the column layout and mirrors it into the row layout.
    void set_from_col(offset_t q, Real v) {
        val_col_[q] = v;
        val_row_[a_->col_to_row(q)] = v;
    }

private:
    const RatingsMatrix<Real>* a_;
    std::vector<Real> val_row_;
    std::vector<Real> val_col_;
};

/// R = A, the residual of the all-zero model.
template <class Real>
ResidualMatrix<Real> residual_from(const RatingsMatrix<Real>& a) {
    return ResidualMatrix<Real>(a);
}

}  // namespace parmf

#endif  // PARMF_SPARSE_HPP
