#ifndef PARMF_MODEL_HPP
#define PARMF_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "parmf/sparse.hpp"
#include "parmf/types.hpp"

namespace parmf {

/// Rank-k latent factor model: user factors W (m x k) and item factors H
/// (n x k), both row-major. A rating is predicted as the dot product of a
/// user row and an item row.
template <class Real>
class FactorModel {
public:
    FactorModel() = default;
    FactorModel(index_t m, index_t n, int k)
        : m_(m), n_(n), k_(k),
          w_(static_cast<size_t>(m) * k, Real(0)),
          h_(static_cast<size_t>(n) * k, Real(0)) {
        if (k < 1) throw std::invalid_argument("rank must be >= 1");
    }

    index_t users() const { return m_; }
    index_t items() const { return n_; }
    int rank() const { return k_; }

    std::span<Real> user_factors(index_t i) {
        return {w_.data() + static_cast<size_t>(i) * k_, static_cast<size_t>(k_)};
    }
    std::span<const Real> user_factors(index_t i) const {
        return {w_.data() + static_cast<size_t>(i) * k_, static_cast<size_t>(k_)};
    }
    std::span<Real> item_factors(index_t j) {
        return {h_.data() + static_cast<size_t>(j) * k_, static_cast<size_t>(k_)};
    }
    std::span<const Real> item_factors(index_t j) const {
        return {h_.data() + static_cast<size_t>(j) * k_, static_cast<size_t>(k_)};
    }

    Real& w_at(index_t i, int t) { return w_[static_cast<size_t>(i) * k_ + t]; }
    Real w_at(index_t i, int t) const { return w_[static_cast<size_t>(i) * k_ + t]; }
    Real& h_at(index_t j, int t) { return h_[static_cast<size_t>(j) * k_ + t]; }
    Real h_at(index_t j, int t) const { return h_[static_cast<size_t>(j) * k_ + t]; }

    std::span<Real> w() { return w_; }
    std::span<const Real> w() const { return w_; }
    std::span<Real> h() { return h_; }
    std::span<const Real> h() const { return h_; }

    bool operator==(const FactorModel& o) const {
        return m_ == o.m_ && n_ == o.n_ && k_ == o.k_ && w_ == o.w_ && h_ == o.h_;
    }

private:
    index_t m_ = 0;
    index_t n_ = 0;
    int k_ = 1;
    std::vector<Real> w_;
    std::vector<Real> h_;
};

namespace detail {
// Uniform draw in (0, 1]. Hand-mapped from the engine's 32-bit output so the
// stream is identical across standard library implementations.
inline double unit_open_closed(std::mt19937& gen) {
    return (static_cast<double>(gen()) + 1.0) * (1.0 / 4294967296.0);
}
}  // namespace detail

/// Zeroes W and fills H with i.i.d. uniform draws from (0, 1/sqrt(k)].
/// Deterministic in the seed. This is the starting point both solver families
/// use: W is overwritten by the first user-side pass, and a zero W keeps the
/// initial residual equal to the ratings.
template <class Real>
void init_random_items(FactorModel<Real>& model, std::uint64_t seed) {
    std::fill(model.w().begin(), model.w().end(), Real(0));
    std::mt19937 gen(static_cast<std::mt19937::result_type>(seed));
    const double scale = 1.0 / std::sqrt(static_cast<double>(model.rank()));
    for (auto& x : model.h())
        x = static_cast<Real>(detail::unit_open_closed(gen) * scale);
}

/// Zeroes both factor matrices (the all-zero model predicts 0 everywhere and
/// its residual equals the ratings matrix exactly).
template <class Real>
void init_zero(FactorModel<Real>& model) {
    std::fill(model.w().begin(), model.w().end(), Real(0));
    std::fill(model.h().begin(), model.h().end(), Real(0));
}

template <class Real>
Real predict(const FactorModel<Real>& model, index_t i, index_t j) {
    if (i < 0 || i >= model.users())
        throw std::out_of_range("user index out of range");
    if (j < 0 || j >= model.items())
        throw std::out_of_range("item index out of range");
    const auto wi = model.user_factors(i);
    const auto hj = model.item_factors(j);
    Real s = Real(0);
    for (int t = 0; t < model.rank(); ++t) s += wi[t] * hj[t];
    return s;
}

/// Squared-error objective over the observed entries plus the Frobenius
/// penalty lambda (|W|_F^2 + |H|_F^2). Accumulated in double regardless of
/// the model precision, in a fixed sequential order.
template <class Real>
double objective(const FactorModel<Real>& model, const RatingsMatrix<Real>& a,
                 double lambda) {
    if (lambda < 0) throw std::invalid_argument("lambda must be >= 0");
    if (a.rows() != model.users() || a.cols() != model.items())
        throw std::invalid_argument("model/matrix dimension mismatch");
    double loss = 0.0;
    const auto row_start = a.row_start();
    const auto col_of = a.col_of();
    const auto val = a.val_row();
    for (index_t i = 0; i < a.rows(); ++i) {
        const auto wi = model.user_factors(i);
        for (offset_t p = row_start[i]; p < row_start[i + 1]; ++p) {
            const auto hj = model.item_factors(col_of[p]);
            double pred = 0.0;
            for (int t = 0; t < model.rank(); ++t)
                pred += static_cast<double>(wi[t]) * static_cast<double>(hj[t]);
            const double e = static_cast<double>(val[p]) - pred;
            loss += e * e;
        }
    }
    double reg = 0.0;
    for (Real x : model.w()) reg += static_cast<double>(x) * static_cast<double>(x);
    for (Real x : model.h()) reg += static_cast<double>(x) * static_cast<double>(x);
    return loss + lambda * reg;
}

namespace detail {
// Shared accumulation for every RMSE path, so the CLI evaluator and the
// in-memory op produce bit-identical results on identical inputs.
inline double rmse_finish(double sq_sum, size_t count) {
    return std::sqrt(sq_sum / static_cast<double>(count));
}
}  // namespace detail

/// Root mean squared prediction error over a held-out probe set.
/// Accumulated in double regardless of model precision.
template <class Real>
double rmse(const FactorModel<Real>& model, span_arg<const Triplet<Real>> probe) {
    if (probe.empty())
        throw std::invalid_argument("probe set is empty");
    double acc = 0.0;
    for (const auto& t : probe) {
        const double e = static_cast<double>(t.rating) -
                         static_cast<double>(predict(model, t.user, t.item));
        acc += e * e;
    }
    return detail::rmse_finish(acc, probe.size());
}

/// Top-scoring unrated items for user i, sorted by predicted score descending
/// with ties broken by ascending item index. `rated_sorted` lists the item
/// indices to exclude, in strictly increasing order.
template <class Real>
std::vector<std::pair<index_t, Real>> top_n(const FactorModel<Real>& model,
                                            index_t i, index_t count,
                                            std::span<const index_t> rated_sorted) {
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    if (i < 0 || i >= model.users())
        throw std::out_of_range("user index out of range");
    std::vector<std::pair<index_t, Real>> scored;
    scored.reserve(model.items());
    size_t r = 0;
    for (index_t j = 0; j < model.items(); ++j) {
        if (r < rated_sorted.size() && rated_sorted[r] == j) {
            ++r;
            continue;
        }
        scored.emplace_back(j, predict(model, i, j));
    }
    const size_t keep = std::min<size_t>(scored.size(), static_cast<size_t>(count));
    std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(),
                      [](const auto& a, const auto& b) {
                          if (a.second != b.second) return a.second > b.second;
                          return a.first < b.first;
                      });
    scored.resize(keep);
    return scored;
}

/// Convenience overload excluding the user's rated items directly from the
/// ratings matrix.
template <class Real>
std::vector<std::pair<index_t, Real>> top_n(const FactorModel<Real>& model,
                                            const RatingsMatrix<Real>& a,
                                            index_t i, index_t count) {
    std::vector<index_t> rated;
    rated.reserve(static_cast<size_t>(a.row_nnz(i)));
    for (const auto [item, pos] : a.row_slice(i)) rated.push_back(item);
    return top_n(model, i, count, rated);
}

// ---------------------------------------------------------------------------
// Model serialization: fixed little-endian binary layout that round-trips
// factor values bit-exactly.
//   bytes 0..3   magic "PMFB"
//   u32          format version (1)
//   u32          scalar size in bytes (4 or 8)
//   i64 m, i64 n, i64 k
//   W (m*k scalars), H (n*k scalars), raw
// ---------------------------------------------------------------------------

namespace detail {
inline constexpr char kModelMagic[4] = {'P', 'M', 'F', 'B'};

template <class T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
void read_raw(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace detail

template <class Real>
void save_model(const std::filesystem::path& path, const FactorModel<Real>& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("cannot open " + path.string() + " for writing");
    os.write(detail::kModelMagic, 4);
    detail::write_raw(os, std::uint32_t{1});
    detail::write_raw(os, static_cast<std::uint32_t>(sizeof(Real)));
    detail::write_raw(os, static_cast<std::int64_t>(model.users()));
    detail::write_raw(os, static_cast<std::int64_t>(model.items()));
    detail::write_raw(os, static_cast<std::int64_t>(model.rank()));
    os.write(reinterpret_cast<const char*>(model.w().data()),
             static_cast<std::streamsize>(model.w().size() * sizeof(Real)));
    os.write(reinterpret_cast<const char*>(model.h().data()),
             static_cast<std::streamsize>(model.h().size() * sizeof(Real)));
    if (!os) throw data_error("short write to " + path.string());
}

/// Reads the stored scalar width without loading the factors.
inline Precision peek_model_precision(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot open model file " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, detail::kModelMagic, 4) != 0)
        throw data_error(path.string() + " is not a model file");
    std::uint32_t version = 0, scalar = 0;
    detail::read_raw(is, version);
    detail::read_raw(is, scalar);
    if (version != 1) throw data_error("unsupported model format version");
    if (scalar == 4) return Precision::kSingle;
    if (scalar == 8) return Precision::kDouble;
    throw data_error("unsupported scalar width in model file");
}

template <class Real>
FactorModel<Real> load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot open model file " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, detail::kModelMagic, 4) != 0)
        throw data_error(path.string() + " is not a model file");
    std::uint32_t version = 0, scalar = 0;
    detail::read_raw(is, version);
    detail::read_raw(is, scalar);
    if (version != 1) throw data_error("unsupported model format version");
    if (scalar != sizeof(Real))
        throw data_error("model precision does not match requested precision");
    std::int64_t m = 0, n = 0, k = 0;
    detail::read_raw(is, m);
    detail::read_raw(is, n);
    detail::read_raw(is, k);
    if (m < 0 || n < 0 || k < 1) throw data_error("corrupt model header");
    FactorModel<Real> model(static_cast<index_t>(m), static_cast<index_t>(n),
                            static_cast<int>(k));
    is.read(reinterpret_cast<char*>(model.w().data()),
            static_cast<std::streamsize>(model.w().size() * sizeof(Real)));
    is.read(reinterpret_cast<char*>(model.h().data()),
            static_cast<std::streamsize>(model.h().size() * sizeof(Real)));
    if (!is) throw data_error("model file truncated: " + path.string());
    return model;
}

}  // namespace parmf

#endif  // PARMF_MODEL_HPP
