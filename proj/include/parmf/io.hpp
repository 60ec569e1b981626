#ifndef PARMF_IO_HPP
#define PARMF_IO_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "parmf/model.hpp"
#include "parmf/sparse.hpp"
#include "parmf/types.hpp"

// Dataset ingestion. Rating files are plain text, one rating per line:
// whitespace-separated "user item rating" with free-form (typically 1-based,
// possibly sparse) integer ids. A trailing extra field (e.g. the timestamp
// column of common public datasets) is tolerated and ignored. External ids
// are remapped to dense 0-based indices before they reach the solvers; the
// mapping is persisted next to the model.

namespace parmf {

struct RawTriplet {
    std::int64_t user = 0;
    std::int64_t item = 0;
    double rating = 0.0;

    bool operator==(const RawTriplet&) const = default;
};

namespace detail {

inline bool parse_int(std::string_view tok, std::int64_t& out) {
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

inline bool parse_double(std::string_view tok, double& out) {
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' ||
                                     line[pos] == '\r'))
            ++pos;
        size_t start = pos;
        while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t' &&
               line[pos] != '\r')
            ++pos;
        if (pos > start) out.push_back(line.substr(start, pos - start));
    }
    return out;
}

// Shortest round-trip decimal form of a double.
inline void append_double(std::string& out, double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, p);
}

}  // namespace detail

/// Parses a rating file. Throws data_error naming the offending line.
inline std::vector<RawTriplet> read_triplets(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw data_error("cannot open " + path.string());
    std::vector<RawTriplet> out;
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto fields = detail::split_fields(line);
        if (fields.empty()) continue;  // blank lines are fine
        if (fields.size() < 3 || fields.size() > 4)
            throw data_error(path.string() + ":" + std::to_string(lineno) +
                             ": expected 'user item rating'");
        RawTriplet t;
        if (!detail::parse_int(fields[0], t.user) ||
            !detail::parse_int(fields[1], t.item) ||
            !detail::parse_double(fields[2], t.rating) ||
            !std::isfinite(t.rating))
            throw data_error(path.string() + ":" + std::to_string(lineno) +
                             ": malformed rating line");
        out.push_back(t);
    }
    return out;
}

inline void write_triplets(const std::filesystem::path& path,
                           std::span<const RawTriplet> triplets) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("cannot open " + path.string() + " for writing");
    std::string buf;
    for (const auto& t : triplets) {
        buf.clear();
        buf += std::to_string(t.user);
        buf += ' ';
        buf += std::to_string(t.item);
        buf += ' ';
        detail::append_double(buf, t.rating);
        buf += '\n';
        os << buf;
    }
    if (!os) throw data_error("short write to " + path.string());
}

/// Dense-index dictionary: external ids sorted ascending, internal id =
/// position. Deterministic for any input order.
class IdMap {
public:
    IdMap() = default;
    explicit IdMap(std::vector<std::int64_t> sorted_ids)
        : ids_(std::move(sorted_ids)) {}

    static IdMap from_values(std::vector<std::int64_t> values) {
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        return IdMap(std::move(values));
    }

    index_t size() const { return static_cast<index_t>(ids_.size()); }
    std::int64_t external(index_t internal) const { return ids_[internal]; }

    std::optional<index_t> lookup(std::int64_t external_id) const {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), external_id);
        if (it == ids_.end() || *it != external_id) return std::nullopt;
        return static_cast<index_t>(it - ids_.begin());
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw data_error("cannot open " + path.string() + " for writing");
        for (auto id : ids_) os << id << '\n';
        if (!os) throw data_error("short write to " + path.string());
    }

    static IdMap load(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw data_error("cannot open id map " + path.string());
        std::vector<std::int64_t> ids;
        std::string line;
        std::int64_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::int64_t v = 0;
            if (!detail::parse_int(line, v))
                throw data_error(path.string() + ":" + std::to_string(lineno) +
                                 ": malformed id");
            ids.push_back(v);
        }
        if (!std::is_sorted(ids.begin(), ids.end()))
            throw data_error(path.string() + ": id map is not sorted");
        return IdMap(std::move(ids));
    }

private:
    std::vector<std::int64_t> ids_;
};

/// Remapped training data: dictionaries plus dense 0-based triplets.
template <class Real>
struct Dataset {
    IdMap users;
    IdMap items;
    std::vector<Triplet<Real>> triplets;

    RatingsMatrix<Real> to_matrix() const {
        return RatingsMatrix<Real>::from_triplets(triplets, users.size(),
                                                  items.size());
    }
};

template <class Real>
Dataset<Real> map_dataset(std::span<const RawTriplet> raw) {
    std::vector<std::int64_t> users, items;
    users.reserve(raw.size());
    items.reserve(raw.size());
    for (const auto& t : raw) {
        users.push_back(t.user);
        items.push_back(t.item);
    }
    Dataset<Real> ds;
    ds.users = IdMap::from_values(std::move(users));
    ds.items = IdMap::from_values(std::move(items));
    ds.triplets.reserve(raw.size());
    for (const auto& t : raw)
        ds.triplets.push_back({*ds.users.lookup(t.user), *ds.items.lookup(t.item),
                               static_cast<Real>(t.rating)});
    return ds;
}

/// Maps probe rows through the training dictionaries. Rows whose user or item
/// never appeared in training are dropped into `unmapped` (they predict 0).
template <class Real>
std::vector<Triplet<Real>> map_probe(const IdMap& users, const IdMap& items,
                                     std::span<const RawTriplet> raw,
                                     std::vector<RawTriplet>* unmapped = nullptr) {
    std::vector<Triplet<Real>> out;
    out.reserve(raw.size());
    for (const auto& t : raw) {
        const auto u = users.lookup(t.user);
        const auto i = items.lookup(t.item);
        if (u && i) {
            out.push_back({*u, *i, static_cast<Real>(t.rating)});
        } else if (unmapped) {
            unmapped->push_back(t);
        }
    }
    return out;
}

/// Probe RMSE straight from raw external-id rows: known pairs use the model
/// prediction, unseen users/items predict 0. On fully-mapped input this is
/// the same accumulation as rmse().
template <class Real>
double eval_rmse(const FactorModel<Real>& model, const IdMap& users,
                 const IdMap& items, std::span<const RawTriplet> raw) {
    if (raw.empty()) throw std::invalid_argument("probe set is empty");
    if (users.size() != model.users() || items.size() != model.items())
        throw data_error("id maps do not match model dimensions");
    double acc = 0.0;
    for (const auto& t : raw) {
        const auto u = users.lookup(t.user);
        const auto i = items.lookup(t.item);
        const double pred =
            (u && i) ? static_cast<double>(predict(model, *u, *i)) : 0.0;
        const double e = t.rating - pred;
        acc += e * e;
    }
    return detail::rmse_finish(acc, raw.size());
}

// ---------------------------------------------------------------------------
// Train/probe splitting
// ---------------------------------------------------------------------------

namespace detail {
// Engine-stable bounded draw (modulo; bias is irrelevant here, stability is).
inline std::uint32_t bounded(std::mt19937& gen, std::uint32_t n) {
    return gen() % n;
}
}  // namespace detail

struct SplitResult {
    std::vector<RawTriplet> train;
    std::vector<RawTriplet> probe;
};

/// Deterministic per-seed probe split. Users with a single rating always stay
/// in train, and no user ever loses their last training rating, so every
/// trained user keeps at least one observation. `ratio` is the probe fraction
/// of the eligible (multi-rating-user) entries.
inline SplitResult split_dataset(std::span<const RawTriplet> all, double ratio,
                                 std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("split ratio must be in (0, 1)");

    std::unordered_map<std::int64_t, std::int64_t> per_user;
    for (const auto& t : all) per_user[t.user]++;

    std::vector<std::uint32_t> eligible;
    eligible.reserve(all.size());
    for (std::uint32_t e = 0; e < all.size(); ++e)
        if (per_user[all[e].user] >= 2) eligible.push_back(e);

    std::mt19937 gen(static_cast<std::mt19937::result_type>(seed));
    for (std::uint32_t i = static_cast<std::uint32_t>(eligible.size()); i > 1; --i)
        std::swap(eligible[i - 1], eligible[detail::bounded(gen, i)]);

    const auto target = static_cast<size_t>(
        std::llround(ratio * static_cast<double>(eligible.size())));
    std::vector<char> to_probe(all.size(), 0);
    std::unordered_map<std::int64_t, std::int64_t> left = per_user;
    size_t taken = 0;
    for (const auto e : eligible) {
        if (taken >= target) break;
        auto& remaining = left[all[e].user];
        if (remaining <= 1) continue;  // never strand a user without train data
        --remaining;
        to_probe[e] = 1;
        ++taken;
    }

    SplitResult out;
    out.train.reserve(all.size() - taken);
    out.probe.reserve(taken);
    for (size_t e = 0; e < all.size(); ++e)
        (to_probe[e] ? out.probe : out.train).push_back(all[e]);
    return out;
}

// ---------------------------------------------------------------------------
// Model directory layout: model.bin + user_map.txt + item_map.txt
// ---------------------------------------------------------------------------

template <class Real>
void save_model_dir(const std::filesystem::path& dir, const FactorModel<Real>& model,
                    const IdMap& users, const IdMap& items) {
    std::filesystem::create_directories(dir);
    save_model(dir / "model.bin", model);
    users.save(dir / "user_map.txt");
    items.save(dir / "item_map.txt");
}

}  // namespace parmf

#endif  // PARMF_IO_HPP
