#ifndef PARMF_TYPES_HPP
#define PARMF_TYPES_HPP

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace parmf {

/// Row/column index. Holds user and item counts.
using index_t = std::int32_t;

/// Position into the nonzero arrays. Must hold entry counts past 2^31
/// (the largest public rating benchmarks exceed 10^8 entries).
using offset_t = std::int64_t;

static_assert(std::numeric_limits<offset_t>::max() >= (std::int64_t{1} << 31),
              "offset type must hold >= 2^31 entries");

enum class Precision { kSingle, kDouble };

/// Span-typed parameter excluded from template deduction, so callers can
/// hand in vectors and other contiguous ranges directly.
template <class T>
using span_arg = std::type_identity_t<std::span<T>>;

inline const char* precision_name(Precision p) {
    return p == Precision::kSingle ? "single" : "double";
}

/// Malformed or inconsistent input data (bad file contents, id mismatches).
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cholesky factorization hit a non-positive pivot.
class not_positive_definite : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace parmf

#endif  // PARMF_TYPES_HPP
