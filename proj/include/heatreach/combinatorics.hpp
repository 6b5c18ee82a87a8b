#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include "heatreach/common.hpp"

namespace heatreach {

// Factorials and binomials used by the jet recursions. binary64 holds n!
// exactly up to n = 22 and without overflow up to n = 170; binomials C(n,k)
// are exact 64-bit integers up to n = 62. Jet dimensions in exact-rational
// mode must stay within the integer-exact range; double mode switches to
// lgamma-based log-space values past the table.

inline constexpr int kFactorialOverflow = 171;

inline double factorial(int n) {
    static const auto table = [] {
        std::array<double, kFactorialOverflow> t{};
        t[0] = 1.0;
        for (int i = 1; i < kFactorialOverflow; ++i) t[i] = t[i - 1] * static_cast<double>(i);
        return t;
    }();
    if (n < 0) throw InvalidInput("factorial: negative argument");
    if (n >= kFactorialOverflow) return std::numeric_limits<double>::infinity();
    return table[static_cast<std::size_t>(n)];
}

inline double log_factorial(int n) {
    if (n < 0) throw InvalidInput("log_factorial: negative argument");
    return std::lgamma(static_cast<double>(n) + 1.0);
}

inline constexpr int kBinomialExactMax = 62;

/// Exact C(n,k) as int64; requires n <= 62 (C(62,31) still fits).
inline std::int64_t binomial_i64(int n, int k) {
    static const auto table = [] {
        std::array<std::array<std::int64_t, kBinomialExactMax + 1>, kBinomialExactMax + 1> t{};
        for (int i = 0; i <= kBinomialExactMax; ++i) {
            t[i][0] = 1;
            for (int j = 1; j <= i; ++j)
                t[i][j] = t[i - 1][j - 1] + (j <= i - 1 ? t[i - 1][j] : 0);
        }
        return t;
    }();
    if (k < 0 || k > n) return 0;
    if (n > kBinomialExactMax)
        throw InvalidInput("binomial_i64: n exceeds the exact 64-bit range (62)");
    return table[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    if (n <= kBinomialExactMax) return static_cast<double>(binomial_i64(n, k));
    return std::exp(log_factorial(n) - log_factorial(k) - log_factorial(n - k));
}

}  // namespace heatreach
