#pragma once

#include <cmath>
#include <cstdint>

#include <boost/multiprecision/cpp_int.hpp>

#include "heatreach/combinatorics.hpp"
#include "heatreach/common.hpp"

namespace heatreach {

/// Exact rational scalar for the round-trip mode. Conversion from double is
/// exact (every binary64 value is a dyadic rational), so float-mode and
/// rational-mode runs see bit-for-bit identical coefficient inputs.
using Rational = boost::multiprecision::cpp_rational;

template <class S>
struct ScalarOps;

template <>
struct ScalarOps<double> {
    static double from_int64(std::int64_t v) { return static_cast<double>(v); }
    static double from_double(double v) { return v; }
    static double to_double(double v) { return v; }
    static bool finite(double v) { return std::isfinite(v); }
    static double binomial(int n, int k) { return heatreach::binomial(n, k); }
};

template <>
struct ScalarOps<Rational> {
    static Rational from_int64(std::int64_t v) { return Rational(v); }
    static Rational from_double(double v) { return Rational(v); }
    static double to_double(const Rational& v) { return v.template convert_to<double>(); }
    static bool finite(const Rational&) { return true; }
    static Rational binomial(int n, int k) { return Rational(binomial_i64(n, k)); }
};

template <class S>
S factorial_as(int n) {
    S f = ScalarOps<S>::from_int64(1);
    for (int i = 2; i <= n; ++i) f *= ScalarOps<S>::from_int64(i);
    return f;
}

}  // namespace heatreach
