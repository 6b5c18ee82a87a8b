#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "heatreach/combinatorics.hpp"
#include "heatreach/common.hpp"
#include "heatreach/nonlinearity.hpp"
#include "heatreach/scalar.hpp"

namespace heatreach {

/// Dimension and tail-truncation policy for jet operations.
struct TruncationSpec {
    int kmax = 2;        // max x-derivative order
    int nmax = 0;        // max t-derivative order
    double tail_tol = 0.0;  // 0 = consume every stored (p,q) group
    int max_pq = 64;     // guard for the composition's (p,q) consumption

    void validate() const {
        if (kmax < 2) throw InvalidInput("TruncationSpec: Kmax must be >= 2");
        if (nmax < 0) throw InvalidInput("TruncationSpec: Nmax must be >= 0");
        if (tail_tol < 0) throw InvalidInput("TruncationSpec: tail_tol must be >= 0");
    }
};

/// Raw mixed derivatives c[k][n] = d_x^k d_t^n y(base_x, base_t) on a
/// rectangular index box with a lower-set presence profile: row k holds
/// avail(k) valid time orders and avail is non-increasing in k. Entries
/// outside the profile are absent, not zero; reading one is an error.
template <class S>
class BivariateJet {
public:
    BivariateJet() : BivariateJet(0, 0) {}
    BivariateJet(int kmax, int nmax, double base_x = 0.0, double base_t = 0.0)
        : kmax_(kmax),
          nmax_(nmax),
          base_x_(base_x),
          base_t_(base_t),
          avail_(static_cast<std::size_t>(kmax + 1), 0),
          data_(static_cast<std::size_t>((kmax + 1) * (nmax + 1)), S(0)) {
        if (kmax < 0 || nmax < 0) throw InvalidInput("BivariateJet: negative dimension");
    }

    int kmax() const { return kmax_; }
    int nmax() const { return nmax_; }
    double base_x() const { return base_x_; }
    double base_t() const { return base_t_; }

    int avail(int k) const {
        if (k < 0 || k > kmax_) return 0;
        return avail_[static_cast<std::size_t>(k)];
    }
    void set_avail(int k, int count) {
        if (k < 0 || k > kmax_ || count < 0 || count > nmax_ + 1)
            throw InvalidInput("BivariateJet: presence out of range");
        avail_[static_cast<std::size_t>(k)] = count;
    }
    bool present(int k, int n) const { return n >= 0 && n < avail(k); }

    const S& at(int k, int n) const {
        if (!present(k, n))
            throw InvalidInput("BivariateJet: read of absent entry (" + std::to_string(k) +
                               "," + std::to_string(n) + ")");
        return data_[idx(k, n)];
    }
    void set(int k, int n, S v) {
        if (k < 0 || k > kmax_ || n < 0 || n > nmax_)
            throw InvalidInput("BivariateJet: write out of range");
        if (!ScalarOps<S>::finite(v)) throw InvalidInput("BivariateJet: non-finite entry");
        data_[idx(k, n)] = std::move(v);
    }

    /// Declares the full rectangle present (used for constants and zero jets).
    void fill_all_present() {
        for (int k = 0; k <= kmax_; ++k) avail_[static_cast<std::size_t>(k)] = nmax_ + 1;
    }

    bool same_base(const BivariateJet& o) const {
        return base_x_ == o.base_x_ && base_t_ == o.base_t_;
    }

private:
    std::size_t idx(int k, int n) const {
        return static_cast<std::size_t>(k) * static_cast<std::size_t>(nmax_ + 1) +
               static_cast<std::size_t>(n);
    }

    int kmax_ = 0, nmax_ = 0;
    double base_x_ = 0.0, base_t_ = 0.0;
    std::vector<int> avail_;
    std::vector<S> data_;
};

/// One-variable jet a_k = d_x^k y(0, base_t).
template <class S>
struct SpatialJet {
    std::vector<S> a;
    double base_t = 0.0;

    int kmax() const { return static_cast<int>(a.size()) - 1; }
};

/// Trace jets at x = 0: d_n = d_t^n y(0, base_t), d_tilde_n = d_t^n d_x y(0, base_t).
template <class S>
struct TimeJetPair {
    std::vector<S> d;
    std::vector<S> d_tilde;
    double base_t = 0.0;

    void validate() const {
        if (d.size() != d_tilde.size())
            throw InvalidInput("TimeJetPair: d and d_tilde must have equal length");
        if (d.empty()) throw InvalidInput("TimeJetPair: empty");
    }
    int nmax() const { return static_cast<int>(d.size()) - 1; }
};

template <class S>
BivariateJet<S> jet_constant(const S& value, int kmax, int nmax, double base_x = 0.0,
                             double base_t = 0.0) {
    BivariateJet<S> j(kmax, nmax, base_x, base_t);
    j.fill_all_present();
    j.set(0, 0, value);
    return j;
}

namespace detail {

/// Neumaier-compensated accumulator for the double instantiation; the exact
/// scalars accumulate directly.
template <class S>
struct Accumulator {
    S sum{0};
    void add(const S& v) { sum += v; }
    S value() { return sum; }
};

template <>
struct Accumulator<double> {
    double sum = 0.0, comp = 0.0;
    void add(double v) {
        double t = sum + v;
        comp += (std::abs(sum) >= std::abs(v)) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    double value() { return sum + comp; }
};

}  // namespace detail

/// 2D Leibniz product truncated to `trunc`:
///   c[k][n] = sum_{j<=k, i<=n} C(k,j) C(n,i) a[j][i] b[k-j][n-i].
template <class S>
BivariateJet<S> jet_mul(const BivariateJet<S>& a, const BivariateJet<S>& b,
                        const TruncationSpec& trunc) {
    if (!a.same_base(b)) throw InvalidInput("jet_mul: base point mismatch");
    int kmax = std::min({a.kmax(), b.kmax(), trunc.kmax});
    int nmax = std::min({a.nmax(), b.nmax(), trunc.nmax});
    if (kmax < 0 || nmax < 0) throw InvalidInput("jet_mul: empty result dimensions");
    BivariateJet<S> c(kmax, nmax, a.base_x(), a.base_t());
    int running = nmax + 1;  // presence is a lower set: min over rows j <= k
    for (int k = 0; k <= kmax; ++k) {
        for (int j = 0; j <= k; ++j)
            running = std::min({running, a.avail(j), b.avail(k - j)});
        int cnt = std::min(running, nmax + 1);
        c.set_avail(k, cnt);
        for (int n = 0; n < cnt; ++n) {
            detail::Accumulator<S> acc;
            for (int j = 0; j <= k; ++j) {
                const S ck = ScalarOps<S>::binomial(k, j);
                for (int i = 0; i <= n; ++i) {
                    acc.add(ck * ScalarOps<S>::binomial(n, i) * a.at(j, i) * b.at(k - j, n - i));
                }
            }
            c.set(k, n, acc.value());
        }
    }
    return c;
}

/// Index shift realizing d_x on jets; the top x-row is dropped.
template <class S>
BivariateJet<S> jet_shift_x(const BivariateJet<S>& a) {
    if (a.kmax() < 1) throw InvalidInput("jet_shift_x: empty result dimension");
    BivariateJet<S> c(a.kmax() - 1, a.nmax(), a.base_x(), a.base_t());
    for (int k = 0; k + 1 <= a.kmax(); ++k) {
        c.set_avail(k, a.avail(k + 1));
        for (int n = 0; n < a.avail(k + 1); ++n) c.set(k, n, a.at(k + 1, n));
    }
    return c;
}

/// Index shift realizing d_t on jets; the top time order is dropped.
template <class S>
BivariateJet<S> jet_shift_t(const BivariateJet<S>& a) {
    if (a.nmax() < 1) throw InvalidInput("jet_shift_t: empty result dimension");
    BivariateJet<S> c(a.kmax(), a.nmax() - 1, a.base_x(), a.base_t());
    for (int k = 0; k <= a.kmax(); ++k) {
        int cnt = std::max(0, a.avail(k) - 1);
        c.set_avail(k, cnt);
        for (int n = 0; n < cnt; ++n) c.set(k, n, a.at(k, n + 1));
    }
    return c;
}

namespace detail {

/// Geometric bound on the (0,0) entry of every (p,q) group of total degree
/// >= m, from |A_{p,q}(x)| <= M/(b0^p b1^q) / (1 - |x|/b2):
///   sum_{p+q>=m} M' u^p v^q <= M' w^m ((m+1) - m w) / (1-w)^2,  w = max(u,v).
inline double composition_tail_bound(const AnalyticNonlinearity& f, double y00, double y10,
                                     int m) {
    double mprime = f.M / (1.0 - 1.0 / f.b2);
    double w = std::max(std::abs(y00) / f.b0, std::abs(y10) / f.b1);
    if (w >= 1.0) return std::numeric_limits<double>::infinity();
    return mprime * std::pow(w, m) * ((m + 1) - m * w) / ((1.0 - w) * (1.0 - w));
}

}  // namespace detail

/// Jet of f(x + base_x, Y0, Y1) where Y0, Y1 are jets of the two state
/// arguments at a common base point with base_x = 0 (the recursions work at
/// x = 0). The (p,q) groups are consumed in ascending total degree; when
/// trunc.tail_tol > 0 consumption stops once the geometric tail bound drops
/// below it.
template <class S>
BivariateJet<S> compose_f(const AnalyticNonlinearity& f, const BivariateJet<S>& y0,
                          const BivariateJet<S>& y1, const TruncationSpec& trunc) {
    trunc.validate();
    if (!y0.same_base(y1)) throw InvalidInput("compose_f: base point mismatch");
    int kmax = std::min(trunc.kmax, std::max(y0.kmax(), y1.kmax()));
    int nmax = std::min(trunc.nmax, std::max(y0.nmax(), y1.nmax()));
    BivariateJet<S> out(kmax, nmax, y0.base_x(), y0.base_t());
    auto groups = f.groups();
    if (groups.empty()) {
        out.fill_all_present();
        return out;
    }

    if (!(y0.present(0, 0) && y1.present(0, 0)))
        throw InvalidInput("compose_f: state value at the base point is absent");
    double v00 = ScalarOps<S>::to_double(y0.at(0, 0));
    double v10 = ScalarOps<S>::to_double(y1.at(0, 0));
    if (!(std::abs(v00) < f.b0 && std::abs(v10) < f.b1))
        throw DomainError("state outside nonlinearity domain");

    TruncationSpec inner = trunc;
    inner.kmax = kmax;
    inner.nmax = nmax;

    // Memoized powers Y0^p and Y1^q (repeated jet_mul). Reserved up front so
    // references handed out per group stay valid within that group.
    std::vector<BivariateJet<S>> pow0, pow1;
    pow0.reserve(static_cast<std::size_t>(f.max_y0_power()) + 1);
    pow1.reserve(static_cast<std::size_t>(f.max_y1_power()) + 1);
    auto power = [&inner](std::vector<BivariateJet<S>>& cache, const BivariateJet<S>& base,
                          int e) -> const BivariateJet<S>& {
        if (cache.empty()) cache.push_back(base);  // slot 0 holds base^1
        while (static_cast<int>(cache.size()) < e)
            cache.push_back(jet_mul(cache.back(), base, inner));
        return cache[static_cast<std::size_t>(e - 1)];
    };

    std::vector<S> acc(static_cast<std::size_t>((kmax + 1) * (nmax + 1)), S(0));
    std::vector<int> avail(static_cast<std::size_t>(kmax + 1), nmax + 1);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        int degree = g.p + g.q;
        if (trunc.tail_tol > 0.0 &&
            detail::composition_tail_bound(f, v00, v10, degree) < trunc.tail_tol)
            break;
        if (degree > trunc.max_pq)
            throw ConvergenceError("nonconvergent composition: (p,q) degree " +
                                   std::to_string(degree) + " exceeds the configured cap");

        const BivariateJet<S>* G = nullptr;
        BivariateJet<S> scratch;
        if (g.p > 0 && g.q > 0) {
            scratch = jet_mul(power(pow0, y0, g.p), power(pow1, y1, g.q), inner);
            G = &scratch;
        } else if (g.p > 0) {
            G = &power(pow0, y0, g.p);
        } else {
            G = &power(pow1, y1, g.q);
        }

        int rmin = g.xr.front().first;
        for (const auto& [r, a] : g.xr) rmin = std::min(rmin, r);
        for (int k = 0; k <= kmax; ++k) {
            // A_{p,q} contributes d_x^r with weight r! a_{p,q,r}; the x^r jet
            // lives on time order 0 so presence is bound by G at row k - rmin.
            int cnt = (k >= rmin) ? std::min(G->avail(k - rmin), nmax + 1) : nmax + 1;
            avail[static_cast<std::size_t>(k)] =
                std::min(avail[static_cast<std::size_t>(k)], cnt);
            for (const auto& [r, a] : g.xr) {
                if (r > k) continue;
                S weight = ScalarOps<S>::binomial(k, r) * factorial_as<S>(r) *
                           ScalarOps<S>::from_double(a);
                for (int n = 0; n < std::min(G->avail(k - r), nmax + 1); ++n)
                    acc[static_cast<std::size_t>(k * (nmax + 1) + n)] += weight * G->at(k - r, n);
            }
        }
    }

    for (int k = 0; k <= kmax; ++k) {
        out.set_avail(k, avail[static_cast<std::size_t>(k)]);
        for (int n = 0; n < avail[static_cast<std::size_t>(k)]; ++n)
            out.set(k, n, acc[static_cast<std::size_t>(k * (nmax + 1) + n)]);
    }
    return out;
}

/// Jet of f(x, y, d_x y) from the jet of y alone.
template <class S>
BivariateJet<S> nonlinearity_jet(const AnalyticNonlinearity& f, const BivariateJet<S>& y,
                                 const TruncationSpec& trunc) {
    if (y.kmax() < trunc.kmax + 1)
        throw InvalidInput("nonlinearity_jet: y needs Kmax+1 x-orders so d_x y is available");
    return compose_f(f, y, jet_shift_x(y), trunc);
}

struct SeriesEval {
    double value = 0.0;
    double remainder_bound = 0.0;
};

/// Evaluates sum_k a_k x^k / k! with the geometric tail of the fitted
/// envelope |a_k| <= A k!/R1_hat^k as remainder bound.
inline SeriesEval series_eval_x(const SpatialJet<double>& a, double x, double r1_hat) {
    if (a.a.empty()) throw InvalidInput("series_eval_x: empty jet");
    if (!(r1_hat > std::abs(x))) throw DomainError("series radius exceeded");
    SeriesEval out;
    int kmax = a.kmax();
    double log_r = std::log(r1_hat);
    double log_env = -std::numeric_limits<double>::infinity();
    double xpow_over_fact = 1.0;  // x^k / k!
    for (int k = 0; k <= kmax; ++k) {
        double ak = a.a[static_cast<std::size_t>(k)];
        out.value += ak * xpow_over_fact;
        xpow_over_fact *= x / static_cast<double>(k + 1);
        if (ak != 0.0)
            log_env = std::max(log_env, std::log(std::abs(ak)) + k * log_r - log_factorial(k));
    }
    if (std::isfinite(log_env)) {
        double rho = std::abs(x) / r1_hat;
        out.remainder_bound =
            std::exp(log_env) * std::pow(rho, kmax + 1) / (1.0 - rho);
    }
    return out;
}

/// JSON export: {"base_x":..., "base_t":..., "Kmax":..., "Nmax":..., "c": [[...]]}
/// with absent entries null.
template <class S>
nlohmann::ordered_json jet_to_json(const BivariateJet<S>& j) {
    nlohmann::ordered_json out;
    out["base_x"] = j.base_x();
    out["base_t"] = j.base_t();
    out["Kmax"] = j.kmax();
    out["Nmax"] = j.nmax();
    auto rows = nlohmann::ordered_json::array();
    for (int k = 0; k <= j.kmax(); ++k) {
        auto row = nlohmann::ordered_json::array();
        for (int n = 0; n <= j.nmax(); ++n) {
            if (j.present(k, n))
                row.push_back(ScalarOps<S>::to_double(j.at(k, n)));
            else
                row.push_back(nullptr);
        }
        rows.push_back(std::move(row));
    }
    out["c"] = std::move(rows);
    return out;
}

}  // namespace heatreach
