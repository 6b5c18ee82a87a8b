#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "heatreach/gevrey.hpp"
#include "heatreach/jet.hpp"
#include "heatreach/nonlinearity.hpp"
#include "heatreach/scalar.hpp"

namespace heatreach {

namespace detail {

/// Fills the product c = a * b wherever the presence of a and b newly allows
/// it; entries already present are never recomputed, so values match a
/// one-shot jet_mul bitwise regardless of the fill order.
template <class S>
void extend_product(BivariateJet<S>& c, const BivariateJet<S>& a, const BivariateJet<S>& b) {
    int running = c.nmax() + 1;
    for (int k = 0; k <= c.kmax(); ++k) {
        for (int j = 0; j <= k; ++j)
            running = std::min({running, a.avail(j), b.avail(k - j)});
        int want = std::min(running, c.nmax() + 1);
        int have = c.avail(k);
        for (int n = have; n < want; ++n) {
            Accumulator<S> acc;
            for (int j = 0; j <= k; ++j) {
                const S ck = ScalarOps<S>::binomial(k, j);
                for (int i = 0; i <= n; ++i)
                    acc.add(ck * ScalarOps<S>::binomial(n, i) * a.at(j, i) * b.at(k - j, n - i));
            }
            c.set(k, n, acc.value());
        }
        if (want > have) c.set_avail(k, want);
    }
}

/// Incremental jet of f(x, y, d_x y) alongside a growing state jet. Powers of
/// y and d_x y are memoized and extended cell by cell as the state's presence
/// grows (by time level in propagate_time, by x-row in propagate_space); the
/// computed values coincide bitwise with a one-shot compose_f on the final
/// state. Group consumption follows the same tail rule as compose_f, decided
/// once from the base-point state values.
template <class S>
class NonlinearityEngine {
public:
    NonlinearityEngine(const AnalyticNonlinearity& f, int kmax, int nmax,
                       const TruncationSpec& trunc)
        : f_(&f), kmax_(kmax), nmax_(nmax), trunc_(trunc), F_(kmax, nmax), dxy_(kmax, nmax) {
        groups_ = f.groups();
    }

    /// Extends the cached jets and F to match the state's presence.
    void sync(const BivariateJet<S>& y) {
        if (groups_.empty()) {
            F_.fill_all_present();
            return;
        }
        if (!domain_checked_) {
            if (!(y.present(0, 0) && y.avail(1) > 0))
                throw InvalidInput("nonlinearity engine: seed state incomplete");
            double v00 = ScalarOps<S>::to_double(y.at(0, 0));
            double v10 = ScalarOps<S>::to_double(y.at(1, 0));
            if (!(std::abs(v00) < f_->b0 && std::abs(v10) < f_->b1))
                throw DomainError("state outside nonlinearity domain");
            select_groups(v00, v10);
            domain_checked_ = true;
        }
        // d_x y via the index shift, extended to the state's presence
        for (int k = 0; k + 1 <= y.kmax() && k <= kmax_; ++k) {
            int want = std::min(y.avail(k + 1), nmax_ + 1);
            for (int n = dxy_.avail(k); n < want; ++n) dxy_.set(k, n, y.at(k + 1, n));
            if (want > dxy_.avail(k)) dxy_.set_avail(k, want);
        }
        for (std::size_t p = 2; p < pow0_.size(); ++p)
            extend_product(pow0_[p], power0(static_cast<int>(p) - 1, y), y);
        for (std::size_t q = 2; q < pow1_.size(); ++q)
            extend_product(pow1_[q], power1(static_cast<int>(q) - 1), dxy_);
        for (std::size_t gi = 0; gi < active_.size(); ++gi) {
            const auto& g = groups_[active_[gi]];
            if (g.p > 0 && g.q > 0)
                extend_product(gprod_[gi], power0(g.p, y), power1(g.q));
        }
        // assemble newly available F cells
        for (int k = 0; k <= kmax_; ++k) {
            int want = nmax_ + 1;
            for (std::size_t gi = 0; gi < active_.size(); ++gi) {
                const auto& g = groups_[active_[gi]];
                int rmin = g.xr.front().first;
                for (const auto& [r, a] : g.xr) rmin = std::min(rmin, r);
                if (k >= rmin)
                    want = std::min(want, group_jet(gi, y).avail(k - rmin));
            }
            int have = F_.avail(k);
            for (int n = have; n < want; ++n) {
                Accumulator<S> acc;
                for (std::size_t gi = 0; gi < active_.size(); ++gi) {
                    const auto& g = groups_[active_[gi]];
                    const auto& G = group_jet(gi, y);
                    for (const auto& [r, a] : g.xr) {
                        if (r > k) continue;
                        acc.add(ScalarOps<S>::binomial(k, r) * factorial_as<S>(r) *
                                ScalarOps<S>::from_double(a) * G.at(k - r, n));
                    }
                }
                F_.set(k, n, acc.value());
            }
            if (want > have) F_.set_avail(k, want);
        }
    }

    const BivariateJet<S>& value() const { return F_; }

private:
    void select_groups(double v00, double v10) {
        int maxp = 0, maxq = 0;
        for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
            const auto& g = groups_[gi];
            int degree = g.p + g.q;
            if (trunc_.tail_tol > 0.0 &&
                composition_tail_bound(*f_, v00, v10, degree) < trunc_.tail_tol)
                break;
            if (degree > trunc_.max_pq)
                throw ConvergenceError("nonconvergent composition: (p,q) degree " +
                                       std::to_string(degree) + " exceeds the configured cap");
            active_.push_back(gi);
            maxp = std::max(maxp, g.p);
            maxq = std::max(maxq, g.q);
        }
        // slots 0 and 1 are placeholders: the first power is the state itself
        for (int p = 0; p <= maxp; ++p)
            pow0_.push_back(p >= 2 ? BivariateJet<S>(kmax_, nmax_) : BivariateJet<S>());
        for (int q = 0; q <= maxq; ++q)
            pow1_.push_back(q >= 2 ? BivariateJet<S>(kmax_, nmax_) : BivariateJet<S>());
        gprod_.reserve(active_.size());
        for (std::size_t gi = 0; gi < active_.size(); ++gi)
            gprod_.emplace_back(kmax_, nmax_);
    }

    const BivariateJet<S>& power0(int p, const BivariateJet<S>& y) const {
        return p == 1 ? y : pow0_[static_cast<std::size_t>(p)];
    }
    const BivariateJet<S>& power1(int q) const {
        return q == 1 ? dxy_ : pow1_[static_cast<std::size_t>(q)];
    }
    const BivariateJet<S>& group_jet(std::size_t gi, const BivariateJet<S>& y) const {
        const auto& g = groups_[active_[gi]];
        if (g.p > 0 && g.q > 0) return gprod_[gi];
        if (g.p > 0) return power0(g.p, y);
        return power1(g.q);
    }

    const AnalyticNonlinearity* f_;
    int kmax_, nmax_;
    TruncationSpec trunc_;
    std::vector<AnalyticNonlinearity::Group> groups_;
    std::vector<std::size_t> active_;
    BivariateJet<S> F_, dxy_;
    std::vector<BivariateJet<S>> pow0_, pow1_, gprod_;
    bool domain_checked_ = false;
};

}  // namespace detail

/// Forward jet propagation: from the spatial jet of y at (0, tau) to the full
/// mixed jet, level by level via c[k][n+1] = c[k+2][n] + F[k][n] where F is
/// the jet of f(x, y, d_x y). Each time order consumes two x-orders, so the
/// filled region is the triangle k + 2n <= Kmax.
template <class S>
BivariateJet<S> propagate_time(const SpatialJet<S>& y0, const AnalyticNonlinearity& f,
                               int nmax, const TruncationSpec* trunc_opt = nullptr) {
    int kmax = y0.kmax();
    if (kmax < 0) throw InvalidInput("propagate_time: empty spatial jet");
    if (kmax < 2 * nmax + 1)
        throw DomainError("jet depth exhausted: propagate_time needs Kmax >= 2*Nmax + 1");
    BivariateJet<S> c(kmax, nmax, 0.0, y0.base_t);
    for (int k = 0; k <= kmax; ++k) {
        c.set(k, 0, y0.a[static_cast<std::size_t>(k)]);
        c.set_avail(k, 1);
    }
    TruncationSpec trunc;
    if (trunc_opt) trunc = *trunc_opt;
    trunc.kmax = std::max(2, kmax);
    trunc.nmax = nmax;

    detail::NonlinearityEngine<S> engine(f, kmax, nmax, trunc);
    for (int n = 0; n < nmax; ++n) {
        engine.sync(c);
        const auto& F = engine.value();
        for (int k = 0; k + 2 * (n + 1) <= kmax; ++k) {
            if (!(F.present(k, n) && c.present(k + 2, n)))
                throw DomainError("jet depth exhausted while filling time level " +
                                  std::to_string(n + 1));
            c.set(k, n + 1, c.at(k + 2, n) + F.at(k, n));
            c.set_avail(k, n + 2);
        }
    }
    return c;
}

/// Sideways jet propagation: from the trace jets (d_n, d~_n) at x = 0 to the
/// mixed jet, row by row via c[k+2][n] = c[k][n+1] - F[k][n]. The fill is by
/// increasing x-order; F at row k only needs state rows <= k+1, so the
/// recursion is well founded. Fills k + 2n <= 2*Nmax + 1 capped at kcap.
template <class S>
BivariateJet<S> propagate_space(const TimeJetPair<S>& traces, const AnalyticNonlinearity& f,
                                int kcap, const TruncationSpec* trunc_opt = nullptr) {
    traces.validate();
    int nmax = traces.nmax();
    if (kcap < 1) throw InvalidInput("propagate_space: kcap must be >= 1");
    // kcap is a cap: the reachable region is k + 2n <= 2*Nmax + 1 regardless.
    int kmax = std::min(kcap, 2 * nmax + 1);
    BivariateJet<S> c(kmax, nmax, 0.0, traces.base_t);
    for (int n = 0; n <= nmax; ++n) {
        c.set(0, n, traces.d[static_cast<std::size_t>(n)]);
        if (kmax >= 1) c.set(1, n, traces.d_tilde[static_cast<std::size_t>(n)]);
    }
    c.set_avail(0, nmax + 1);
    if (kmax >= 1) c.set_avail(1, nmax + 1);

    TruncationSpec trunc;
    if (trunc_opt) trunc = *trunc_opt;
    trunc.kmax = std::max(2, kmax);
    trunc.nmax = nmax;

    detail::NonlinearityEngine<S> engine(f, kmax, nmax, trunc);
    for (int k = 0; k + 2 <= kmax; ++k) {
        engine.sync(c);
        const auto& F = engine.value();
        int rows = std::min(c.avail(k) - 1, F.avail(k));
        if (rows <= 0)
            throw DomainError("jet depth exhausted while filling x-row " + std::to_string(k + 2));
        for (int n = 0; n < rows; ++n)
            c.set(k + 2, n, c.at(k, n + 1) - F.at(k, n));
        c.set_avail(k + 2, rows);
    }
    return c;
}

/// Redundant post-assembly check of the defining recursion: for every filled
/// (k, n), c[k][n+1] - c[k+2][n] - F[k][n] must vanish.
template <class S>
double jet_pde_residual(const BivariateJet<S>& c, const AnalyticNonlinearity& f) {
    TruncationSpec trunc;
    trunc.kmax = std::max(2, c.kmax());
    trunc.nmax = c.nmax();
    BivariateJet<S> F = compose_f(f, c, jet_shift_x(c), trunc);
    double worst = 0.0;
    for (int k = 0; k + 2 <= c.kmax(); ++k) {
        for (int n = 0; n + 1 < c.avail(k); ++n) {
            if (!(c.present(k + 2, n) && F.present(k, n))) continue;
            S r = c.at(k, n + 1) - c.at(k + 2, n) - F.at(k, n);
            worst = std::max(worst, std::abs(ScalarOps<S>::to_double(r)));
        }
    }
    return worst;
}

/// Checks every filled entry against |c[k][n]| <= C' (2n+k)! / (R^k R'^(2n)),
/// in log space, and reports the max ratio (the smallest conforming C') and
/// the witness entry of the worst violation if C' exceeds cp.
template <class S>
BoundReport verify_bounds_d2(const BivariateJet<S>& jet, double R, double Rp, double cp) {
    if (!(r_hat() < Rp && Rp < R))
        throw InvalidInput("verify_bounds_d2: requires Rhat < R' < R");
    double max_ratio = 0.0;
    int wk = -1, wn = -1;
    double logR = std::log(R), logRp = std::log(Rp);
    for (int k = 0; k <= jet.kmax(); ++k) {
        for (int n = 0; n < jet.avail(k); ++n) {
            double v = std::abs(ScalarOps<S>::to_double(jet.at(k, n)));
            if (v == 0.0) continue;
            double lr = std::log(v) + k * logR + 2.0 * n * logRp - log_factorial(2 * n + k);
            double ratio = std::exp(lr);
            if (ratio > max_ratio) {
                max_ratio = ratio;
                wk = k;
                wn = n;
            }
        }
    }
    BoundReport rep;
    rep.name = "jet_growth_bound";
    rep.value = max_ratio;
    rep.threshold = cp;
    rep.satisfied = max_ratio <= cp;
    rep.comparison = "<=";
    rep.detail = "max |c[k][n]| R^k R'^(2n) / (2n+k)! over the filled triangle";
    if (!rep.satisfied && wk >= 0)
        rep.detail += "; worst entry (k,n)=(" + std::to_string(wk) + "," + std::to_string(wn) + ")";
    return rep;
}

struct ParityReport {
    bool f_odd = false;          // f(-x,-y0,y1) = -f(x,y0,y1) at random points
    bool jet_odd = false;        // even-order spatial entries vanish
    double worst_even_entry = 0.0;
    std::string detail;
};

/// Parity check for the single-control mode: the reflection identity is
/// evaluated at random points (the authoritative test) and the spatial jet
/// must be odd.
template <class S>
ParityReport parity_check(const SpatialJet<S>& y0, const AnalyticNonlinearity& f,
                          double tol = 1e-12, std::uint64_t seed = 20240501) {
    ParityReport rep;
    rep.f_odd = f.is_reflection_odd(seed, 64, tol);
    rep.worst_even_entry = 0.0;
    for (int k = 0; k <= y0.kmax(); k += 2)
        rep.worst_even_entry = std::max(
            rep.worst_even_entry,
            std::abs(ScalarOps<S>::to_double(y0.a[static_cast<std::size_t>(k)])));
    rep.jet_odd = rep.worst_even_entry <= tol;
    rep.detail = rep.f_odd ? "reflection identity holds at 64 sample points"
                           : "reflection identity violated";
    return rep;
}

/// Zeroes the even-order entries of a spatial jet ("project" mode).
template <class S>
SpatialJet<S> parity_project(SpatialJet<S> y0) {
    for (int k = 0; k <= y0.kmax(); k += 2) y0.a[static_cast<std::size_t>(k)] = S(0);
    return y0;
}

}  // namespace heatreach
