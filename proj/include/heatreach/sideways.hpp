#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatreach/common.hpp"
#include "heatreach/correspondence.hpp"
#include "heatreach/jet.hpp"
#include "heatreach/trace.hpp"

namespace heatreach {

/// Sampled boundary data h_{-1}(t_j) = y(-1, t_j), h_{+1}(t_j) = y(1, t_j),
/// with optional time-derivative samples for Hermite interpolation.
struct ControlSignal {
    std::vector<double> t;
    std::vector<double> h_minus, h_plus;
    std::vector<double> dh_minus, dh_plus;  // optional, same length when present
    nlohmann::ordered_json metadata;

    void validate() const {
        if (t.size() != h_minus.size() || t.size() != h_plus.size())
            throw InvalidInput("ControlSignal: array length mismatch");
        if (t.size() < 2) throw InvalidInput("ControlSignal: need at least two samples");
        for (std::size_t i = 1; i < t.size(); ++i)
            if (!(t[i] > t[i - 1])) throw InvalidInput("ControlSignal: t must be increasing");
        if (!dh_minus.empty() && (dh_minus.size() != t.size() || dh_plus.size() != t.size()))
            throw InvalidInput("ControlSignal: derivative array length mismatch");
    }

    bool has_derivatives() const { return !dh_minus.empty(); }

    /// CSV contract: header "t,h_minus,h_plus", 17 significant digits.
    void write_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw InvalidInput("ControlSignal: cannot open " + path);
        os << "t,h_minus,h_plus\n";
        char buf[128];
        for (std::size_t i = 0; i < t.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t[i], h_minus[i], h_plus[i]);
            os << buf;
        }
    }
};

struct SynthesisResult {
    std::vector<double> tgrid;
    std::vector<double> xgrid;
    std::vector<std::vector<double>> state;       // state[j][i] = y(x_i, t_j)
    std::vector<std::vector<double>> state_dt;    // d_t y(x_i, t_j)
    ControlSignal controls;
    std::vector<double> remainder_bound;          // per sample, at |x| = 1
    std::vector<double> r1_estimate;              // per sample coefficient radius
    std::vector<bool> r1_degenerate;              // all-zero tail
    bool r1_flagged = false;                      // some estimate <= 4/e + margin
    double r1_flag_threshold = 0.0;

    nlohmann::ordered_json summary_json() const {
        nlohmann::ordered_json j;
        j["samples"] = tgrid.size();
        j["nx"] = xgrid.size();
        double rmin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < r1_estimate.size(); ++i)
            if (!r1_degenerate[i]) rmin = std::min(rmin, r1_estimate[i]);
        j["r1_min"] = std::isfinite(rmin) ? rmin : -1.0;
        j["r1_flagged"] = r1_flagged;
        double worst_rem = 0.0;
        for (double r : remainder_bound) worst_rem = std::max(worst_rem, r);
        j["max_remainder_bound"] = worst_rem;
        return j;
    }

    void write_state_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw InvalidInput("SynthesisResult: cannot open " + path);
        os << "t";
        char buf[64];
        for (double x : xgrid) {
            std::snprintf(buf, sizeof buf, ",%.17g", x);
            os << buf;
        }
        os << "\n";
        for (std::size_t j = 0; j < tgrid.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", tgrid[j]);
            os << buf;
            for (double v : state[j]) {
                std::snprintf(buf, sizeof buf, ",%.17g", v);
                os << buf;
            }
            os << "\n";
        }
    }
};

namespace detail {

/// Least-squares slope of log(|a_k|/k!) against k over the trailing third of
/// the nonzero coefficients; R1 = exp(-slope). All-zero tail reports +inf.
inline std::pair<double, bool> estimate_r1(const std::vector<double>& a) {
    int kmax = static_cast<int>(a.size()) - 1;
    int window = (kmax + 1 + 2) / 3;
    std::vector<std::pair<double, double>> pts;
    for (int k = std::max(0, kmax + 1 - window); k <= kmax; ++k) {
        double v = std::abs(a[static_cast<std::size_t>(k)]);
        if (v > 0.0) pts.emplace_back(k, std::log(v) - log_factorial(k));
    }
    if (pts.size() < 2) return {std::numeric_limits<double>::infinity(), true};
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto& [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double n = static_cast<double>(pts.size());
    double denom = n * sxx - sx * sx;
    if (denom == 0.0) return {std::numeric_limits<double>::infinity(), true};
    double slope = (n * sxy - sx * sy) / denom;
    return {std::exp(-slope), false};
}

}  // namespace detail

/// Direct power-series synthesis of the sideways problem: per time sample,
/// build the trace jets, march them in x, and evaluate the series on the
/// grid. Samples are independent work items (parallel map, deterministic
/// slot order).
inline SynthesisResult synthesize_state(const TimeTrace& g0, const TimeTrace& g1,
                                        const AnalyticNonlinearity& f,
                                        const TruncationSpec& trunc,
                                        const std::vector<double>& tgrid,
                                        const std::vector<double>& xgrid) {
    trunc.validate();
    if (tgrid.size() < 2 || xgrid.size() < 2)
        throw InvalidInput("synthesize_state: need at least 2 samples in t and x");
    if (std::abs(xgrid.front() + 1.0) > 1e-14 || std::abs(xgrid.back() - 1.0) > 1e-14)
        throw InvalidInput("synthesize_state: xgrid must span [-1, 1]");
    const int nmax = trunc.nmax;
    if (nmax < 1) throw InvalidInput("synthesize_state: Nmax must be >= 1");
    if (g0.max_order() < nmax || g1.max_order() < nmax)
        throw InvalidInput("synthesize_state: traces do not provide Nmax derivatives");

    SynthesisResult out;
    out.tgrid = tgrid;
    out.xgrid = xgrid;
    std::size_t nt = tgrid.size(), nx = xgrid.size();
    out.state.assign(nt, std::vector<double>(nx, 0.0));
    out.state_dt.assign(nt, std::vector<double>(nx, 0.0));
    out.remainder_bound.assign(nt, 0.0);
    out.r1_estimate.assign(nt, 0.0);
    out.r1_degenerate.assign(nt, false);
    out.r1_flag_threshold = 4.0 / std::numbers::e_v<double> + 0.05;

    std::vector<std::string> errors(nt);
    std::vector<char> flagged(nt, 0);
    std::vector<double> sample_scale(nt, 0.0), sample_tail(nt, 0.0);
    std::vector<char> tail_suspect(nt, 0);
    parallel_for_indexed(nt, [&](std::size_t j) {
        try {
            TimeJetPair<double> traces;
            traces.base_t = tgrid[j];
            traces.d = g0.derivs_upto(nmax, tgrid[j]);
            traces.d_tilde = g1.derivs_upto(nmax, tgrid[j]);
            auto jet = propagate_space(traces, f, trunc.kmax, &trunc);
            SpatialJet<double> row0, row1;
            for (int k = 0; k <= jet.kmax(); ++k) {
                row0.a.push_back(jet.at(k, 0));
                if (jet.avail(k) > 1) row1.a.push_back(jet.at(k, 1));
            }
            auto [r1, degenerate] = detail::estimate_r1(row0.a);
            out.r1_estimate[j] = r1;
            out.r1_degenerate[j] = degenerate;
            double scale = 0.0, tail = 0.0;
            for (int k = 0; k <= row0.kmax(); ++k) {
                double m = std::abs(row0.a[static_cast<std::size_t>(k)]) / factorial(k);
                scale = std::max(scale, m);
                if (k >= row0.kmax() - 2) tail = std::max(tail, m);
            }
            bool sound_envelope = degenerate || r1 > 1.05;
            sample_scale[j] = scale;
            sample_tail[j] = tail;
            if (!degenerate && r1 <= 1.0) {
                // The slope estimate alone can be fooled by interior bumps
                // (cutoff-driven mid orders); genuine divergence means the
                // trailing terms fail to decay from the series peak AND carry
                // weight against the global state scale (judged after the
                // parallel map).
                if (tail > 0.2 * scale) tail_suspect[j] = 1;
                flagged[j] = 1;
            }
            if (!degenerate && r1 <= 4.0 / std::numbers::e_v<double> + 0.05) flagged[j] = 1;
            double r1_hat = degenerate ? 1e6 : std::max(1.02, std::min(r1, 1e6));
            for (std::size_t i = 0; i < nx; ++i) {
                auto ev = series_eval_x(row0, xgrid[i], r1_hat);
                out.state[j][i] = ev.value;
                if (std::abs(std::abs(xgrid[i]) - 1.0) < 1e-14) {
                    // Certified geometric envelope when the fitted radius is
                    // sound; an empirical trailing-term estimate otherwise.
                    double rb = sound_envelope ? ev.remainder_bound : 10.0 * tail;
                    out.remainder_bound[j] = std::max(out.remainder_bound[j], rb);
                }
                out.state_dt[j][i] = series_eval_x(row1, xgrid[i], r1_hat).value;
            }
        } catch (const std::exception& e) {
            errors[j] = e.what();
        }
    });
    for (std::size_t j = 0; j < nt; ++j)
        if (!errors[j].empty())
            throw ConvergenceError("synthesis failure at t = " + std::to_string(tgrid[j]) +
                                   ": " + errors[j]);
    double global_scale = 1e-300;
    for (double s : sample_scale) global_scale = std::max(global_scale, s);
    for (std::size_t j = 0; j < nt; ++j)
        if (tail_suspect[j] && sample_tail[j] > 1e-4 * global_scale)
            throw ConvergenceError("synthesis failure at t = " + std::to_string(tgrid[j]) +
                                   ": series cannot reach |x| = 1 (R1 estimate " +
                                   std::to_string(out.r1_estimate[j]) + ")");
    for (std::size_t j = 0; j < nt; ++j) out.r1_flagged |= (flagged[j] != 0);

    out.controls.t = tgrid;
    for (std::size_t j = 0; j < nt; ++j) {
        out.controls.h_minus.push_back(out.state[j].front());
        out.controls.h_plus.push_back(out.state[j].back());
        out.controls.dh_minus.push_back(out.state_dt[j].front());
        out.controls.dh_plus.push_back(out.state_dt[j].back());
    }
    out.controls.metadata["kmax"] = trunc.kmax;
    out.controls.metadata["nmax"] = trunc.nmax;
    out.controls.metadata["g0_certificate"] = {{"C", g0.certificate().C},
                                               {"H", g0.certificate().H}};
    out.controls.metadata["g1_certificate"] = {{"C", g1.certificate().C},
                                               {"H", g1.certificate().H}};
    out.controls.validate();
    return out;
}

struct PicardResult {
    BivariateJet<double> u0, u1;
    std::vector<double> deltas;   // weighted sup norms of V_k = U_{k+1} - U_k
    std::vector<double> ratios;   // delta_{k+1} / delta_k
    double eps_estimate = 0.0;    // max tail ratio over 4 a_0 (a_0 = 1)
    bool diverged = false;        // deltas increased 3 times in a row
    int iterations = 0;
    bool stabilized = false;      // iterates became exactly stationary
};

namespace detail {

inline BivariateJet<double> integrate_x(const BivariateJet<double>& u) {
    BivariateJet<double> out(u.kmax(), u.nmax(), u.base_x(), u.base_t());
    out.set_avail(0, u.nmax() + 1);
    for (int n = 0; n <= u.nmax(); ++n) out.set(0, n, 0.0);
    for (int k = 1; k <= u.kmax(); ++k) {
        out.set_avail(k, u.avail(k - 1));
        for (int n = 0; n < u.avail(k - 1); ++n) out.set(k, n, u.at(k - 1, n));
    }
    return out;
}

inline double weighted_sup(const BivariateJet<double>& v, double r1, double r2) {
    double worst = 0.0;
    double lr1 = std::log(r1), lr2 = std::log(r2);
    for (int k = 0; k <= v.kmax(); ++k)
        for (int n = 0; n < v.avail(k); ++n) {
            double a = std::abs(v.at(k, n));
            if (a == 0.0) continue;
            worst = std::max(worst,
                             std::exp(std::log(a) + k * lr1 + 2.0 * n * lr2 -
                                      log_factorial(k + 2 * n)));
        }
    return worst;
}

}  // namespace detail

/// Picard iteration U <- U0 + int_0^x (A U + F(x, U)) on the truncated
/// representation: polynomials in x of degree <= kmax whose coefficients are
/// t-jets of depth U0.nmax(). Integration is exact on polynomials; A is the
/// t-jet shift plus component swap; F composes the nonlinearity. Deltas are
/// measured in the envelope-weighted sup norm |entry| R1^k R2^(2n)/(k+2n)!.
inline PicardResult picard_solve(const TimeJetPair<double>& U0,
                                 const AnalyticNonlinearity& f, int kmax, int iters,
                                 double weight_r1 = 2.0, double weight_r2 = 4.0,
                                 const TruncationSpec* trunc_opt = nullptr) {
    U0.validate();
    if (!(weight_r1 > 4.0 / std::numbers::e_v<double> && weight_r2 > weight_r1))
        throw InvalidInput("picard_solve: weights must satisfy 4/e < R1 < R2");
    int nmax = U0.nmax();
    if (nmax < 1) throw InvalidInput("picard_solve: need t-jet depth >= 1");
    TruncationSpec trunc;
    if (trunc_opt) trunc = *trunc_opt;
    trunc.kmax = std::max(2, kmax);
    trunc.nmax = nmax;

    BivariateJet<double> u0(kmax, nmax), u1(kmax, nmax);
    u0.fill_all_present();
    u1.fill_all_present();
    for (int n = 0; n <= nmax; ++n) {
        u0.set(0, n, U0.d[static_cast<std::size_t>(n)]);
        u1.set(0, n, U0.d_tilde[static_cast<std::size_t>(n)]);
    }
    // x-constant initial iterate: higher x-coefficients are present zeros
    PicardResult res{u0, u1, {}, {}, 0.0, false, 0, false};

    int increases = 0;
    for (int it = 0; it < iters; ++it) {
        // A U = (u1, d_t u0); F = (0, -f(x, u0, u1))
        auto du0 = res.u1;
        auto du1_t = jet_shift_t(res.u0);
        auto fj = compose_f(f, res.u0, res.u1, trunc);
        // assemble d_t u0 - f on the eroded presence
        BivariateJet<double> du1(kmax, nmax);
        for (int k = 0; k <= kmax; ++k) {
            int cnt = std::min(k <= du1_t.kmax() ? du1_t.avail(k) : 0, fj.avail(k));
            du1.set_avail(k, cnt);
            for (int n = 0; n < cnt; ++n) du1.set(k, n, du1_t.at(k, n) - fj.at(k, n));
        }
        auto i0 = detail::integrate_x(du0);
        auto i1 = detail::integrate_x(du1);
        BivariateJet<double> n0(kmax, nmax), n1(kmax, nmax);
        for (int k = 0; k <= kmax; ++k) {
            int c0 = (k == 0) ? nmax + 1 : i0.avail(k);
            n0.set_avail(k, c0);
            for (int n = 0; n < c0; ++n)
                n0.set(k, n, (k == 0 ? U0.d[static_cast<std::size_t>(n)] : i0.at(k, n)));
            int c1 = (k == 0) ? nmax + 1 : i1.avail(k);
            n1.set_avail(k, c1);
            for (int n = 0; n < c1; ++n)
                n1.set(k, n, (k == 0 ? U0.d_tilde[static_cast<std::size_t>(n)] : i1.at(k, n)));
        }
        // delta on the common presence
        double delta = 0.0;
        bool identical = true;
        for (int k = 0; k <= kmax; ++k) {
            int cnt = std::min({n0.avail(k), res.u0.avail(k), n1.avail(k), res.u1.avail(k)});
            for (int n = 0; n < cnt; ++n) {
                double dv0 = n0.at(k, n) - res.u0.at(k, n);
                double dv1 = n1.at(k, n) - res.u1.at(k, n);
                identical &= (dv0 == 0.0 && dv1 == 0.0);
                double lr1 = std::log(weight_r1), lr2 = std::log(weight_r2);
                for (double dv : {dv0, dv1})
                    if (dv != 0.0)
                        delta = std::max(delta,
                                         std::exp(std::log(std::abs(dv)) + k * lr1 +
                                                  2.0 * n * lr2 - log_factorial(k + 2 * n)));
            }
        }
        res.u0 = std::move(n0);
        res.u1 = std::move(n1);
        res.iterations = it + 1;
        if (identical) {
            res.stabilized = true;
            break;
        }
        if (!res.deltas.empty()) {
            double prev = res.deltas.back();
            res.ratios.push_back(prev > 0 ? delta / prev : 0.0);
            increases = (delta > prev) ? increases + 1 : 0;
            if (increases >= 3) {
                res.diverged = true;  // reported, not thrown
                res.deltas.push_back(delta);
                break;
            }
        }
        res.deltas.push_back(delta);
    }
    double tail = 0.0;
    std::size_t start = res.ratios.size() > 4 ? res.ratios.size() - 4 : 0;
    for (std::size_t i = start; i < res.ratios.size(); ++i) tail = std::max(tail, res.ratios[i]);
    res.eps_estimate = tail / 4.0;
    return res;
}

struct ConvergenceDiagnostics {
    std::vector<double> r1_per_sample;
    double r1_min = 0.0;
    double envelope_fit_quality = 0.0;  // fraction of samples with a clean fit
    bool degenerate = false;
    bool pass = false;
};

inline ConvergenceDiagnostics convergence_diagnostics(const SynthesisResult& result) {
    ConvergenceDiagnostics d;
    d.r1_per_sample = result.r1_estimate;
    double rmin = std::numeric_limits<double>::infinity();
    std::size_t clean = 0, total = 0;
    bool all_degenerate = true;
    for (std::size_t j = 0; j < result.r1_estimate.size(); ++j) {
        if (result.r1_degenerate[j]) continue;
        all_degenerate = false;
        ++total;
        rmin = std::min(rmin, result.r1_estimate[j]);
        if (result.r1_estimate[j] > result.r1_flag_threshold) ++clean;
    }
    d.degenerate = all_degenerate;
    if (all_degenerate) {
        d.r1_min = std::numeric_limits<double>::infinity();
        d.envelope_fit_quality = 1.0;
        d.pass = true;  // zero data: flagged degenerate but passing
        return d;
    }
    d.r1_min = rmin;
    d.envelope_fit_quality = total ? static_cast<double>(clean) / total : 0.0;
    d.pass = !result.r1_flagged;
    return d;
}

inline nlohmann::ordered_json to_json(const ConvergenceDiagnostics& d) {
    nlohmann::ordered_json j;
    j["r1_min"] = std::isfinite(d.r1_min) ? d.r1_min : -1.0;
    j["degenerate"] = d.degenerate;
    j["envelope_fit_quality"] = d.envelope_fit_quality;
    j["pass"] = d.pass;
    return j;
}

}  // namespace heatreach
