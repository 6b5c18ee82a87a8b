#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatreach/common.hpp"
#include "heatreach/nonlinearity.hpp"
#include "heatreach/sideways.hpp"

namespace heatreach {

enum class Scheme { imex_cn, explicit_rk4_check };

struct SimConfig {
    int nx = 201;  // interior grid points
    int nt = 4000;
    Scheme scheme = Scheme::imex_cn;
    double T = 1.0;
    std::function<double(double, double)> source;  // optional manufactured S(x, t)
    int snapshots = 65;

    void validate() const {
        if (nx < 3) throw InvalidInput("SimConfig: nx must be >= 3");
        if (nt < 1) throw InvalidInput("SimConfig: nt must be >= 1");
        if (!(T > 0)) throw InvalidInput("SimConfig: T must be positive");
        if (scheme == Scheme::explicit_rk4_check) {
            double h = 2.0 / (nx + 1);
            if (T / nt > h * h / 2.0 + 1e-15)
                throw InvalidInput("SimConfig: explicit scheme needs dt <= dx^2/2");
        }
    }
};

struct Trajectory {
    std::vector<double> xgrid;              // full grid including boundaries
    std::vector<double> times;              // snapshot times
    std::vector<std::vector<double>> snaps; // snaps[m][i]
    std::vector<double> terminal;           // y(x, T)

    void write_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw InvalidInput("Trajectory: cannot open " + path);
        os << "t";
        char buf[64];
        for (double x : xgrid) {
            std::snprintf(buf, sizeof buf, ",%.17g", x);
            os << buf;
        }
        os << "\n";
        for (std::size_t m = 0; m < times.size(); ++m) {
            std::snprintf(buf, sizeof buf, "%.17g", times[m]);
            os << buf;
            for (double v : snaps[m]) {
                std::snprintf(buf, sizeof buf, ",%.17g", v);
                os << buf;
            }
            os << "\n";
        }
    }
};

namespace fd {

/// Piecewise-cubic boundary data: Hermite from trace derivative samples when
/// available, natural cubic spline otherwise.
class BoundaryInterpolant {
public:
    BoundaryInterpolant() = default;
    BoundaryInterpolant(std::vector<double> t, std::vector<double> v, std::vector<double> dv)
        : t_(std::move(t)), v_(std::move(v)), dv_(std::move(dv)) {
        if (dv_.empty()) build_spline_slopes();
    }

    double value(double x) const { return eval(x).first; }
    double slope(double x) const { return eval(x).second; }

private:
    std::pair<double, double> eval(double x) const {
        std::size_t n = t_.size();
        if (x <= t_.front()) x = t_.front();
        if (x >= t_.back()) x = t_.back();
        std::size_t lo = std::upper_bound(t_.begin(), t_.end(), x) - t_.begin();
        lo = std::min(std::max<std::size_t>(lo, 1), n - 1) - 1;
        double h = t_[lo + 1] - t_[lo];
        double s = (x - t_[lo]) / h;
        double y0 = v_[lo], y1 = v_[lo + 1], m0 = dv_[lo] * h, m1 = dv_[lo + 1] * h;
        double s2 = s * s, s3 = s2 * s;
        double val = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * m0 +
                     (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * m1;
        double dvds = (6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * m0 +
                      (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * m1;
        return {val, dvds / h};
    }

    // Natural cubic spline slopes via the standard tridiagonal system.
    void build_spline_slopes() {
        std::size_t n = t_.size();
        dv_.assign(n, 0.0);
        if (n == 2) {
            double m = (v_[1] - v_[0]) / (t_[1] - t_[0]);
            dv_[0] = dv_[1] = m;
            return;
        }
        std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), r(n, 0.0);
        b[0] = 2.0;
        c[0] = 1.0;
        r[0] = 3.0 * (v_[1] - v_[0]) / (t_[1] - t_[0]);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double hl = t_[i] - t_[i - 1], hr = t_[i + 1] - t_[i];
            a[i] = 1.0 / hl;
            b[i] = 2.0 * (1.0 / hl + 1.0 / hr);
            c[i] = 1.0 / hr;
            r[i] = 3.0 * ((v_[i] - v_[i - 1]) / (hl * hl) + (v_[i + 1] - v_[i]) / (hr * hr));
        }
        a[n - 1] = 1.0;
        b[n - 1] = 2.0;
        r[n - 1] = 3.0 * (v_[n - 1] - v_[n - 2]) / (t_[n - 1] - t_[n - 2]);
        for (std::size_t i = 1; i < n; ++i) {
            double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            r[i] -= w * r[i - 1];
        }
        dv_[n - 1] = r[n - 1] / b[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) dv_[i] = (r[i] - c[i] * dv_[i + 1]) / b[i];
    }

    std::vector<double> t_, v_, dv_;
};

/// Solves the constant-coefficient tridiagonal system (dl, d, du) in place.
inline void thomas_solve(const std::vector<double>& dl, const std::vector<double>& d,
                         const std::vector<double>& du, std::vector<double>& rhs) {
    std::size_t n = d.size();
    static thread_local std::vector<double> cp, dp;
    cp.assign(n, 0.0);
    dp.assign(n, 0.0);
    cp[0] = du[0] / d[0];
    dp[0] = rhs[0] / d[0];
    for (std::size_t i = 1; i < n; ++i) {
        double m = d[i] - dl[i] * cp[i - 1];
        cp[i] = du[i] / m;
        dp[i] = (rhs[i] - dl[i] * dp[i - 1]) / m;
    }
    rhs[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = dp[i] - cp[i] * rhs[i + 1];
}

/// 4th-order first derivative on the full grid (centered interior, biased
/// near the ends), h-scaled.
inline void gradient4(const std::vector<double>& u, double h, std::vector<double>& du) {
    std::size_t n = u.size();
    du.resize(n);
    double c = 1.0 / (12.0 * h);
    du[0] = (-25 * u[0] + 48 * u[1] - 36 * u[2] + 16 * u[3] - 3 * u[4]) * c;
    du[1] = (-3 * u[0] - 10 * u[1] + 18 * u[2] - 6 * u[3] + u[4]) * c;
    for (std::size_t i = 2; i + 2 < n; ++i)
        du[i] = (u[i - 2] - 8 * u[i - 1] + 8 * u[i + 1] - u[i + 2]) * c;
    du[n - 2] = (3 * u[n - 1] + 10 * u[n - 2] - 18 * u[n - 3] + 6 * u[n - 4] - u[n - 5]) * c;
    du[n - 1] = (25 * u[n - 1] - 48 * u[n - 2] + 36 * u[n - 3] - 16 * u[n - 4] + 3 * u[n - 5]) * c;
}

}  // namespace fd

/// Forward IMEX solver for d_t y = d_xx y + f(x, y, d_x y) (+ optional
/// manufactured source) with Dirichlet rows pinned to interpolated controls.
/// Space: 4th-order compact (Numerov) second-difference operator
///   M y_t = K y / h^2 + M (f + S), M = tridiag(1,10,1)/12, K = tridiag(1,-2,1);
/// time: Crank-Nicolson with one fixed-point corrector pass on f. The
/// boundary column of M multiplies y_t at the wall, handled exactly through
/// the control increments. The RK4 variant integrates the same semi-discrete
/// system explicitly and is used as an independent cross-check.
inline Trajectory simulate(const std::vector<double>& y0_samples, const ControlSignal& controls,
                           const AnalyticNonlinearity& f, const SimConfig& cfg) {
    cfg.validate();
    controls.validate();
    if (controls.t.front() > 1e-12 || controls.t.back() < cfg.T - 1e-12)
        throw InvalidInput("simulate: controls must cover [0, T]");
    const int nx = cfg.nx;
    const double h = 2.0 / (nx + 1);
    const double dt = cfg.T / cfg.nt;
    if (y0_samples.size() != static_cast<std::size_t>(nx) + 2)
        throw InvalidInput("simulate: y0 must be sampled on the full grid (nx+2 points)");

    std::vector<double> xg(static_cast<std::size_t>(nx) + 2);
    for (int i = 0; i < nx + 2; ++i) xg[static_cast<std::size_t>(i)] = -1.0 + h * i;

    fd::BoundaryInterpolant hminus(controls.t, controls.h_minus, controls.dh_minus);
    fd::BoundaryInterpolant hplus(controls.t, controls.h_plus, controls.dh_plus);

    const bool has_f = !f.empty();
    const bool has_src = static_cast<bool>(cfg.source);

    // f + S on the full grid from the full state
    std::vector<double> grad;
    auto eval_f = [&](const std::vector<double>& u, double t, std::vector<double>& out) {
        out.assign(u.size(), 0.0);
        if (has_f) {
            fd::gradient4(u, h, grad);
            for (std::size_t i = 0; i < u.size(); ++i) {
                if (std::abs(u[i]) >= 0.99 * f.b0 || std::abs(grad[i]) >= 0.99 * f.b1)
                    throw DomainError("blow-up/domain exit at t = " + std::to_string(t));
                out[i] = f.eval(xg[i], u[i], grad[i]);
            }
        }
        if (has_src)
            for (std::size_t i = 0; i < u.size(); ++i) out[i] += cfg.source(xg[i], t);
    };

    // interior row i: (M y_t)_i = (K y)_i / h^2 + (M (f+S))_i
    auto apply_m = [&](const std::vector<double>& full, int i) {
        return (full[static_cast<std::size_t>(i - 1)] + 10.0 * full[static_cast<std::size_t>(i)] +
                full[static_cast<std::size_t>(i + 1)]) /
               12.0;
    };
    auto apply_k = [&](const std::vector<double>& full, int i) {
        return full[static_cast<std::size_t>(i - 1)] - 2.0 * full[static_cast<std::size_t>(i)] +
               full[static_cast<std::size_t>(i + 1)];
    };

    std::vector<double> u = y0_samples;
    u.front() = hminus.value(0.0);
    u.back() = hplus.value(0.0);

    Trajectory traj;
    traj.xgrid = xg;
    int snap_every = std::max(1, cfg.nt / std::max(1, cfg.snapshots - 1));
    auto snapshot = [&](double t) {
        traj.times.push_back(t);
        traj.snaps.push_back(u);
    };
    snapshot(0.0);

    if (cfg.scheme == Scheme::imex_cn) {
        const double lam = dt / (2.0 * h * h);
        std::vector<double> dl(static_cast<std::size_t>(nx), 1.0 / 12.0 + lam),
            dd(static_cast<std::size_t>(nx), 10.0 / 12.0 + 2.0 * lam),
            du(static_cast<std::size_t>(nx), 1.0 / 12.0 + lam);
        // left-hand matrix is M - lam K restricted to the interior
        for (auto& v : dl) v = 1.0 / 12.0 - lam;
        for (auto& v : du) v = 1.0 / 12.0 - lam;

        std::vector<double> fcur, fnew, rhs(static_cast<std::size_t>(nx)), ustar;
        eval_f(u, 0.0, fcur);
        for (int m = 0; m < cfg.nt; ++m) {
            double t1 = (m + 1) * dt;
            double bl1 = hminus.value(t1), br1 = hplus.value(t1);

            // (M - lam K) y^1_int = (M + lam K) y^0 (full grid, exact M-part)
            //                        + dt M f_half - (1/12 - lam) b^1
            auto assemble = [&](const std::vector<double>& fhalf) {
                for (int i = 1; i <= nx; ++i)
                    rhs[static_cast<std::size_t>(i - 1)] =
                        apply_m(u, i) + lam * apply_k(u, i) + dt * apply_m(fhalf, i);
                rhs[0] -= (1.0 / 12.0 - lam) * bl1;
                rhs[static_cast<std::size_t>(nx - 1)] -= (1.0 / 12.0 - lam) * br1;
            };

            // predictor with f at t0, then one corrector with the midpoint f
            std::vector<double> fhalf = fcur;
            assemble(fhalf);
            ustar = u;
            {
                std::vector<double> sol = rhs;
                fd::thomas_solve(dl, dd, du, sol);
                for (int i = 1; i <= nx; ++i) ustar[static_cast<std::size_t>(i)] = sol[static_cast<std::size_t>(i - 1)];
                ustar.front() = bl1;
                ustar.back() = br1;
            }
            eval_f(ustar, t1, fnew);
            for (std::size_t i = 0; i < fhalf.size(); ++i) fhalf[i] = 0.5 * (fcur[i] + fnew[i]);
            assemble(fhalf);
            {
                std::vector<double> sol = rhs;
                fd::thomas_solve(dl, dd, du, sol);
                for (int i = 1; i <= nx; ++i) u[static_cast<std::size_t>(i)] = sol[static_cast<std::size_t>(i - 1)];
                u.front() = bl1;
                u.back() = br1;
            }
            eval_f(u, t1, fcur);
            if ((m + 1) % snap_every == 0 || m + 1 == cfg.nt) snapshot(t1);
        }
    } else {
        // explicit RK4 on M y_t = K y / h^2 + M (f+S) + boundary terms
        std::vector<double> dl(static_cast<std::size_t>(nx), 1.0 / 12.0),
            dd(static_cast<std::size_t>(nx), 10.0 / 12.0),
            du(static_cast<std::size_t>(nx), 1.0 / 12.0);
        std::vector<double> fv, v(static_cast<std::size_t>(nx)), k1, k2, k3, k4;
        auto rhs_fn = [&](const std::vector<double>& full, double t, std::vector<double>& out) {
            eval_f(full, t, fv);
            for (int i = 1; i <= nx; ++i)
                v[static_cast<std::size_t>(i - 1)] =
                    apply_k(full, i) / (h * h) + apply_m(fv, i);
            // M couples the boundary time-derivative; controls supply it
            v[0] -= (1.0 / 12.0) * hminus.slope(t);
            v[static_cast<std::size_t>(nx - 1)] -= (1.0 / 12.0) * hplus.slope(t);
            fd::thomas_solve(dl, dd, du, v);
            out = v;
        };
        std::vector<double> stage(u.size());
        for (int m = 0; m < cfg.nt; ++m) {
            double t0 = m * dt, t1 = (m + 1) * dt, th = t0 + dt / 2;
            rhs_fn(u, t0, k1);
            stage = u;
            for (int i = 1; i <= nx; ++i) stage[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] + 0.5 * dt * k1[static_cast<std::size_t>(i - 1)];
            stage.front() = hminus.value(th);
            stage.back() = hplus.value(th);
            rhs_fn(stage, th, k2);
            for (int i = 1; i <= nx; ++i) stage[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] + 0.5 * dt * k2[static_cast<std::size_t>(i - 1)];
            stage.front() = hminus.value(th);
            stage.back() = hplus.value(th);
            rhs_fn(stage, th, k3);
            for (int i = 1; i <= nx; ++i) stage[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] + dt * k3[static_cast<std::size_t>(i - 1)];
            stage.front() = hminus.value(t1);
            stage.back() = hplus.value(t1);
            rhs_fn(stage, t1, k4);
            for (int i = 1; i <= nx; ++i)
                u[static_cast<std::size_t>(i)] +=
                    dt / 6.0 *
                    (k1[static_cast<std::size_t>(i - 1)] + 2 * k2[static_cast<std::size_t>(i - 1)] +
                     2 * k3[static_cast<std::size_t>(i - 1)] + k4[static_cast<std::size_t>(i - 1)]);
            u.front() = hminus.value(t1);
            u.back() = hplus.value(t1);
            if ((m + 1) % snap_every == 0 || m + 1 == cfg.nt) snapshot(t1);
        }
    }

    traj.terminal = u;
    return traj;
}

struct TerminalError {
    double sup = 0.0;
    double l2 = 0.0;
};

/// Sup and trapezoid-weighted discrete L2 distance at t = T.
inline TerminalError terminal_error(const Trajectory& traj, const std::vector<double>& y1_samples) {
    if (traj.terminal.size() != y1_samples.size())
        throw InvalidInput("terminal_error: sample count mismatch");
    TerminalError e;
    double h = traj.xgrid[1] - traj.xgrid[0];
    double acc = 0.0;
    for (std::size_t i = 0; i < y1_samples.size(); ++i) {
        double d = traj.terminal[i] - y1_samples[i];
        e.sup = std::max(e.sup, std::abs(d));
        double w = (i == 0 || i + 1 == y1_samples.size()) ? 0.5 : 1.0;
        acc += w * d * d;
    }
    e.l2 = std::sqrt(h * acc);
    return e;
}

}  // namespace heatreach
