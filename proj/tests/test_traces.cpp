#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "heatreach/trace.hpp"
#include "oracles.hpp"

using namespace heatreach;

namespace {

double grid_gevrey2_quotient(const TimeTrace& g, double C, double H, int nmax) {
    double worst = 0.0;
    for (int i = 0; i <= 200; ++i) {
        double t = g.domain_lo() + (g.domain_hi() - g.domain_lo()) * i / 200.0;
        auto d = g.derivs_upto(nmax, t);
        for (int n = 0; n <= nmax; ++n) {
            double denom = C * std::exp(n * std::log(H) + log_factorial(2 * n));
            if (denom > 0.0) worst = std::max(worst, std::abs(d[(std::size_t)n]) / denom);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("smoothstep series basics") {
    CHECK(taylor::smoothstep_value(0.0) == 0.0);
    CHECK(taylor::smoothstep_value(1.0) == 1.0);
    CHECK(taylor::smoothstep_value(0.5) == Catch::Approx(0.5).epsilon(1e-14));
    double lo = taylor::smoothstep_value(0.2);
    double hi = taylor::smoothstep_value(0.8);
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
    CHECK(lo < hi);
    CHECK(lo == Catch::Approx(1.0 - hi).margin(1e-13));  // symmetry (margin: 1-hi cancels)

    // derivative ladder vs finite differences at a generic point
    for (int n = 1; n <= 4; ++n) {
        auto fd = oracles::fd_derivative(
            [n](double u) {
                auto s = taylor::smoothstep_series(u, n - 1);
                return s[(std::size_t)n - 1] * factorial(n - 1);
            },
            0.63, 1e-4);
        auto exact = taylor::smoothstep_series(0.63, n)[(std::size_t)n] * factorial(n);
        CHECK(fd == Catch::Approx(exact).epsilon(1e-6));
    }
}

TEST_CASE("gevrey_cutoff plateau and transition") {
    double T = 1.0;
    auto rho = gevrey_cutoff(T, 20);
    CHECK(rho.deriv(0, 0.0) == 1.0);
    CHECK(rho.deriv(0, T) == 0.0);
    double mid = rho.deriv(0, T / 2);
    CHECK(mid > 0.0);
    CHECK(mid < 1.0);
    for (int n = 0; n <= 10; ++n) {
        if (n > 0) CHECK(rho.deriv(n, T / 8) == 0.0);
        if (n > 0) CHECK(rho.deriv(n, 0.9 * T) == 0.0);
    }
    CHECK(rho.deriv(0, T / 8) == 1.0);

    // monotone decreasing through the transition
    double prev = 1.0;
    for (double t = 0.25; t <= 0.751; t += 0.05) {
        double v = rho.deriv(0, t);
        CHECK(v <= prev + 1e-15);
        prev = v;
    }

    // first derivative vs finite differences mid-transition
    auto fd = oracles::fd_derivative([&rho](double t) { return rho.deriv(0, t); }, 0.45, 1e-5);
    CHECK(fd == Catch::Approx(rho.deriv(1, 0.45)).epsilon(1e-7));

    // Gevrey-3/2 certificate: max_n,t |rho^(n)| r^n / (n!)^(3/2) finite for
    // some r > 0, n <= 14
    double best = std::numeric_limits<double>::infinity();
    for (double r : {0.05, 0.1, 0.2}) {
        double worst = 0.0;
        for (int i = 0; i <= 200; ++i) {
            double t = i / 200.0;
            auto d = rho.derivs_upto(14, t);
            for (int n = 0; n <= 14; ++n) {
                double q = std::abs(d[(std::size_t)n]) *
                           std::exp(n * std::log(r) - 1.5 * log_factorial(n));
                worst = std::max(worst, q);
            }
        }
        best = std::min(best, worst);
    }
    CHECK(std::isfinite(best));
    CHECK(best > 0.0);

    // own certificate passes on the grid
    auto cert = rho.certificate();
    CHECK(grid_gevrey2_quotient(rho, cert.C, cert.H, rho.max_order()) <= 1.0 + 1e-9);
}

TEST_CASE("borel_realize basics") {
    SECTION("zero jet gives the zero trace") {
        auto g = borel_realize({0.0, 0.0, 0.0}, 0.05, 0.08, 0.0, 1.0);
        CHECK(g.kind() == "zero");
        CHECK(g.certificate().C == 0.0);
        CHECK(g.deriv(3, 0.7) == 0.0);
    }

    SECTION("gap condition is enforced") {
        CHECK_THROWS_AS(borel_realize({1.0}, 0.05, 0.06, 0.0, 1.0), DomainError);
    }

    SECTION("finite jet (1, 0, 0): plateau at the base point") {
        auto g = borel_realize({1.0, 0.0, 0.0, 0.0}, 0.04, 0.08, 0.0, 1.0);
        CHECK(g.deriv(0, 0.0) == 1.0);
        CHECK(g.deriv(1, 0.0) == 0.0);
        CHECK(g.deriv(2, 0.0) == 0.0);
        // continuity from the right at the base point
        CHECK(g.deriv(0, 1e-7) == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("borel_realize: saturated Gevrey-2 jet") {
    // d_q = (2q)! (1/30)^q with H = 1/30, H_hat = 0.05 > e^(1/e)/30
    std::vector<double> d;
    double H = 1.0 / 30.0, Hhat = 0.05;
    for (int q = 0; q <= 12; ++q) d.push_back(factorial(2 * q) * std::pow(H, q));
    auto g = borel_realize(d, H, Hhat, 0.0, 1.0);

    // exact jet match at the base point
    for (int q = 0; q <= 12; ++q) CHECK(g.deriv(q, 0.0) == d[(std::size_t)q]);

    // derivative ladder consistency: finite differences of g^(n-1) against
    // g^(n) at interior points (step scaled per order)
    for (double t0 : {0.05, 0.2, 0.6}) {
        for (int n = 1; n <= 6; ++n) {
            double h = 1e-4;
            double fd = oracles::fd_derivative(
                [&g, n](double t) { return g.deriv(n - 1, t); }, t0, h);
            double exact = g.deriv(n, t0);
            double scale = std::max(std::abs(exact), 1e-6);
            CHECK(std::abs(fd - exact) / scale < 1e-4);
        }
    }

    // certificate soundness on its own grid
    auto cert = g.certificate();
    CHECK(cert.H == Hhat);
    CHECK(grid_gevrey2_quotient(g, cert.C, cert.H, g.max_order()) <= 1.0 + 1e-9);
    // and the constant did not inflate beyond the construction margin
    double c_fit = 0.0;
    for (int q = 0; q <= 12; ++q)
        c_fit = std::max(c_fit, d[(std::size_t)q] / (std::pow(H, q) * factorial(2 * q)));
    CHECK(cert.C <= 64.0 * c_fit * (1.0 + 1e-6));
}

TEST_CASE("borel_realize: right-based trace realizes the jet at t2") {
    std::vector<double> d = {0.01, -0.002, 0.0005, 3e-5};
    auto g = borel_realize(d, 0.0427, 0.062, 0.0, 1.0, TraceBase::right);
    for (int q = 0; q < (int)d.size(); ++q) CHECK(g.deriv(q, 1.0) == d[(std::size_t)q]);
    // smooth on the interior
    CHECK(std::isfinite(g.deriv(5, 0.3)));
}

TEST_CASE("borel small-t evaluation agrees with a long-double quadrature oracle") {
    std::vector<double> d;
    double H = 0.0427, Hhat = 0.062;
    for (int q = 0; q <= 8; ++q)
        d.push_back(0.01 * factorial(2 * q) * std::pow(H, q) * ((q % 2) ? -1.0 : 1.0));
    auto g = borel_realize(d, H, Hhat, 0.0, 1.0);

    // oracle: g(t) = P(t) - 2 integral_{xi_f}^{xi_T} K(xi,t) B(xi)(1-chi) dxi
    // with a dense trapezoid in long double; parameters read back from JSON
    auto params = g.to_json()["params"];
    long double xf = params["xi_flat"].get<double>();
    long double x0 = params["xi_support"].get<double>();
    auto bval = [&](long double xi) {
        long double acc = 0.0L, p = 1.0L;
        for (int q = 0; q < (int)d.size(); ++q) {
            acc += (long double)d[(std::size_t)q] * p / (long double)factorial(2 * q);
            p *= xi * xi;
        }
        return acc;
    };
    auto chi = [&](long double xi) -> long double {
        if (xi <= xf) return 1.0L;
        if (xi >= x0) return 0.0L;
        return (long double)taylor::smoothstep_value((double)((x0 - xi) / (x0 - xf)));
    };
    for (double t : {0.02, 0.1, 0.4}) {
        long double xT = std::sqrt(4.0L * t * 80.0L) + x0;
        const int N = 400000;
        long double sum = 0.0L, hstep = (xT - xf) / N;
        for (int i = 0; i <= N; ++i) {
            long double xi = xf + hstep * i;
            long double w = (i == 0 || i == N) ? 0.5L : 1.0L;
            sum += w * std::exp(-xi * xi / (4.0L * t)) * bval(xi) * (1.0L - chi(xi));
        }
        long double E = 2.0L * sum * hstep / std::sqrt(4.0L * std::numbers::pi_v<long double> * t);
        long double P = 0.0L;
        for (int q = (int)d.size() - 1; q >= 0; --q)
            P = P * t / (long double)(q + 1) + (long double)d[(std::size_t)q];
        // P above is sum d_q t^q / q! via Horner
        double want = (double)(P - E);
        CHECK(g.deriv(0, t) == Catch::Approx(want).margin(1e-12).epsilon(1e-9));
    }
}

TEST_CASE("blend_traces") {
    double T = 1.0;
    auto rho = gevrey_cutoff(T, 30);

    SECTION("hat == tilde: blend equals either at all derivatives") {
        auto a = make_exp_trace(0.01, 1.0, 0.0, T, 30);
        auto blend = blend_traces(a, a, rho);
        for (double t : {0.0, 0.3, 0.77, 1.0})
            for (int n = 0; n <= 10; ++n)
                CHECK(blend.deriv(n, t) == Catch::Approx(a.deriv(n, t)).epsilon(1e-12));
    }

    SECTION("tilde == 0: all derivatives vanish at T (driving to rest)") {
        auto a = make_exp_trace(0.01, 1.0, 0.0, T, 30);
        auto z = make_zero_trace(0.0, T, 0.1, 30);
        auto blend = blend_traces(a, z, rho);
        for (int n = 0; n <= 12; ++n) CHECK(blend.deriv(n, T) == 0.0);
        CHECK(blend.deriv(0, 0.0) == 0.01);
    }

    SECTION("generic pair: endpoint jets equal the components exactly") {
        auto a = make_exp_trace(0.01, 1.0, 0.0, T, 30);
        auto b = make_exp_trace(-0.003, 2.0, 0.0, T, 30);
        auto blend = blend_traces(a, b, rho);
        for (int n = 0; n <= 12; ++n) {
            CHECK(blend.deriv(n, 0.0) == a.deriv(n, 0.0));
            CHECK(blend.deriv(n, T) == b.deriv(n, T));
        }
        // own certificate passes
        auto cert = blend.certificate();
        CHECK(grid_gevrey2_quotient(blend, cert.C, cert.H, blend.max_order()) <= 1.0 + 1e-9);
        // closure property: the grid quotient sup |g^(n)| / (L^n (n!)^2)
        // against a pipeline-style L stays finite after blending
        double L = 0.248, worst = 0.0;
        for (int i = 0; i <= 200; ++i) {
            double t = i / 200.0;
            auto dv = blend.derivs_upto(14, t);
            for (int n = 0; n <= 14; ++n)
                worst = std::max(worst, std::abs(dv[(std::size_t)n]) *
                                            std::exp(-n * std::log(L) - 2.0 * log_factorial(n)));
        }
        CHECK(std::isfinite(worst));
    }

    SECTION("domain mismatch is rejected") {
        auto a = make_exp_trace(1.0, 1.0, 0.0, T, 30);
        auto b = make_exp_trace(1.0, 1.0, 0.0, 2 * T, 30);
        CHECK_THROWS_AS(blend_traces(a, b, rho), InvalidInput);
    }
}

TEST_CASE("trace JSON and CSV export") {
    auto g = make_exp_trace(0.5, -1.0, 0.0, 1.0, 10);
    auto j = g.to_json();
    CHECK(j["kind"] == "closed_form");
    CHECK(j["params"]["family"] == "exp_scaled");
    std::string path = "/tmp/heatreach_trace_sample.csv";
    g.sample_csv(path, 3, 11);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "t,g0,g1,g2,g3");
    int rows = 0;
    std::string line;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 11);
}
