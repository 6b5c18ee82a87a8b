#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "heatreach/jet.hpp"
#include "oracles.hpp"

using namespace heatreach;
using oracles::Poly2;

namespace {

TruncationSpec spec(int k, int n) {
    TruncationSpec t;
    t.kmax = k;
    t.nmax = n;
    return t;
}

BivariateJet<double> jet_of_x(int kmax, int nmax) {
    BivariateJet<double> j(kmax, nmax, 0.0, 0.0);
    j.fill_all_present();
    j.set(1, 0, 1.0);
    return j;
}

}  // namespace

TEST_CASE("jet_mul on constants") {
    auto a = jet_constant(2.0, 4, 3);
    auto b = jet_constant(3.0, 4, 3);
    auto c = jet_mul(a, b, spec(4, 3));
    CHECK(c.at(0, 0) == 6.0);
    for (int k = 0; k <= 4; ++k)
        for (int n = 0; n <= 3; ++n)
            if (k + n > 0) CHECK(c.at(k, n) == 0.0);
}

TEST_CASE("jet of x squared is 2 at (2,0)") {
    auto x = jet_of_x(4, 2);
    auto c = jet_mul(x, x, spec(4, 2));
    for (int k = 0; k <= 4; ++k)
        for (int n = 0; n <= 2; ++n) {
            if (k == 2 && n == 0)
                CHECK(c.at(k, n) == 2.0);
            else
                CHECK(c.at(k, n) == 0.0);
        }
}

TEST_CASE("jet_mul matches the polynomial product oracle") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Poly2<double> p, q;
        std::uniform_int_distribution<int> deg(0, 3);
        for (int m = 0; m < 6; ++m) {
            p.c[{deg(rng), deg(rng)}] = oracles::random_dyadic(rng, 1.0);
            q.c[{deg(rng), deg(rng)}] = oracles::random_dyadic(rng, 1.0);
        }
        auto ja = oracles::jet_of_poly(p, 8, 8);
        auto jb = oracles::jet_of_poly(q, 8, 8);
        auto jc = jet_mul(ja, jb, spec(8, 8));
        auto want = oracles::jet_of_poly(p * q, 8, 8);
        for (int k = 0; k <= 8; ++k)
            for (int n = 0; n <= 8; ++n)
                CHECK(jc.at(k, n) == Catch::Approx(want.at(k, n)).margin(1e-12));
    }
}

TEST_CASE("jet_mul is commutative and associative up to truncation") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        BivariateJet<double> a(4, 4), b(4, 4), c(4, 4);
        for (auto* j : {&a, &b, &c}) {
            j->fill_all_present();
            for (int k = 0; k <= 4; ++k)
                for (int n = 0; n <= 4; ++n) j->set(k, n, oracles::random_dyadic(rng, 1.0));
        }
        auto ab = jet_mul(a, b, spec(4, 4));
        auto ba = jet_mul(b, a, spec(4, 4));
        auto abc1 = jet_mul(ab, c, spec(4, 4));
        auto abc2 = jet_mul(a, jet_mul(b, c, spec(4, 4)), spec(4, 4));
        for (int k = 0; k <= 4; ++k)
            for (int n = 0; n <= 4; ++n) {
                CHECK(ab.at(k, n) == Catch::Approx(ba.at(k, n)).epsilon(1e-12));
                double scale = std::max({1.0, std::abs(abc1.at(k, n))});
                CHECK(std::abs(abc1.at(k, n) - abc2.at(k, n)) / scale < 1e-12);
            }
    }
}

TEST_CASE("jet shifts") {
    auto x = jet_of_x(4, 2);
    auto dx = jet_shift_x(x);
    CHECK(dx.at(0, 0) == 1.0);
    for (int k = 1; k <= 3; ++k) CHECK(dx.at(k, 0) == 0.0);

    auto c = jet_constant(5.0, 3, 3);
    auto dt = jet_shift_t(c);
    for (int k = 0; k <= 3; ++k)
        for (int n = 0; n <= 2; ++n) CHECK(dt.at(k, n) == 0.0);

    std::mt19937_64 rng(3);
    BivariateJet<double> r(6, 3);
    r.fill_all_present();
    for (int k = 0; k <= 6; ++k)
        for (int n = 0; n <= 3; ++n) r.set(k, n, oracles::random_dyadic(rng, 1.0));
    auto twice = jet_shift_x(jet_shift_x(r));
    for (int k = 0; k <= 4; ++k)
        for (int n = 0; n <= 3; ++n) CHECK(twice.at(k, n) == r.at(k + 2, n));

    BivariateJet<double> tiny(0, 0);
    CHECK_THROWS_AS(jet_shift_x(tiny), InvalidInput);
    CHECK_THROWS_AS(jet_shift_t(tiny), InvalidInput);
}

TEST_CASE("nonlinearity_jet: empty coefficients give the zero jet") {
    auto f = preset_linear_heat();
    auto y = jet_of_x(5, 2);
    auto fj = nonlinearity_jet(f, y, spec(4, 2));
    for (int k = 0; k <= 4; ++k)
        for (int n = 0; n <= 2; ++n) CHECK(fj.at(k, n) == 0.0);
}

TEST_CASE("nonlinearity_jet: Burgers on the jet of x") {
    auto f = preset_burgers();
    auto y = jet_of_x(6, 2);
    auto fj = nonlinearity_jet(f, y, spec(5, 2));
    // f = -y y_x = -x, so only d_x f = -1 survives at the base point
    CHECK(fj.at(0, 0) == 0.0);
    CHECK(fj.at(1, 0) == -1.0);
    for (int k = 2; k <= 5; ++k) CHECK(fj.at(k, 0) == 0.0);
}

TEST_CASE("nonlinearity_jet: potential phi(x) = x on the constant jet") {
    AnalyticNonlinearity f;
    f.coeffs[{1, 0, 1}] = 1.0;
    f.M = 25.0;
    f.validate();
    auto one = jet_constant(1.0, 6, 2);
    auto fj = nonlinearity_jet(f, one, spec(5, 2));
    for (int k = 0; k <= 5; ++k)
        for (int n = 0; n <= 2; ++n) {
            if (k == 1 && n == 0)
                CHECK(fj.at(k, n) == 1.0);
            else
                CHECK(fj.at(k, n) == 0.0);
        }
}

TEST_CASE("nonlinearity_jet matches the polynomial oracle") {
    std::mt19937_64 rng(23);
    auto presets = {preset_burgers(), preset_allen_cahn(), preset_potential({0.0, 0.1})};
    for (const auto& f : presets) {
        for (int trial = 0; trial < 6; ++trial) {
            Poly2<double> p;
            std::uniform_int_distribution<int> deg(0, 3);
            for (int m = 0; m < 5; ++m)
                p.c[{deg(rng), deg(rng)}] = oracles::random_dyadic(rng, 0.5);
            auto y = oracles::jet_of_poly(p, 9, 4);
            auto fj = nonlinearity_jet(f, y, spec(8, 4));
            auto want = oracles::jet_of_poly(oracles::apply_nonlinearity(f, p), 8, 4);
            for (int k = 0; k <= 8; ++k)
                for (int n = 0; n <= 4; ++n)
                    CHECK(fj.at(k, n) == Catch::Approx(want.at(k, n)).margin(1e-12));
        }
    }
}

TEST_CASE("nonlinearity_jet is linear in the coefficient map") {
    AnalyticNonlinearity f1, f2, fsum;
    f1.coeffs[{1, 0, 0}] = 0.5;
    f2.coeffs[{2, 1, 1}] = -0.25;
    fsum.coeffs = f1.coeffs;
    fsum.coeffs.insert(f2.coeffs.begin(), f2.coeffs.end());
    for (auto* f : {&f1, &f2, &fsum}) {
        f->M = 700.0;
        f->validate();
    }
    std::mt19937_64 rng(5);
    BivariateJet<double> y(7, 3);
    y.fill_all_present();
    for (int k = 0; k <= 7; ++k)
        for (int n = 0; n <= 3; ++n) y.set(k, n, oracles::random_dyadic(rng, 0.3));
    auto a = nonlinearity_jet(f1, y, spec(6, 3));
    auto b = nonlinearity_jet(f2, y, spec(6, 3));
    auto s = nonlinearity_jet(fsum, y, spec(6, 3));
    for (int k = 0; k <= 6; ++k)
        for (int n = 0; n <= 3; ++n)
            CHECK(s.at(k, n) == Catch::Approx(a.at(k, n) + b.at(k, n)).margin(1e-14));
}

TEST_CASE("nonlinearity_jet rejects out-of-domain state") {
    auto f = preset_burgers();
    auto y = jet_constant(5.5, 4, 1);  // beyond b0 = 5
    CHECK_THROWS_AS(nonlinearity_jet(f, y, spec(3, 1)), DomainError);
}

TEST_CASE("series_eval_x basics") {
    SpatialJet<double> zero;
    zero.a.assign(8, 0.0);
    auto r0 = series_eval_x(zero, 1.0, 5.0);
    CHECK(r0.value == 0.0);
    CHECK(r0.remainder_bound == 0.0);

    SpatialJet<double> expjet;
    expjet.a.assign(21, 1.0);  // jet of e^x
    auto re = series_eval_x(expjet, 1.0, 3.0);
    CHECK(re.value == Catch::Approx(std::exp(1.0)).epsilon(1e-12));
    CHECK(std::abs(re.value - std::exp(1.0)) <= re.remainder_bound + 1e-15);

    SpatialJet<double> xj;
    xj.a = {0.0, 1.0, 0.0};
    auto rx = series_eval_x(xj, 0.5, 2.0);
    CHECK(rx.value == 0.5);
    CHECK(rx.remainder_bound >= 0.0);

    CHECK_THROWS_AS(series_eval_x(xj, 0.5, 0.4), DomainError);
}

TEST_CASE("series_eval_x remainder bound is sound on analytic jets") {
    // e^x with R1_hat = 1 (envelope |a_k| = 1 <= k!/1^k holds)
    SpatialJet<double> expjet;
    expjet.a.assign(12, 1.0);
    for (double x : {0.1, 0.4, 0.8, 0.95}) {
        auto r = series_eval_x(expjet, x, 1.0);
        CHECK(std::abs(r.value - std::exp(x)) <= r.remainder_bound * (1 + 1e-12) + 1e-15);
    }
    // 1/(1 - x/5): a_k = k!/5^k, envelope tight at R1_hat = 5
    SpatialJet<double> geo;
    geo.a.resize(14);
    for (int k = 0; k < 14; ++k) geo.a[(std::size_t)k] = factorial(k) / std::pow(5.0, k);
    for (double x : {0.3, 0.9, 1.0}) {
        auto r = series_eval_x(geo, x, 5.0);
        double truth = 1.0 / (1.0 - x / 5.0);
        CHECK(std::abs(r.value - truth) <= r.remainder_bound * (1 + 1e-12) + 1e-15);
    }
}

TEST_CASE("exact rational jets multiply exactly") {
    using R = Rational;
    std::mt19937_64 rng(31);
    Poly2<R> p, q;
    std::uniform_int_distribution<int> deg(0, 3);
    for (int m = 0; m < 5; ++m) {
        p.c[{deg(rng), deg(rng)}] = ScalarOps<R>::from_double(oracles::random_dyadic(rng, 1.0));
        q.c[{deg(rng), deg(rng)}] = ScalarOps<R>::from_double(oracles::random_dyadic(rng, 1.0));
    }
    auto ja = oracles::jet_of_poly(p, 7, 7);
    auto jb = oracles::jet_of_poly(q, 7, 7);
    auto jc = jet_mul(ja, jb, spec(7, 7));
    auto want = oracles::jet_of_poly(p * q, 7, 7);
    for (int k = 0; k <= 7; ++k)
        for (int n = 0; n <= 7; ++n) CHECK(jc.at(k, n) == want.at(k, n));
}

TEST_CASE("jet JSON export marks absent entries null") {
    BivariateJet<double> j(3, 2);
    j.set_avail(0, 3);
    j.set_avail(1, 2);
    j.set_avail(2, 1);
    j.set(0, 0, 1.5);
    j.set(2, 0, -2.0);
    auto out = jet_to_json(j);
    CHECK(out["Kmax"] == 3);
    CHECK(out["c"][0][0] == 1.5);
    CHECK(out["c"][2][0] == -2.0);
    CHECK(out["c"][0][2].is_number());
    CHECK(out["c"][1][2].is_null());
    CHECK(out["c"][3][0].is_null());
}

TEST_CASE("jet_mul of random full boxes equals the polynomial oracle on the box") {
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 8; ++trial) {
        Poly2<double> p, q;
        for (int i = 0; i <= 4; ++i)
            for (int j = 0; j <= 4; ++j) {
                p.c[{i, j}] = oracles::random_dyadic(rng, 1.0);
                q.c[{i, j}] = oracles::random_dyadic(rng, 1.0);
            }
        auto jc = jet_mul(oracles::jet_of_poly(p, 4, 4), oracles::jet_of_poly(q, 4, 4),
                          spec(4, 4));
        auto want = oracles::jet_of_poly(p * q, 4, 4);
        for (int k = 0; k <= 4; ++k)
            for (int n = 0; n <= 4; ++n)
                CHECK(jc.at(k, n) == Catch::Approx(want.at(k, n)).margin(1e-12));
    }
}

TEST_CASE("composition tail truncation and the degree cap") {
    // a family with geometric coefficients across many (p,0) groups
    AnalyticNonlinearity f;
    f.M = 40.0;
    for (int p = 1; p <= 12; ++p) f.coeffs[{p, 0, 0}] = 2.0 / std::pow(f.b0, p);
    f.validate();
    auto y = jet_constant(0.3, 6, 2);

    TruncationSpec full = [] {
        TruncationSpec t;
        t.kmax = 5;
        t.nmax = 2;
        return t;
    }();
    auto exact = nonlinearity_jet(f, y, full);

    TruncationSpec loose = full;
    loose.tail_tol = 1e-6;
    auto trunc = nonlinearity_jet(f, y, loose);
    // truncation stops once the geometric tail bound drops below tail_tol,
    // so the values agree to about that tolerance
    CHECK(std::abs(trunc.at(0, 0) - exact.at(0, 0)) < 1e-6);
    CHECK(trunc.at(0, 0) != exact.at(0, 0));  // some groups were dropped

    // a stored coefficient beyond the (p,q) cap with no tail rule to stop
    // consumption is a nonconvergent composition
    AnalyticNonlinearity deep;
    deep.M = 1.0;
    deep.coeffs[{70, 0, 0}] = 1.0 / std::pow(5.0, 70);
    deep.validate();
    CHECK_THROWS_AS(nonlinearity_jet(deep, y, full), ConvergenceError);
}
