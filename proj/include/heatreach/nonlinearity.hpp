#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "heatreach/common.hpp"

namespace heatreach {

/// Threshold constant for the synthesis hypotheses: 4*e^(1/(2e)).
inline double r_hat() { return 4.0 * std::exp(1.0 / (2.0 * std::numbers::e_v<double>)); }

/// Sparse analytic nonlinearity f(x, y0, y1) = sum a_{p,q,r} y0^p y1^q x^r
/// with the geometric coefficient envelope |a_{p,q,r}| <= M / (b0^p b1^q b2^r).
struct AnalyticNonlinearity {
    struct Key {
        int p = 0, q = 0, r = 0;
        bool operator<(const Key& o) const {
            return std::tie(p, q, r) < std::tie(o.p, o.q, o.r);
        }
        bool operator==(const Key& o) const {
            return p == o.p && q == o.q && r == o.r;
        }
    };

    std::map<Key, double> coeffs;
    double M = 1.0;
    double b0 = 5.0, b1 = 5.0, b2 = 5.0;

    void validate() const {
        if (!(M > 0)) throw InvalidInput("nonlinearity: M must be positive");
        if (!(b0 > 4.0 && b1 > 4.0 && b2 > 4.0))
            throw InvalidInput("nonlinearity: b0, b1, b2 must exceed 4");
        for (const auto& [k, a] : coeffs) {
            if (k.p < 0 || k.q < 0 || k.r < 0)
                throw InvalidInput("nonlinearity: negative exponent");
            if (k.p == 0 && k.q == 0 && a != 0.0)
                throw InvalidInput("nonlinearity: a_{0,0,r} must vanish (f(x,0,0)=0)");
            double cap = M / (std::pow(b0, k.p) * std::pow(b1, k.q) * std::pow(b2, k.r));
            if (std::abs(a) > cap * (1.0 + 1e-12))
                throw InvalidInput("nonlinearity: coefficient exceeds the M/(b0^p b1^q b2^r) envelope");
        }
    }

    bool empty() const {
        return std::all_of(coeffs.begin(), coeffs.end(),
                           [](const auto& kv) { return kv.second == 0.0; });
    }

    int max_y0_power() const {
        int m = 0;
        for (const auto& [k, a] : coeffs)
            if (a != 0.0) m = std::max(m, k.p);
        return m;
    }
    int max_y1_power() const {
        int m = 0;
        for (const auto& [k, a] : coeffs)
            if (a != 0.0) m = std::max(m, k.q);
        return m;
    }

    /// Coefficients of A_{p,q}(x) for one (p,q), grouped for composition.
    struct Group {
        int p = 0, q = 0;
        std::vector<std::pair<int, double>> xr;  // (r, a_{p,q,r})
    };

    /// Groups sorted by ascending total degree p+q (then p, q), which is the
    /// consumption order of the tail-bounded composition.
    std::vector<Group> groups() const {
        std::map<std::pair<int, int>, Group> acc;
        for (const auto& [k, a] : coeffs) {
            if (a == 0.0) continue;
            auto& g = acc[{k.p, k.q}];
            g.p = k.p;
            g.q = k.q;
            g.xr.emplace_back(k.r, a);
        }
        std::vector<Group> out;
        out.reserve(acc.size());
        for (auto& [pq, g] : acc) out.push_back(std::move(g));
        std::sort(out.begin(), out.end(), [](const Group& a, const Group& b) {
            return std::tuple(a.p + a.q, a.p, a.q) < std::tuple(b.p + b.q, b.p, b.q);
        });
        return out;
    }

    double eval(double x, double y0v, double y1v) const {
        double s = 0.0;
        for (const auto& [k, a] : coeffs)
            s += a * std::pow(y0v, k.p) * std::pow(y1v, k.q) * std::pow(x, k.r);
        return s;
    }

    /// Checks the reflection identity f(-x,-y0,y1) = -f(x,y0,y1) by evaluating
    /// both sides at random points; this functional identity, not a coefficient
    /// pattern, is the authoritative oddness test.
    bool is_reflection_odd(std::uint64_t seed = 12345, int npoints = 64,
                           double tol = 1e-12) const {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> ux(-1.0, 1.0);
        std::uniform_real_distribution<double> uy(-2.0, 2.0);
        for (int i = 0; i < npoints; ++i) {
            double x = ux(rng), y0v = uy(rng), y1v = uy(rng);
            double lhs = eval(-x, -y0v, y1v);
            double rhs = -eval(x, y0v, y1v);
            double scale = std::max({std::abs(lhs), std::abs(rhs), 1.0});
            if (std::abs(lhs - rhs) > tol * scale) return false;
        }
        return true;
    }
};

inline AnalyticNonlinearity preset_linear_heat() {
    AnalyticNonlinearity f;
    f.M = 1.0;
    f.validate();
    return f;
}

/// phi(x) * y0 with phi given by its monomial coefficients [phi_0, phi_1, ...].
inline AnalyticNonlinearity preset_potential(const std::vector<double>& phi = {0.0, 0.1}) {
    AnalyticNonlinearity f;
    double m = 1.0;
    for (int r = 0; r < static_cast<int>(phi.size()); ++r) {
        if (phi[static_cast<std::size_t>(r)] == 0.0) continue;
        f.coeffs[{1, 0, r}] = phi[static_cast<std::size_t>(r)];
        m = std::max(m, std::abs(phi[static_cast<std::size_t>(r)]) * f.b0 * std::pow(f.b2, r));
    }
    f.M = m * (1.0 + 1e-9);
    f.validate();
    return f;
}

inline AnalyticNonlinearity preset_allen_cahn() {
    AnalyticNonlinearity f;
    f.coeffs[{1, 0, 0}] = 1.0;
    f.coeffs[{3, 0, 0}] = -1.0;
    f.M = 125.0;
    f.validate();
    return f;
}

inline AnalyticNonlinearity preset_burgers() {
    AnalyticNonlinearity f;
    f.coeffs[{1, 1, 0}] = -1.0;
    f.M = 25.0;
    f.validate();
    return f;
}

inline AnalyticNonlinearity nonlinearity_preset(const std::string& name) {
    if (name == "linear_heat") return preset_linear_heat();
    if (name == "potential") return preset_potential();
    if (name == "allen_cahn") return preset_allen_cahn();
    if (name == "burgers") return preset_burgers();
    throw InvalidInput("unknown nonlinearity preset: " + name);
}

inline nlohmann::ordered_json to_json(const AnalyticNonlinearity& f) {
    nlohmann::ordered_json j;
    j["M"] = f.M;
    j["b0"] = f.b0;
    j["b1"] = f.b1;
    j["b2"] = f.b2;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [k, a] : f.coeffs) {
        if (a == 0.0) continue;
        arr.push_back({k.p, k.q, k.r, a});
    }
    j["coeffs"] = arr;
    return j;
}

inline AnalyticNonlinearity nonlinearity_from_json(const nlohmann::json& j) {
    if (j.is_string()) return nonlinearity_preset(j.get<std::string>());
    AnalyticNonlinearity f;
    for (const char* field : {"M", "b0", "b1", "b2"})
        if (!j.contains(field))
            throw InvalidInput(std::string("nonlinearity: missing field '") + field + "'");
    f.M = j.at("M").get<double>();
    f.b0 = j.at("b0").get<double>();
    f.b1 = j.at("b1").get<double>();
    f.b2 = j.at("b2").get<double>();
    if (j.contains("coeffs")) {
        for (const auto& row : j.at("coeffs")) {
            if (!row.is_array() || row.size() != 4)
                throw InvalidInput("nonlinearity: coeffs entries must be [p,q,r,value]");
            f.coeffs[{row[0].get<int>(), row[1].get<int>(), row[2].get<int>()}] =
                row[3].get<double>();
        }
    }
    f.validate();
    return f;
}

}  // namespace heatreach
