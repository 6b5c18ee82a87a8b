#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatreach/common.hpp"
#include "heatreach/nonlinearity.hpp"

namespace heatreach {

struct GevreyParams {
    double lambda = 2.0;  // Gevrey order; 2 for the heat application
    double L = 1.0;       // inverse radius
    double a = 0.0;       // derivative offset

    void validate() const {
        if (!(lambda > 1.0)) throw InvalidInput("GevreyParams: lambda must exceed 1");
        if (!(L > 0.0)) throw InvalidInput("GevreyParams: L must be positive");
    }
};

struct BoundReport {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool satisfied = false;
    std::string comparison = "<=";  // how value relates to threshold when satisfied
    std::string detail;
};

inline nlohmann::ordered_json to_json(const BoundReport& r) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["value"] = r.value;
    j["threshold"] = r.threshold;
    j["satisfied"] = r.satisfied;
    j["comparison"] = r.comparison;
    j["detail"] = r.detail;
    return j;
}

/// log of Gamma_{lambda,a}(k): 2^-5 Gamma(k+1-a)^lambda (1+k)^-2 for
/// k > |a|+1, and the a = 0 form 2^-5 (k!)^lambda (1+k)^-2 on 0 <= k <= |a|+1.
inline double log_gamma_la(double lambda, double a, int k) {
    if (k < 0) throw InvalidInput("gamma_la: k must be >= 0");
    double lg = (static_cast<double>(k) > std::abs(a) + 1.0)
                    ? std::lgamma(static_cast<double>(k) + 1.0 - a)
                    : std::lgamma(static_cast<double>(k) + 1.0);
    return -5.0 * std::numbers::ln2_v<double> + lambda * lg -
           2.0 * std::log1p(static_cast<double>(k));
}

inline double gamma_la(double lambda, double a, int k) {
    return std::exp(log_gamma_la(lambda, a, k));
}

/// Grid lower bound of |u|_{L,a} = sup |u^(k)(t)| / (L^|k-a| Gamma_{lambda,a}(k)).
/// deriv_samples[k][j] holds |u^(k)(t_j)|.
inline double seminorm_la(const std::vector<std::vector<double>>& deriv_samples,
                          const GevreyParams& p) {
    p.validate();
    if (deriv_samples.empty() || deriv_samples.front().empty())
        throw InvalidInput("seminorm_la: empty sample set");
    double best = 0.0;
    double logL = std::log(p.L);
    for (int k = 0; k < static_cast<int>(deriv_samples.size()); ++k) {
        double denom_log =
            std::abs(static_cast<double>(k) - p.a) * logL + log_gamma_la(p.lambda, p.a, k);
        for (double s : deriv_samples[static_cast<std::size_t>(k)]) {
            if (s == 0.0) continue;
            best = std::max(best, std::exp(std::log(std::abs(s)) - denom_log));
        }
    }
    return best;
}

/// ||u||_{L,a} = max(2^6 ||u||_inf, 2^3 L^-1 |u'|_{L,a}); du_deriv_samples[k][j]
/// holds |u^(k+1)(t_j)|, i.e. derivatives of u'.
inline double norm_la(const std::vector<double>& u_samples,
                      const std::vector<std::vector<double>>& du_deriv_samples,
                      const GevreyParams& p) {
    p.validate();
    if (u_samples.empty()) throw InvalidInput("norm_la: empty sample set");
    double sup = 0.0;
    for (double v : u_samples) sup = std::max(sup, std::abs(v));
    double semi = du_deriv_samples.empty() ? 0.0 : seminorm_la(du_deriv_samples, p);
    return std::max(64.0 * sup, 8.0 / p.L * semi);
}

struct DerivativeCostBound {
    double value = 0.0;
    double finite_part = 0.0;    // max over k < N of the finite-k terms
    double dominant_part = 0.0;  // (1+delta) alpha^b L^d (lambda d / (e ln alpha))^(lambda d)
    int threshold_index = 0;     // N from the Stirling-ratio test
};

/// Effective value of the cost-of-derivative bracket. N is the smallest k
/// where (Gamma(k+1+q-a)/Gamma(k+1-b))^lambda <= (1+delta) k^(lambda d) holds
/// with the ratio decreasing from there on (checked over a lookahead window,
/// the Stirling ratio Gamma(x+d)/Gamma(x) ~ x^d makes it eventually monotone).
inline DerivativeCostBound derivative_cost_bound(double lambda, double delta, double a,
                                                 double b, int q, double L, double alpha) {
    if (!(alpha > 1.0)) throw InvalidInput("derivative_cost_bound: alpha must exceed 1");
    double d = static_cast<double>(q) - a + b;
    if (!(d > 0.0)) throw InvalidInput("derivative_cost_bound: d = q - a + b must be positive");
    if (!(delta > 0.0)) throw InvalidInput("derivative_cost_bound: delta must be positive");
    if (!(lambda > 0.0) || !(L > 0.0))
        throw InvalidInput("derivative_cost_bound: lambda and L must be positive");

    auto log_ratio = [&](int k) {
        return lambda * (std::lgamma(static_cast<double>(k) + 1.0 + q - a) -
                         std::lgamma(static_cast<double>(k) + 1.0 - b)) -
               lambda * d * std::log(static_cast<double>(k));
    };
    int k_lo = static_cast<int>(std::ceil(std::max({std::abs(a) + 1.0 - q, std::abs(b) + 1.0,
                                                    b, 1.0}))) +
               1;
    const double log_1pd = std::log1p(delta);
    const int lookahead = 50;
    int N = -1;
    for (int k = k_lo; k < 1000000; ++k) {
        if (log_ratio(k) > log_1pd) continue;
        bool stable = true;
        double prev = log_ratio(k);
        for (int m = 1; m <= lookahead; ++m) {
            double cur = log_ratio(k + m);
            if (cur > log_1pd || cur > prev + 1e-13) {
                stable = false;
                break;
            }
            prev = cur;
        }
        if (stable) {
            N = k;
            break;
        }
    }
    if (N < 0) throw ConvergenceError("derivative_cost_bound: Stirling threshold not found");

    DerivativeCostBound out;
    out.threshold_index = N;
    double logLc = std::log(std::max(1.0, L));
    for (int k = 0; k < N; ++k) {
        double ek = std::abs(static_cast<double>(k) + q - a) - std::abs(static_cast<double>(k) - b);
        double term = ek * logLc + log_gamma_la(lambda, a, k + q) - log_gamma_la(lambda, b, k);
        out.finite_part = std::max(out.finite_part, std::exp(term));
    }
    double ld = lambda * d;
    out.dominant_part = (1.0 + delta) * std::pow(alpha, b) * std::pow(L, d) *
                        std::pow(ld / (std::numbers::e_v<double> * std::log(alpha)), ld);
    out.value = out.finite_part + out.dominant_part;
    return out;
}

namespace detail {

/// Riemann zeta by Euler-Maclaurin: partial sum to N plus integral tail and
/// the first Bernoulli corrections; the first omitted term bounds the error
/// (< 1e-12 for s in (2, 12] at N = 60).
inline double zeta_em(double s, int N = 60) {
    double sum = 0.0;
    for (int m = 1; m < N; ++m) sum += std::pow(static_cast<double>(m), -s);
    double Nd = static_cast<double>(N);
    sum += std::pow(Nd, 1.0 - s) / (s - 1.0);
    sum += 0.5 * std::pow(Nd, -s);
    sum += s / 12.0 * std::pow(Nd, -s - 1.0);
    sum -= s * (s + 1.0) * (s + 2.0) / 720.0 * std::pow(Nd, -s - 3.0);
    return sum;
}

}  // namespace detail

/// K_{q,mu} = 2^(mu-q) (1+q)^(2q) sum_{i,j>=0} (2i+j+1)^(q-mu). Grouping by
/// m = 2i+j+1 (multiplicity ceil(m/2)) reduces the double sum to
/// zeta(s-1)/2 + (1-2^-s) zeta(s)/2 with s = mu-q; total error < 1e-9.
inline double kq_mu(int q, double mu) {
    if (q < 0) throw InvalidInput("kq_mu: q must be >= 0");
    double s = mu - static_cast<double>(q);
    if (!(s > 2.0)) throw InvalidInput("divergent constant: kq_mu requires mu - q > 2");
    double inner =
        0.5 * detail::zeta_em(s - 1.0) + 0.5 * (1.0 - std::pow(2.0, -s)) * detail::zeta_em(s);
    return std::pow(2.0, mu - q) * std::pow(1.0 + q, 2 * q) * inner;
}

struct ContractionSequence {
    std::vector<double> a;
    double a_inf_lower = 0.0;
};

/// a_{k+1} = a_k (1 - gamma/(1+k)^2) with the closed lower bound e^(-2 gamma zeta(2)).
inline ContractionSequence contraction_sequence(double gamma, int kmax) {
    if (!(gamma > 0.0 && gamma < 0.5))
        throw InvalidInput("contraction_sequence: gamma must lie in (0, 1/2)");
    if (kmax < 0) throw InvalidInput("contraction_sequence: kmax must be >= 0");
    ContractionSequence out;
    const double zeta2 = std::numbers::pi_v<double> * std::numbers::pi_v<double> / 6.0;
    out.a_inf_lower = std::exp(-2.0 * gamma * zeta2);
    out.a.resize(static_cast<std::size_t>(kmax) + 1);
    out.a[0] = 1.0;
    for (int k = 0; k < kmax; ++k) {
        double next = out.a[static_cast<std::size_t>(k)] *
                      (1.0 - gamma / ((1.0 + k) * (1.0 + k)));
        if (next < out.a_inf_lower)
            throw ConvergenceError("contraction_sequence: term fell below the closed lower bound");
        out.a[static_cast<std::size_t>(k) + 1] = next;
    }
    return out;
}

enum class LambdaScheduleKind { eps_leading, radius_ratio };

struct LambdaScheduleParams {
    double eps = 0.0;       // eps_leading: leading factor 1 - eps
    double R1 = 0.0, R2 = 0.0;  // radius_ratio: leading factor (R1/R2)^2
    double K = 1.0;
    double Cbar = 1.0;
    double mu = 3.5;
    double b0 = 5.0, b1 = 5.0;
    double R = 4.9, Rp = 4.85;
    double delta = 0.5;
    int nmax = 100000;
    int record_up_to = 128;  // how many lambda_n values to return
};

inline double lambda_schedule_value(LambdaScheduleKind kind, const LambdaScheduleParams& p,
                                    int n) {
    const double pow3mu = std::pow(3.0, p.mu);
    double lead, c1, c2;
    if (kind == LambdaScheduleKind::eps_leading) {
        lead = 1.0 - p.eps;
        c1 = (p.K / p.b0) * p.Cbar * p.Rp * p.Rp * pow3mu / (1.0 - p.delta);
        c2 = (p.K / (p.b1 * p.R)) * p.Cbar * p.Rp * p.Rp * pow3mu /
             ((1.0 - p.delta) * (1.0 - p.delta));
    } else {
        lead = (p.R1 / p.R2) * (p.R1 / p.R2);
        c1 = (p.K / p.b0) * p.Cbar * p.R1 * p.R1 * pow3mu / (1.0 - p.delta);
        c2 = (p.K / p.b1) * p.Cbar * p.R1 * pow3mu / ((1.0 - p.delta) * (1.0 - p.delta));
    }
    double two_n = 2.0 * n;
    return lead + c1 / ((two_n + 1.0) * (two_n + 2.0)) + c2 / (two_n + 2.0);
}

struct LambdaSchedule {
    std::vector<double> lambdas;
    int n0 = 0;
};

inline LambdaSchedule lambda_schedule(LambdaScheduleKind kind, const LambdaScheduleParams& p) {
    if (!(p.delta > 0.0 && p.delta < 1.0))
        throw InvalidInput("lambda_schedule: delta must lie in (0,1)");
    if (!(p.K > 0 && p.Cbar > 0 && p.b0 > 0 && p.b1 > 0))
        throw InvalidInput("lambda_schedule: K, Cbar, b0, b1 must be positive");
    if (kind == LambdaScheduleKind::eps_leading) {
        if (!(p.eps > 0.0 && p.eps < 1.0))
            throw InvalidInput("lambda_schedule: eps must lie in (0,1)");
        if (!(p.R > 0 && p.Rp > 0)) throw InvalidInput("lambda_schedule: R, Rp must be positive");
    } else {
        if (!(p.R1 > 0 && p.R2 > 0 && p.R1 < p.R2))
            throw InvalidInput("lambda_schedule: radius_ratio kind requires 0 < R1 < R2");
    }
    LambdaSchedule out;
    out.n0 = -1;
    int keep = std::min(p.nmax, std::max(0, p.record_up_to));
    out.lambdas.reserve(static_cast<std::size_t>(keep) + 1);
    double prev = std::numeric_limits<double>::infinity();
    for (int n = 0; n <= p.nmax; ++n) {
        double lam = lambda_schedule_value(kind, p, n);
        if (n <= keep) out.lambdas.push_back(lam);
        if (lam > prev + 1e-15)
            throw ConvergenceError("lambda_schedule: correction terms failed to decrease");
        prev = lam;
        if (out.n0 < 0 && lam <= 1.0) out.n0 = n;  // corrections strictly decrease past here
        if (out.n0 >= 0 && n >= keep) break;
    }
    if (out.n0 < 0)
        throw ConvergenceError("no contraction index found (leading factor >= 1?)");
    return out;
}

struct AdmissibilityInput {
    double b0 = 5.0, b1 = 5.0, b2 = 5.0;
    double R = 4.9;
    double Rp = 4.85;
    double L = 0.0;  // 0 = midpoint of the admissible window
    double data_C_fit = 0.0;  // fitted constant of the input class, reported only
};

inline double admissible_L_window_low(double rp) {
    return 4.0 * std::exp(1.0 / std::numbers::e_v<double>) / (rp * rp);
}

/// Midpoint defaults for the (L, R'') windows used by the pipeline.
inline double default_L(double rp) { return 0.5 * (admissible_L_window_low(rp) + 0.25); }
inline double default_Rpp(double rp, double L) {
    double lo = std::sqrt(4.0 * std::exp(1.0 / std::numbers::e_v<double>) / L);
    return 0.5 * (lo + rp);
}

/// One report per synthesis hypothesis; failures are reported, never thrown.
inline std::vector<BoundReport> check_admissibility(const AdmissibilityInput& in) {
    std::vector<BoundReport> out;
    const double rhat = r_hat();
    auto push_gt = [&out](const std::string& name, double value, double threshold,
                          const std::string& detail) {
        out.push_back({name, value, threshold, value > threshold, ">", detail});
    };
    push_gt("b0_gt_4", in.b0, 4.0, "coefficient envelope base b0 > 4");
    push_gt("b1_gt_4", in.b1, 4.0, "coefficient envelope base b1 > 4");
    push_gt("b2_gt_4", in.b2, 4.0, "coefficient envelope base b2 > 4");
    push_gt("b2_gt_Rhat", in.b2, rhat, "b2 > 4 e^(1/(2e))");
    push_gt("R_gt_Rhat", in.R, rhat, "class radius R > 4 e^(1/(2e))");
    {
        bool ok = rhat < in.Rp && in.Rp < in.R && in.R < in.b2;
        out.push_back({"radius_ordering", in.Rp, in.R, ok, "within",
                       "requires Rhat < R' < R < b2 (data radius must exceed R; see class fit)"});
    }
    double Llo = admissible_L_window_low(in.Rp);
    out.push_back({"L_window_nonempty", Llo, 0.25, Llo < 0.25, "<",
                   "window (4 e^(1/e)/R'^2, 1/4) nonempty iff R' > Rhat"});
    double L = in.L > 0.0 ? in.L : default_L(in.Rp);
    out.push_back({"L_in_window", L, 0.25, (Llo < L && L < 0.25), "within",
                   "chosen L inside (4 e^(1/e)/R'^2, 1/4)"});
    out.push_back({"L1_lt_quarter", L, 0.25, L < 0.25, "<", "trace space requires L1 < 1/4"});
    {
        // (2n)! / (4^n (n!)^2) = prod (2j-1)/(2j) <= 1; running product, exact check
        double ratio = 1.0, worst = 0.0;
        bool ok = true;
        for (int n = 1; n <= 80; ++n) {
            ratio *= (2.0 * n - 1.0) / (2.0 * n);
            worst = std::max(worst, ratio);
            if (ratio > 1.0) ok = false;
        }
        out.push_back({"stirling_central_binomial", worst, 1.0, ok, "<=",
                       "(2n)! <= 4^n (n!)^2 for n <= 80 (C_s = 1)"});
    }
    if (in.data_C_fit > 0.0)
        out.push_back({"class_fit_C", in.data_C_fit, in.data_C_fit, true, "<=",
                       "fitted C of the input data in R_{R,C}; informational"});
    return out;
}

}  // namespace heatreach
