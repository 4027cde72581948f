#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include "models.hpp"
#include "special.hpp"

namespace tolerant {

enum class StatisticKind { plugin_lp, debiased_lp, chi2, tv_plugin };

inline std::string to_string(StatisticKind k) {
    switch (k) {
        case StatisticKind::plugin_lp: return "plugin_lp";
        case StatisticKind::debiased_lp: return "debiased_lp";
        case StatisticKind::chi2: return "chi2";
        case StatisticKind::tv_plugin: return "tv_plugin";
    }
    return "?";
}

inline StatisticKind statistic_kind_from_string(const std::string& s) {
    if (s == "plugin_lp") return StatisticKind::plugin_lp;
    if (s == "debiased_lp") return StatisticKind::debiased_lp;
    if (s == "chi2") return StatisticKind::chi2;
    if (s == "tv_plugin") return StatisticKind::tv_plugin;
    throw ValidationError("unknown statistic kind: " + s);
}

struct StatisticReport {
    double value = 0;
    double mean_lower = 0;
    double mean_upper = 0;
    double var_upper = 0;
    double bias_upper = 0;
    StatisticKind statistic_kind = StatisticKind::plugin_lp;
};

inline double abs_pow(double x, double p) {
    double a = std::abs(x);
    if (p == 1) return a;
    if (p == 2) return a * a;
    if (p == 3) return a * a * a;
    if (p == 4) {
        double s = a * a;
        return s * s;
    }
    return std::pow(a, p);
}

inline double sum_abs_pow(const double* x, std::size_t n, double p) {
    double s = 0, c = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double y = abs_pow(x[i], p) - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

inline double sum_abs_pow(const Vec& x, double p) { return sum_abs_pow(x.data(), x.size(), p); }

inline void check_stat_args(double p, double sigma) {
    require(std::isfinite(p) && p >= 1, "statistic: p must be a finite real >= 1");
    require(std::isfinite(sigma) && sigma > 0, "statistic: sigma must be > 0");
}

inline bool is_even_integer(double p) { return p == std::floor(p) && static_cast<long long>(p) % 2 == 0; }

// Sum |x_i|^p - d sigma^p mu_p.
inline double plugin_statistic(const Vec& x, double p, double sigma) {
    check_stat_args(p, sigma);
    require(all_finite(x), "plugin_statistic: x must be finite");
    return sum_abs_pow(x, p) - static_cast<double>(x.size()) * std::pow(sigma, p) * gaussian_abs_moment(p);
}

// Coefficients c_j = C(p,2j) mu_{p-2j} sigma^p of H_{2j}, j = 1..k-1 with k = floor(p/2).
inline Vec debias_coefficients(double p, double sigma) {
    Vec c;
    if (p <= 2) return c;
    int k = static_cast<int>(std::floor(p / 2));
    for (int j = 1; j <= k - 1; ++j)
        c.push_back(falling_binomial(p, 2 * j) * gaussian_abs_moment(p - 2 * j) * std::pow(sigma, p));
    return c;
}

// Sum over coordinates of the Hermite correction, evaluated by recurrence.
inline double debias_correction_raw(const double* x, std::size_t n, const Vec& coef, double sigma) {
    if (coef.empty()) return 0.0;
    const int top = 2 * static_cast<int>(coef.size());
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double z = x[i] / sigma, hm = 1.0, h = z, acc = 0;
        for (int j = 1; j < top; ++j) {
            double hn = z * h - j * hm;
            hm = h;
            h = hn;
            if ((j + 1) % 2 == 0) acc += coef[static_cast<size_t>((j + 1) / 2 - 1)] * h;
        }
        total += acc;
    }
    return total;
}

inline double debias_correction(const Vec& x, double p, double sigma) {
    check_stat_args(p, sigma);
    require(all_finite(x), "debias_correction: x must be finite");
    return debias_correction_raw(x.data(), x.size(), debias_coefficients(p, sigma), sigma);
}

inline double debiased_statistic(const Vec& x, double p, double sigma) {
    double t = plugin_statistic(x, p, sigma);
    if (p > 2) t -= debias_correction(x, p, sigma);
    return t;
}

inline double chi2_statistic(const Vec& x, double sigma) { return plugin_statistic(x, 2.0, sigma); }

// Per-coordinate summand of the debiased statistic at sigma = 1.
inline double debiased_summand_unit(double x, double p, const Vec& coef_unit) {
    double v = abs_pow(x, p) - gaussian_abs_moment(p);
    if (!coef_unit.empty()) v -= debias_correction_raw(&x, 1, coef_unit, 1.0);
    return v;
}

// Numerical envelope constants for p > 2 (sigma = 1):
//   c1: min_u h(u)/|u|^p, cb: max_u (h(u)-|u|^p)/|u|^{2k}, c3: max_u H(u)/(1+|u|^{2(p-1)}),
// where h, H are the mean and variance of the per-coordinate summand at X ~ N(u,1).
struct HighPConstants {
    double c1 = 1, cb = 0, c3 = 0;
};

inline double summand_mean_unit(double u, double p) {
    Vec coef = debias_coefficients(p, 1.0);
    if (is_even_integer(p)) return abs_pow(u, p);
    const double up = abs_pow(u, p);
    return up + normal_expectation([&](double z) { return debiased_summand_unit(u + z, p, coef) - up; }, {-u},
                                   1e-13 * (1 + up));
}

inline double summand_var_unit(double u, double p) {
    Vec coef = debias_coefficients(p, 1.0);
    double h = is_even_integer(p) ? abs_pow(u, p) : summand_mean_unit(u, p);
    return normal_expectation(
        [&](double z) {
            double g = debiased_summand_unit(u + z, p, coef) - h;
            return g * g;
        },
        {-u}, 1e-10 * (1 + abs_pow(u, 2 * (p - 1))));
}

inline HighPConstants compute_high_p_constants(double p) {
    HighPConstants c;
    const int k = static_cast<int>(std::floor(p / 2));
    const bool even = is_even_integer(p);
    c.c1 = even ? 1.0 : 1e300;
    c.cb = 0;
    c.c3 = 0;
    const int N = 161;
    for (int i = 0; i <= N; ++i) {
        double u = (i == 0) ? 0.0 : std::pow(10.0, -3.0 + 7.0 * (i - 1) / (N - 1));
        double Hv = summand_var_unit(u, p);
        c.c3 = std::max(c.c3, Hv / (1 + abs_pow(u, 2 * (p - 1))));
        if (!even && u > 0) {
            double h = summand_mean_unit(u, p);
            c.c1 = std::min(c.c1, h / abs_pow(u, p));
            c.cb = std::max(c.cb, (h - abs_pow(u, p)) / abs_pow(u, 2.0 * k));
        }
    }
    // Grid extrema are inflated/deflated by 2% to cover the gaps between grid points.
    c.c3 *= 1.02;
    if (!even) {
        c.c1 *= 0.98;
        c.cb *= 1.02;
    }
    return c;
}

inline const HighPConstants& high_p_constants(double p) {
    static std::mutex mu;
    static std::map<double, HighPConstants> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(p);
    if (it == cache.end()) it = cache.emplace(p, compute_high_p_constants(p)).first;
    return it->second;
}

// Mean/variance/bias envelope of the (debiased) statistic as a function of ||v||_p = norm_value.
inline StatisticReport envelope(double p, double sigma, int d, double norm_value) {
    check_stat_args(p, sigma);
    require(d >= 1, "envelope: d must be >= 1");
    require(std::isfinite(norm_value) && norm_value >= 0, "envelope: norm_value must be >= 0");
    StatisticReport r;
    r.statistic_kind = p > 2 ? StatisticKind::debiased_lp : (p == 2 ? StatisticKind::chi2 : StatisticKind::plugin_lp);
    const double n = norm_value, dd = d;
    const double np = std::pow(n, p);
    if (p < 2) {
        r.mean_upper = p <= 1 ? np : 2 * p * np;
        double quad = std::pow(sigma, p - 2) / std::pow(dd, 2 / p - 1) * n * n;
        r.mean_lower = std::min(quad, np) / 8;
        if (p <= 1)
            r.var_upper = dd * gaussian_abs_moment(2 * p) * std::pow(sigma, 2 * p);
        else
            r.var_upper = 2 * p *
                          (dd * gaussian_abs_moment(2 * p) * std::pow(sigma, 2 * p) +
                           gaussian_abs_moment(2) * std::pow(dd, 2 / p - 1) * std::pow(n, 2 * (p - 1)) * sigma * sigma);
        r.bias_upper = std::min(np, dd * std::pow(sigma, p) * gaussian_abs_moment(p));
    } else if (p == 2) {
        r.mean_lower = r.mean_upper = n * n;
        r.var_upper = 2 * dd * std::pow(sigma, 4) + 4 * n * n * sigma * sigma;
        r.bias_upper = 0;
    } else {
        const auto& c = high_p_constants(p);
        const int k = static_cast<int>(std::floor(p / 2));
        r.var_upper = c.c3 * (dd * std::pow(sigma, 2 * p) + sigma * sigma * std::pow(n, 2 * (p - 1)));
        if (is_even_integer(p)) {
            r.mean_lower = r.mean_upper = np;
            r.bias_upper = 0;
        } else {
            double bias = c.cb * std::pow(dd, 1 - 2.0 * k / p) * std::pow(sigma, p - 2 * k) * std::pow(n, 2 * k);
            r.mean_upper = np + bias;
            r.mean_lower = c.c1 * np;
            r.bias_upper = bias;
        }
    }
    return r;
}

// Total-variation distance between empirical frequencies and the reference G.
inline double tv_plugin_statistic(const Counts& counts, std::int64_t n, const Vec& G) {
    require(counts.size() == G.size(), "tv_plugin_statistic: counts and G must have equal length");
    require(n >= 1, "tv_plugin_statistic: n must be >= 1");
    std::int64_t total = 0;
    for (auto c : counts) {
        require(c >= 0, "tv_plugin_statistic: counts must be non-negative");
        total += c;
    }
    require(total == n, "tv_plugin_statistic: counts must sum to n");
    double s = 0;
    for (std::size_t i = 0; i < G.size(); ++i) s += std::abs(static_cast<double>(counts[i]) / n - G[i]);
    return std::min(1.0, s / 2);
}

// l_p distance between empirical frequencies and G.
inline double lp_freq_distance(const Counts& counts, std::int64_t n, const Vec& G, double p) {
    Vec diff(G.size());
    for (std::size_t i = 0; i < G.size(); ++i) diff[i] = static_cast<double>(counts[i]) / n - G[i];
    return norm_lp(diff, p);
}

}  // namespace tolerant
