#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "models.hpp"
#include "parallel.hpp"
#include "statistics.hpp"

namespace tolerant {

enum class Calibration { cantelli_envelope, chebyshev_envelope, mc_worst_case, estimation_based };

inline std::string to_string(Calibration c) {
    switch (c) {
        case Calibration::cantelli_envelope: return "cantelli_envelope";
        case Calibration::chebyshev_envelope: return "chebyshev_envelope";
        case Calibration::mc_worst_case: return "mc_worst_case";
        case Calibration::estimation_based: return "estimation_based";
    }
    return "?";
}

inline Calibration calibration_from_string(const std::string& s) {
    if (s == "cantelli_envelope") return Calibration::cantelli_envelope;
    if (s == "chebyshev_envelope") return Calibration::chebyshev_envelope;
    if (s == "mc_worst_case") return Calibration::mc_worst_case;
    if (s == "estimation_based") return Calibration::estimation_based;
    throw ValidationError("unknown calibration: " + s);
}

struct TestSpec {
    HypothesisPair hypothesis;
    StatisticKind statistic_kind = StatisticKind::plugin_lp;
    double alpha = 0.05;
    double beta = 0.1;
    Calibration calibration = Calibration::cantelli_envelope;
    int mc_reps = 2000;
    std::vector<Vec> null_candidates;  // empty: use extremal_null_candidates

    void validate() const {
        hypothesis.validate();
        require(alpha > 0 && alpha < 1, "TestSpec: alpha must lie in (0,1)");
        require(beta > 0 && beta < 1 - alpha, "TestSpec: beta must lie in (0, 1-alpha)");
        if (calibration == Calibration::mc_worst_case) require(mc_reps >= 100, "TestSpec: mc_reps must be >= 100");
        require(statistic_kind != StatisticKind::tv_plugin, "TestSpec: tv_plugin belongs to the multinomial tests");
    }
};

struct TestDecision {
    bool reject = false;
    double statistic_value = 0;
    double threshold = 0;
    double p_value_upper = 1;
};

inline TestDecision make_decision(double value, double threshold, double p_value = 1.0) {
    return {value > threshold, value, threshold, std::clamp(p_value, 0.0, 1.0)};
}

// Upper bound on the (1-alpha)-quantile from mean and variance.
inline double cantelli_quantile_bound(double mean, double variance, double alpha) {
    require(alpha > 0 && alpha < 1, "cantelli_quantile_bound: alpha must lie in (0,1)");
    require(variance >= 0, "cantelli_quantile_bound: variance must be >= 0");
    return mean + std::sqrt((1 - alpha) / alpha) * std::sqrt(variance);
}

inline double chebyshev_threshold(const HypothesisPair& h, double p, double sigma, int d, double alpha) {
    require(alpha > 0 && alpha < 1, "chebyshev_threshold: alpha must lie in (0,1)");
    auto e = envelope(p, sigma, d, h.eps0);
    return e.mean_upper + std::sqrt(e.var_upper / alpha);
}

inline double cantelli_threshold(double p, double sigma, int d, double eps0, double alpha) {
    auto e = envelope(p, sigma, d, eps0);
    return cantelli_quantile_bound(e.mean_upper, e.var_upper, alpha);
}

inline double phi_for_l1_plugin(double sigma, int d) {
    require(sigma > 0 && d >= 1, "phi_for_l1_plugin: sigma > 0 and d >= 1 required");
    return (2 / std::numbers::pi + 1) * sigma * sigma * static_cast<double>(d) * d;
}

inline TestDecision estimation_based_test(double value, double eps0, double phi, double alpha) {
    require(phi >= 0, "estimation_based_test: phi must be >= 0");
    require(alpha > 0 && alpha < 1, "estimation_based_test: alpha must lie in (0,1)");
    double t = eps0 + std::sqrt(phi / alpha);
    double pv = value > eps0 ? (phi == 0 ? 0.0 : phi / ((value - eps0) * (value - eps0))) : 1.0;
    return make_decision(value, t, pv);
}

// Evaluates one of the Gaussian-sequence statistics on a raw vector.
struct GaussianStatistic {
    StatisticKind kind = StatisticKind::plugin_lp;
    double p = 1;
    double sigma = 1;
    double centering = 0;  // sigma^p mu_p per coordinate
    Vec coef;

    GaussianStatistic() = default;
    GaussianStatistic(StatisticKind k, double p_, double sigma_) : kind(k), p(p_), sigma(sigma_) {
        check_stat_args(p_, sigma_);
        if (kind == StatisticKind::chi2) p = 2;
        centering = std::pow(sigma, p) * gaussian_abs_moment(p);
        if (kind == StatisticKind::debiased_lp) coef = debias_coefficients(p, sigma);
    }

    double operator()(const double* x, std::size_t d) const {
        double t = sum_abs_pow(x, d, p) - static_cast<double>(d) * centering;
        if (!coef.empty()) t -= debias_correction_raw(x, d, coef, sigma);
        return t;
    }
    double operator()(const Vec& x) const { return (*this)(x.data(), x.size()); }
};

inline StatisticKind default_kind_for(double p) {
    if (p == 2) return StatisticKind::chi2;
    return p > 2 ? StatisticKind::debiased_lp : StatisticKind::plugin_lp;
}

// Spread, single spike and sqrt(d)-sparse vectors with ||v||_p = eps.
inline std::vector<Vec> extremal_null_candidates(double p, double eps, int d) {
    require(d >= 1 && eps >= 0 && p >= 1, "extremal_null_candidates: invalid arguments");
    std::vector<Vec> out;
    if (eps == 0) {
        out.emplace_back(static_cast<size_t>(d), 0.0);
        return out;
    }
    out.emplace_back(static_cast<size_t>(d), eps * std::pow(static_cast<double>(d), -1 / p));
    Vec spike(static_cast<size_t>(d), 0.0);
    spike[0] = eps;
    if (d > 1) out.push_back(spike);
    int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d))));
    if (k > 1 && k < d) {
        Vec sparse(static_cast<size_t>(d), 0.0);
        for (int i = 0; i < k; ++i) sparse[static_cast<size_t>(i)] = eps * std::pow(static_cast<double>(k), -1 / p);
        out.push_back(sparse);
    }
    return out;
}

// Alternatives used for power: spread and single spike at ||v||_p = eps.
inline std::vector<Vec> extremal_alternatives(double p, double eps, int d) {
    std::vector<Vec> out;
    out.emplace_back(static_cast<size_t>(d), eps * std::pow(static_cast<double>(d), -1 / p));
    if (d > 1) {
        Vec spike(static_cast<size_t>(d), 0.0);
        spike[0] = eps;
        out.push_back(spike);
    }
    return out;
}

// reps draws of stat(v + sigma Z); replicate r uses stream rng.child(r).
inline Vec simulate_statistic(const GaussianStatistic& stat, const Vec& v, double sigma, int reps,
                              const RandomStream& rng) {
    Vec out(static_cast<size_t>(reps));
    const std::size_t d = v.size();
    parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
        auto eng = rng.child(r).engine();
        std::normal_distribution<double> N(0.0, 1.0);
        Vec x(d);
        for (std::size_t i = 0; i < d; ++i) x[i] = v[i] + sigma * N(eng);
        out[r] = stat(x);
    });
    return out;
}

// Order statistic k = ceil((1-alpha)(R+1)) (capped at R): P(T_new > q) <= alpha for exchangeable draws.
inline double upper_quantile(Vec values, double alpha) {
    require(!values.empty(), "upper_quantile: empty sample");
    const std::size_t R = values.size();
    std::size_t k = static_cast<std::size_t>(std::ceil((1 - alpha) * (static_cast<double>(R) + 1)));
    k = std::clamp<std::size_t>(k, 1, R);
    std::nth_element(values.begin(), values.begin() + static_cast<long>(k - 1), values.end());
    return values[k - 1];
}

// Lower counterpart: order statistic floor(alpha (R+1)) (at least 1); P(T_new < q) <= alpha.
inline double lower_quantile(Vec values, double alpha) {
    require(!values.empty(), "lower_quantile: empty sample");
    const std::size_t R = values.size();
    std::size_t k = static_cast<std::size_t>(std::floor(alpha * (static_cast<double>(R) + 1)));
    if (k < 1) return -std::numeric_limits<double>::infinity();
    k = std::min(k, R);
    std::nth_element(values.begin(), values.begin() + static_cast<long>(k - 1), values.end());
    return values[k - 1];
}

inline std::vector<Vec> resolve_null_candidates(const TestSpec& spec, int d) {
    std::vector<Vec> c = spec.null_candidates.empty()
                             ? extremal_null_candidates(spec.hypothesis.p, spec.hypothesis.eps0, d)
                             : spec.null_candidates;
    require(!c.empty(), "mc_worst_case_threshold: empty candidate list");
    for (const auto& v : c) {
        require(static_cast<int>(v.size()) == d, "null candidate has wrong dimension");
        require(norm_lp(v, spec.hypothesis.p) <= spec.hypothesis.eps0 * (1 + 1e-12) + 1e-300,
                "null candidate lies outside the null ball");
    }
    return c;
}

// Max over null candidates of the empirical (1-alpha)-quantile.
inline double mc_worst_case_threshold(const TestSpec& spec, int d, double sigma, const RandomStream& rng) {
    spec.validate();
    require(sigma > 0, "mc_worst_case_threshold: sigma must be > 0");
    GaussianStatistic stat(spec.statistic_kind, spec.hypothesis.p, sigma);
    auto cands = resolve_null_candidates(spec, d);
    double t = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cands.size(); ++c) {
        auto vals = simulate_statistic(stat, cands[c], sigma, spec.mc_reps, rng.child(0x1000 + c));
        t = std::max(t, upper_quantile(std::move(vals), spec.alpha));
    }
    return t;
}

inline TestSpec flip_to_equivalence(const TestSpec& spec) {
    TestSpec f = spec;
    f.hypothesis.direction =
        spec.hypothesis.direction == Direction::tolerant ? Direction::equivalence : Direction::tolerant;
    std::swap(f.alpha, f.beta);
    return f;
}

// Statistic the spec calls for, evaluated at the data.
inline double spec_statistic(const TestSpec& spec, const Vec& x, double sigma) {
    GaussianStatistic stat(spec.statistic_kind, spec.hypothesis.p, sigma);
    return stat(x);
}

// Tolerant-side threshold for H0: ||v||_p <= eps0.
inline double tolerant_threshold(const TestSpec& spec, int d, double sigma, const RandomStream& rng) {
    const auto& h = spec.hypothesis;
    switch (spec.calibration) {
        case Calibration::cantelli_envelope: return cantelli_threshold(h.p, sigma, d, h.eps0, spec.alpha);
        case Calibration::chebyshev_envelope: return chebyshev_threshold(h, h.p, sigma, d, spec.alpha);
        case Calibration::mc_worst_case: return mc_worst_case_threshold(spec, d, sigma, rng);
        case Calibration::estimation_based:
            require(h.p == 1, "estimation_based calibration is available for p = 1 only");
            return h.eps0 + std::sqrt(phi_for_l1_plugin(sigma, d) / spec.alpha);
    }
    return 0;
}

// Equivalence-side threshold for H0: ||v||_p >= eps1; reject when T <= threshold.
inline double equivalence_threshold(const TestSpec& spec, int d, double sigma, const RandomStream& rng) {
    const auto& h = spec.hypothesis;
    if (spec.calibration == Calibration::mc_worst_case) {
        GaussianStatistic stat(spec.statistic_kind, h.p, sigma);
        double t = std::numeric_limits<double>::infinity();
        auto cands = extremal_null_candidates(h.p, h.eps1, d);
        for (std::size_t c = 0; c < cands.size(); ++c) {
            auto vals = simulate_statistic(stat, cands[c], sigma, spec.mc_reps, rng.child(0x2000 + c));
            t = std::min(t, lower_quantile(std::move(vals), spec.alpha));
        }
        return t;
    }
    if (spec.calibration == Calibration::estimation_based) {
        require(h.p == 1, "estimation_based calibration is available for p = 1 only");
        return h.eps1 - std::sqrt(phi_for_l1_plugin(sigma, d) / spec.alpha);
    }
    const double c = spec.calibration == Calibration::cantelli_envelope ? std::sqrt((1 - spec.alpha) / spec.alpha)
                                                                         : std::sqrt(1 / spec.alpha);
    // Infimum over ||v|| >= eps1 of mean_lower - c sd_upper, scanned on a geometric grid.
    double best = std::numeric_limits<double>::infinity();
    const double base = h.eps1 > 0 ? h.eps1 : 1e-300;
    for (int i = 0; i <= 64; ++i) {
        double n = h.eps1 > 0 ? base * std::pow(2.0, i / 8.0) : (i == 0 ? 0.0 : std::pow(2.0, i / 8.0 - 4));
        auto e = envelope(h.p, sigma, d, n);
        best = std::min(best, e.mean_lower - c * std::sqrt(e.var_upper));
    }
    return best;
}

// Runs the test on Gaussian-sequence data x.
inline TestDecision run_test(const TestSpec& spec, const Vec& x, double sigma, const RandomStream& rng) {
    spec.validate();
    require(sigma > 0, "run_test: sigma must be > 0");
    require(all_finite(x) && !x.empty(), "run_test: data must be a non-empty finite vector");
    const int d = static_cast<int>(x.size());
    const auto& h = spec.hypothesis;
    const double value = spec_statistic(spec, x, sigma);
    if (h.direction == Direction::tolerant) {
        const double t = tolerant_threshold(spec, d, sigma, rng);
        double pv = 1;
        if (spec.calibration == Calibration::estimation_based) {
            pv = estimation_based_test(value, h.eps0, phi_for_l1_plugin(sigma, d), spec.alpha).p_value_upper;
        } else {
            auto e = envelope(h.p, sigma, d, h.eps0);
            if (value > e.mean_upper) pv = e.var_upper / ((value - e.mean_upper) * (value - e.mean_upper));
        }
        return make_decision(value, t, pv);
    }
    // Equivalence direction: reject H0 (||v|| >= eps1) when the statistic is small.
    const double t_eq = equivalence_threshold(spec, d, sigma, rng);
    TestSpec tol = spec;
    tol.hypothesis.direction = Direction::tolerant;
    const double t_tol = tolerant_threshold(tol, d, sigma, rng);
    TestDecision dec;
    dec.statistic_value = value;
    dec.threshold = t_eq;
    // Crossed thresholds: the separation condition fails and the test rejects nothing.
    dec.reject = t_eq >= t_tol && value <= t_eq;
    dec.p_value_upper = 1;
    if (spec.calibration != Calibration::mc_worst_case && spec.calibration != Calibration::estimation_based) {
        double best = 1;
        auto e = envelope(h.p, sigma, d, h.eps1);
        if (value < e.mean_lower) best = e.var_upper / ((e.mean_lower - value) * (e.mean_lower - value));
        dec.p_value_upper = std::min(1.0, best);
    }
    return dec;
}

}  // namespace tolerant
