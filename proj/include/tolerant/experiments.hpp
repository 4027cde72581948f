#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "calibration.hpp"
#include "models.hpp"
#include "parallel.hpp"
#include "statistics.hpp"

namespace tolerant {

struct PowerCurveRow {
    double eps0 = 0, eps1 = 0;
    int d = 0;
    int n_reps = 0;
    double sigma = 1, alpha = 0.05;
    double empirical_type1 = 0, empirical_power = 0;
    double mc_stderr = 0;     // stderr of empirical_power
    double type1_stderr = 0;  // stderr of empirical_type1
    std::uint64_t seed = 0;
    std::string label;
};

struct Generator {
    std::string label;
    Vec v;
};

using Decider = std::function<bool(const Vec&)>;

inline double rate_stderr(double r, int n) { return std::sqrt(std::max(0.0, r * (1 - r)) / n); }

// Fraction of replications of v + sigma Z rejected; replicate r uses rng.child(r) (common across generators).
inline double rejection_rate(const Decider& test, const Vec& v, double sigma, int n_reps, const RandomStream& rng) {
    std::vector<char> hit(static_cast<size_t>(n_reps), 0);
    parallel_for(hit.size(), [&](std::size_t r) {
        auto eng = rng.child(r).engine();
        Vec x(v);
        std::normal_distribution<double> N(0.0, 1.0);
        for (auto& xi : x) xi += sigma * N(eng);
        hit[r] = test(x) ? 1 : 0;
    });
    std::int64_t k = 0;
    for (char h : hit) k += h;
    return static_cast<double>(k) / n_reps;
}

// One row per alternative; type-I is the worst rate over the null generators.
inline std::vector<PowerCurveRow> estimate_errors(const Decider& test, const std::vector<Generator>& nulls,
                                                  const std::vector<Generator>& alternatives, double sigma,
                                                  int n_reps, const RandomStream& rng, double eps0 = 0,
                                                  double eps1 = 0, double alpha = 0.05) {
    require(n_reps >= 100, "estimate_errors: n_reps must be >= 100");
    require(!alternatives.empty(), "estimate_errors: at least one alternative is required");
    double t1 = 0;
    for (const auto& g : nulls) t1 = std::max(t1, rejection_rate(test, g.v, sigma, n_reps, rng));
    std::vector<PowerCurveRow> rows;
    for (const auto& g : alternatives) {
        PowerCurveRow row;
        row.eps0 = eps0;
        row.eps1 = eps1;
        row.d = static_cast<int>(g.v.size());
        row.n_reps = n_reps;
        row.sigma = sigma;
        row.alpha = alpha;
        row.empirical_type1 = t1;
        row.type1_stderr = rate_stderr(t1, n_reps);
        row.empirical_power = rejection_rate(test, g.v, sigma, n_reps, rng);
        row.mc_stderr = rate_stderr(row.empirical_power, n_reps);
        row.seed = rng.master_seed;
        row.label = g.label;
        rows.push_back(row);
    }
    return rows;
}

inline std::vector<Generator> as_generators(const std::vector<Vec>& vs, const std::string& prefix) {
    std::vector<Generator> out;
    for (std::size_t i = 0; i < vs.size(); ++i) out.push_back({prefix + std::to_string(i), vs[i]});
    return out;
}

// Calibrated Gaussian-sequence decider; the threshold is computed once.
inline Decider make_decider(const TestSpec& spec, int d, double sigma, const RandomStream& rng) {
    spec.validate();
    const double t = tolerant_threshold(spec, d, sigma, rng);
    GaussianStatistic stat(spec.statistic_kind, spec.hypothesis.p, sigma);
    return [stat, t](const Vec& x) { return stat(x) > t; };
}

struct BisectionStep {
    double eps1 = 0;
    double power = 0;
};

struct CriticalSeparation {
    double value = 0;  // eps1 - eps0 at the bracket midpoint
    double eps1_lo = 0, eps1_hi = 0;
    double threshold = 0;
    std::vector<BisectionStep> trace;
    bool monotone = true;
};

// Smallest eps1 - eps0 at which the worst of the spread/spike alternatives has power >= 1 - beta.
// Replications reuse one noise matrix so power is evaluated under common random numbers.
inline CriticalSeparation bisect_critical_separation(const TestSpec& family, double eps0, int d, double sigma,
                                                     double beta, int n_reps, const RandomStream& rng,
                                                     double eps1_hi = 0, int iterations = 12) {
    require(d >= 1 && sigma > 0, "bisect_critical_separation: d >= 1 and sigma > 0 required");
    require(n_reps >= 100, "bisect_critical_separation: n_reps must be >= 100");
    TestSpec spec = family;
    spec.hypothesis.eps0 = eps0;
    spec.hypothesis.eps1 = std::max(spec.hypothesis.eps1, eps0);
    spec.beta = beta;
    spec.validate();
    const double p = spec.hypothesis.p;
    if (eps1_hi <= 0)
        eps1_hi = eps0 + 10 * sigma * std::pow(static_cast<double>(d), std::max(1 / p, 0.5)) + 10 * sigma;
    require(eps1_hi > eps0, "bisect_critical_separation: bracket must exceed eps0");

    CriticalSeparation out;
    out.threshold = tolerant_threshold(spec, d, sigma, rng.child(1));
    GaussianStatistic stat(spec.statistic_kind, p, sigma);
    const std::size_t D = static_cast<std::size_t>(d);
    Vec noise(static_cast<size_t>(n_reps) * D);
    const RandomStream nrng = rng.child(2);
    parallel_for(static_cast<std::size_t>(n_reps), [&](std::size_t r) {
        auto eng = nrng.child(r).engine();
        fill_normal(eng, noise.data() + r * D, D);
    });
    auto power_at = [&](double eps1) {
        double worst = 1;
        for (const auto& v : extremal_alternatives(p, eps1, d)) {
            std::vector<char> hit(static_cast<size_t>(n_reps), 0);
            parallel_for(hit.size(), [&](std::size_t r) {
                Vec x(D);
                const double* z = noise.data() + r * D;
                for (std::size_t i = 0; i < D; ++i) x[i] = v[i] + sigma * z[i];
                hit[r] = stat(x) > out.threshold ? 1 : 0;
            });
            std::int64_t k = 0;
            for (char h : hit) k += h;
            worst = std::min(worst, static_cast<double>(k) / n_reps);
        }
        out.trace.push_back({eps1, worst});
        return worst;
    };
    const double target = 1 - beta;
    if (power_at(eps1_hi) < target)
        throw BracketExhausted("bisect_critical_separation: power stays below 1 - beta at the bracket top");
    double lo = eps0, hi = eps1_hi;
    for (int it = 0; it < iterations; ++it) {
        double mid = 0.5 * (lo + hi);
        (power_at(mid) >= target ? hi : lo) = mid;
    }
    out.eps1_lo = lo;
    out.eps1_hi = hi;
    out.value = 0.5 * (lo + hi) - eps0;
    // Power must be non-decreasing in eps1 up to 2 stderr.
    auto sorted = out.trace;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.eps1 < b.eps1; });
    double run_max = 0;
    for (const auto& s : sorted) {
        if (s.power < run_max - 2 * rate_stderr(run_max, n_reps) - 1e-12) out.monotone = false;
        run_max = std::max(run_max, s.power);
    }
    return out;
}

enum class Regime { free, interpolation, functional_estimation };

inline std::string to_string(Regime r) {
    switch (r) {
        case Regime::free: return "free";
        case Regime::interpolation: return "interpolation";
        case Regime::functional_estimation: return "functional_estimation";
    }
    return "?";
}

struct PredictedRate {
    double rate = 0;
    Regime regime = Regime::free;
};

// Upper-bound rates for eps1 - eps0 (constant 1), with lambda = eps0 / sigma.
inline PredictedRate predicted_rate(double p, int d, double sigma, double eps0) {
    require(p >= 1 && d >= 1 && sigma > 0 && eps0 >= 0, "predicted_rate: invalid arguments");
    const double dd = static_cast<double>(d), lam = eps0 / sigma;
    const bool even = is_even_integer(p);
    const int k = static_cast<int>(std::floor(p / 2));
    double b1 = std::pow(dd, 1 / (2 * p));
    if (!even && p > 2) b1 = std::pow(dd, 1 / p - 1.0 / (4 * k));
    const double b2 = std::pow(dd, 1 / p);
    PredictedRate r;
    r.regime = lam < b1 ? Regime::free : (lam < b2 ? Regime::interpolation : Regime::functional_estimation);
    if (even) {
        if (r.regime == Regime::free) r.rate = std::pow(dd, 1 / (2 * p));
        else if (r.regime == Regime::interpolation) r.rate = std::sqrt(dd) * std::pow(lam, 1 - p);
        else r.rate = std::pow(dd, 1 / p - 0.5);
    } else if (p < 2) {
        if (r.regime == Regime::free) r.rate = std::pow(dd, 1 / p - 0.25);
        else if (r.regime == Regime::interpolation) r.rate = std::pow(b2, 1 - p / 2) * std::pow(lam, p / 2);
        else r.rate = b2;
    } else {
        if (r.regime == Regime::free) r.rate = std::pow(dd, 1 / (2 * p));
        else if (r.regime == Regime::interpolation) r.rate = std::pow(b2, 1 - 2.0 * k / p) * std::pow(lam, 2.0 * k / p);
        else r.rate = b2;
    }
    r.rate *= sigma;
    return r;
}

struct RegimePoint {
    double eps0 = 0;
    double empirical_critical_sep = 0;
    double predicted_rate = 0;
    Regime regime_label = Regime::free;
    bool monotone = true;
};

inline std::vector<RegimePoint> regime_map(const TestSpec& family, int d, double sigma, double beta,
                                           const Vec& eps0_grid, int n_reps, const RandomStream& rng) {
    for (std::size_t i = 1; i < eps0_grid.size(); ++i)
        require(eps0_grid[i] > eps0_grid[i - 1], "regime_map: eps0_grid must be increasing");
    std::vector<RegimePoint> out;
    for (std::size_t i = 0; i < eps0_grid.size(); ++i) {
        RegimePoint pt;
        pt.eps0 = eps0_grid[i];
        auto cs = bisect_critical_separation(family, pt.eps0, d, sigma, beta, n_reps, rng.child(i));
        pt.empirical_critical_sep = cs.value;
        pt.monotone = cs.monotone;
        auto pr = predicted_rate(family.hypothesis.p, d, sigma, pt.eps0);
        pt.predicted_rate = pr.rate;
        pt.regime_label = pr.regime;
        out.push_back(pt);
    }
    return out;
}

struct LogLogFit {
    double slope = 0, intercept = 0, rss = 0;
    Vec residuals;
};

inline LogLogFit loglog_fit(const Vec& x, const Vec& y) {
    require(x.size() == y.size() && x.size() >= 2, "loglog_fit: need at least two points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        require(x[i] > 0 && y[i] > 0, "loglog_fit: values must be positive");
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    }
    LogLogFit f;
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / n;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = std::log(y[i]) - (f.intercept + f.slope * std::log(x[i]));
        f.residuals.push_back(r);
        f.rss += r * r;
    }
    return f;
}

struct SuboptimalityRow {
    double c = 0;  // eps0 = c sigma d^{1/4}; c = 0 is the simple-null control
    double eps0 = 0, eps1 = 0;
    double chi2_threshold_envelope = 0, chi2_power_envelope = 0;
    double chi2_threshold_mc = 0, chi2_power_mc = 0;  // smallest valid threshold (MC quantile at the worst null)
    double plugin_threshold = 0, plugin_power = 0;
    double stderr_chi2 = 0, stderr_plugin = 0;
};

struct SuboptimalityReport {
    int d = 0;
    double sigma = 1, alpha = 0.05, beta = 0.1, C = 4;
    int n_reps = 0;
    std::vector<SuboptimalityRow> rows;
};

// l1 tolerant testing with eps1 = C sigma d^{3/4} against the uniform alternative: chi-squared vs plug-in.
inline SuboptimalityReport chi2_suboptimality_demo(int d, double sigma, double alpha, double beta, int n_reps,
                                                   const RandomStream& rng, const Vec& c_values = {4, 8, 16},
                                                   double C = 4, int mc_reps = 2000) {
    require(d >= 256, "chi2_suboptimality_demo: d must be >= 256");
    SuboptimalityReport rep;
    rep.d = d;
    rep.sigma = sigma;
    rep.alpha = alpha;
    rep.beta = beta;
    rep.C = C;
    rep.n_reps = n_reps;
    const double dd = static_cast<double>(d);
    const double eps1 = C * sigma * std::pow(dd, 0.75);
    const Vec uniform(static_cast<size_t>(d), eps1 / dd);
    Vec cs = {0.0};
    cs.insert(cs.end(), c_values.begin(), c_values.end());
    const GaussianStatistic chi2(StatisticKind::chi2, 2, sigma);
    for (std::size_t i = 0; i < cs.size(); ++i) {
        SuboptimalityRow row;
        row.c = cs[i];
        row.eps0 = cs[i] * sigma * std::pow(dd, 0.25);
        row.eps1 = eps1;
        const RandomStream r = rng.child(i);
        // An l1 ball of radius eps0 lies in the l2 ball of radius eps0; the spike attains the l2 radius.
        auto e = envelope(2, sigma, d, row.eps0);
        row.chi2_threshold_envelope = cantelli_quantile_bound(e.mean_upper, e.var_upper, alpha);
        double tmc = -std::numeric_limits<double>::infinity();
        auto nulls = extremal_null_candidates(1, row.eps0, d);
        for (std::size_t c = 0; c < nulls.size(); ++c)
            tmc = std::max(tmc, upper_quantile(simulate_statistic(chi2, nulls[c], sigma, mc_reps, r.child(10 + c)), alpha));
        row.chi2_threshold_mc = tmc;
        const double te = row.chi2_threshold_envelope;
        row.chi2_power_envelope = rejection_rate([&](const Vec& x) { return chi2(x) > te; }, uniform, sigma, n_reps, r.child(1));
        row.chi2_power_mc = rejection_rate([&](const Vec& x) { return chi2(x) > tmc; }, uniform, sigma, n_reps, r.child(1));
        TestSpec ps;
        ps.hypothesis = {1, row.eps0, eps1, Direction::tolerant};
        ps.statistic_kind = StatisticKind::plugin_lp;
        ps.alpha = alpha;
        ps.beta = beta;
        ps.calibration = Calibration::mc_worst_case;
        ps.mc_reps = mc_reps;
        row.plugin_threshold = mc_worst_case_threshold(ps, d, sigma, r.child(2));
        const GaussianStatistic plug(StatisticKind::plugin_lp, 1, sigma);
        const double tp = row.plugin_threshold;
        row.plugin_power = rejection_rate([&](const Vec& x) { return plug(x) > tp; }, uniform, sigma, n_reps, r.child(1));
        row.stderr_chi2 = rate_stderr(row.chi2_power_mc, n_reps);
        row.stderr_plugin = rate_stderr(row.plugin_power, n_reps);
        rep.rows.push_back(row);
    }
    return rep;
}

// CSV output, all reals with 17 significant digits.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_power_csv(std::ostream& os, const std::vector<PowerCurveRow>& rows) {
    os << "eps0,eps1,d,sigma,alpha,n_reps,type1,power,stderr,seed\n";
    for (const auto& r : rows)
        os << fmt17(r.eps0) << ',' << fmt17(r.eps1) << ',' << r.d << ',' << fmt17(r.sigma) << ',' << fmt17(r.alpha)
           << ',' << r.n_reps << ',' << fmt17(r.empirical_type1) << ',' << fmt17(r.empirical_power) << ','
           << fmt17(r.mc_stderr) << ',' << r.seed << '\n';
}

inline void write_regime_csv(std::ostream& os, const std::vector<RegimePoint>& pts) {
    os << "eps0,critical_sep,predicted,label\n";
    for (const auto& p : pts)
        os << fmt17(p.eps0) << ',' << fmt17(p.empirical_critical_sep) << ',' << fmt17(p.predicted_rate) << ','
           << to_string(p.regime_label) << '\n';
}

inline void write_suboptimality_csv(std::ostream& os, const SuboptimalityReport& rep) {
    os << "c,eps0,eps1,chi2_threshold_envelope,chi2_power_envelope,chi2_threshold_mc,chi2_power_mc,"
          "plugin_threshold,plugin_power,stderr_chi2,stderr_plugin\n";
    for (const auto& r : rep.rows)
        os << fmt17(r.c) << ',' << fmt17(r.eps0) << ',' << fmt17(r.eps1) << ',' << fmt17(r.chi2_threshold_envelope)
           << ',' << fmt17(r.chi2_power_envelope) << ',' << fmt17(r.chi2_threshold_mc) << ','
           << fmt17(r.chi2_power_mc) << ',' << fmt17(r.plugin_threshold) << ',' << fmt17(r.plugin_power) << ','
           << fmt17(r.stderr_chi2) << ',' << fmt17(r.stderr_plugin) << '\n';
}

}  // namespace tolerant
