#pragma once

#include <algorithm>
#include <cstdlib>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "lp.hpp"
#include "poly_approx.hpp"
#include "rng.hpp"
#include "special.hpp"

namespace tolerant {

// Two discrete mixing distributions on a common support.
struct MixingPair {
    std::vector<double> support;
    std::vector<double> w0, w1;
    int L = 0;          // number of matched moments
    double delta = 1;   // support lies in [-delta, delta]
    double p = 1;       // norm index targeted by the pair
};

struct MomentProblemResult {
    double value = 0;
    MixingPair pair;
    int lp_rounds = 0;
    double max_violation = 0;  // largest remaining reduced cost after column generation
};

// Largest |m_l(pi0) - m_l(pi1)| / delta^l over 1 <= l <= upto, accumulated in 128-bit floats.
inline double moment_gap(const MixingPair& pr, int upto) {
    double worst = 0;
    const __float128 inv = 1.0 / static_cast<double>(pr.delta);
    std::vector<__float128> pw(pr.support.size(), static_cast<__float128>(1));
    for (int l = 1; l <= upto; ++l) {
        __float128 m0 = 0, m1 = 0;
        for (std::size_t i = 0; i < pr.support.size(); ++i) {
            pw[i] *= static_cast<__float128>(pr.support[i]) * inv;
            m0 += static_cast<__float128>(pr.w0[i]) * pw[i];
            m1 += static_cast<__float128>(pr.w1[i]) * pw[i];
        }
        worst = std::max(worst, std::abs(static_cast<double>(m0 - m1)));
    }
    return worst;
}

inline double first_moment(const std::vector<double>& s, const std::vector<double>& w) {
    __float128 m = 0;
    for (std::size_t i = 0; i < s.size(); ++i) m += static_cast<__float128>(w[i]) * static_cast<__float128>(s[i]);
    return static_cast<double>(m);
}

// Throws ValidationError naming the violated invariant.
inline void validate_pair(const MixingPair& pr) {
    require(!pr.support.empty(), "MixingPair: empty support");
    require(pr.w0.size() == pr.support.size() && pr.w1.size() == pr.support.size(),
            "MixingPair: weights and support differ in length");
    require(pr.delta > 0 && std::isfinite(pr.delta), "MixingPair: delta must be positive");
    require(pr.L >= 0, "MixingPair: L must be >= 0");
    double s0 = 0, s1 = 0;
    for (std::size_t i = 0; i < pr.support.size(); ++i) {
        require(pr.w0[i] >= 0 && pr.w1[i] >= 0, "MixingPair: weights must be non-negative");
        require(std::abs(pr.support[i]) <= pr.delta * (1 + 1e-12), "MixingPair: support exceeds delta");
        s0 += pr.w0[i];
        s1 += pr.w1[i];
    }
    require(std::abs(s0 - 1) <= 1e-10 && std::abs(s1 - 1) <= 1e-10, "MixingPair: weights must sum to 1");
    require(std::abs(first_moment(pr.support, pr.w0)) <= 1e-10 * pr.delta &&
                std::abs(first_moment(pr.support, pr.w1)) <= 1e-10 * pr.delta,
            "MixingPair: distributions must be centred");
    require(moment_gap(pr, pr.L) <= 1e-8, "MixingPair: moments 1..L do not match");
}

inline MixingPair scale_pair(MixingPair pr, double delta) {
    require(delta > 0, "scale_pair: delta must be positive");
    const double f = delta / pr.delta;
    for (auto& s : pr.support) s *= f;
    pr.delta = delta;
    return pr;
}

namespace mm_detail {

struct Column {
    double x;
    int kind;  // 0: pi0 mass at +-x, 1: pi1 mass at +-x, 2: slack
};

// Symmetric moment problem on [0,1]: rows sum w0, sum w1, K even Chebyshev moments, optional |x|^p budget.
inline std::vector<double> column_vector(const Column& c, int K, double p, bool constrained) {
    const int m = 2 + K + (constrained ? 1 : 0);
    std::vector<double> a(static_cast<size_t>(m), 0.0);
    if (c.kind == 2) {
        a[static_cast<size_t>(m - 1)] = 1;
        return a;
    }
    auto t = even_cheb_values(K, c.x);
    a[static_cast<size_t>(c.kind)] = 1;
    const double s = c.kind == 1 ? 1.0 : -1.0;
    for (int l = 1; l <= K; ++l) a[static_cast<size_t>(1 + l)] = s * t[static_cast<size_t>(l)];
    if (constrained && c.kind == 0) a[static_cast<size_t>(m - 1)] = std::pow(c.x, p);
    return a;
}

inline double column_cost(const Column& c, double p, bool constrained) {
    if (c.kind == 2) return 0;
    double v = std::pow(c.x, p);
    if (constrained) return c.kind == 1 ? v : 0.0;
    return c.kind == 1 ? v : -v;
}

inline std::vector<double> grid01(int n) {
    std::vector<double> g(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) g[static_cast<size_t>(k)] = std::sin(std::numbers::pi * k / (2.0 * (n - 1)));
    g[0] = 0;
    g.back() = 1;
    return g;
}

inline MomentProblemResult solve(double p, int L, int grid_size, bool constrained, double eps, bool refine) {
    require(L >= 1, "moment problem: L must be >= 1");
    require(grid_size >= 8 * L, "moment problem: grid_size must be >= 8 L");
    require(p > 0 && std::isfinite(p), "moment problem: p must be positive");
    const int K = L / 2;
    const int m = 2 + K + (constrained ? 1 : 0);
    std::vector<Column> cols;
    for (double x : grid01(grid_size)) {
        cols.push_back({x, 0});
        cols.push_back({x, 1});
    }
    if (constrained) cols.push_back({0, 2});
    LinearProgram lp;
    lp.m = m;
    lp.b.assign(static_cast<size_t>(m), 0.0);
    lp.b[0] = 1;
    lp.b[1] = 1;
    if (constrained) lp.b[static_cast<size_t>(m - 1)] = std::pow(eps, p);
    for (const auto& c : cols) lp.add_column(column_vector(c, K, p, constrained), column_cost(c, p, constrained));

    MomentProblemResult out;
    LPResult res;
    const auto scan = remez_detail::dense_grid(std::max(20000, 200 * (K + 2)));
    constexpr double kRcTol = 1e-11;  // duals carry ~1e-13 noise
    double prev = -1e300;
    int stalls = 0;
    for (int round = 0; round < 200; ++round) {
        res = solve_lp(lp);
        out.lp_rounds = round + 1;
        if (!refine) break;
        // Column generation: add points of positive reduced cost found on a dense scan.
        auto rc = [&](double x, int kind) {
            Column c{x, kind};
            auto a = column_vector(c, K, p, constrained);
            double r = column_cost(c, p, constrained);
            for (int i = 0; i < m; ++i) r -= res.y[static_cast<size_t>(i)] * a[static_cast<size_t>(i)];
            return r;
        };
        double worst = 0;
        int added = 0;
        for (int kind = 0; kind < 2; ++kind) {
            std::vector<double> vals(scan.size());
            for (std::size_t i = 0; i < scan.size(); ++i) vals[i] = rc(scan[i], kind);
            for (std::size_t i = 0; i < scan.size(); ++i) {
                bool peak = (i == 0 || vals[i] >= vals[i - 1]) && (i + 1 == scan.size() || vals[i] >= vals[i + 1]);
                if (!peak) continue;
                double x = scan[i];
                if (i > 0 && i + 1 < scan.size())
                    x = remez_detail::golden_max([&](double t) { return rc(t, kind); }, scan[i - 1], scan[i + 1]);
                double r = rc(x, kind);
                worst = std::max(worst, r);
                bool dup = false;
                for (const auto& c : cols)
                    if (c.kind == kind && std::abs(c.x - x) < 1e-14) dup = true;
                if (r > kRcTol && !dup) {
                    Column c{x, kind};
                    lp.add_column(column_vector(c, K, p, constrained), column_cost(c, p, constrained));
                    cols.push_back(c);
                    ++added;
                }
            }
        }
        out.max_violation = worst;
        if (added == 0) break;
        stalls = (res.objective - prev <= 1e-15 * std::max(1.0, std::abs(res.objective))) ? stalls + 1 : 0;
        prev = res.objective;
        if (stalls >= 3) break;
        if (round == 199) throw ConvergenceError("moment problem: column generation did not converge");
    }
    out.value = res.objective;

    // Expand the symmetric solution to a pair on [-1,1].
    MixingPair pr;
    pr.L = L;
    pr.delta = 1;
    pr.p = p;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        double w = res.x[j];
        if (w <= 0 || cols[j].kind == 2) continue;
        const double x = cols[j].x;
        auto push = [&](double s, double wt) {
            pr.support.push_back(s);
            pr.w0.push_back(cols[j].kind == 0 ? wt : 0.0);
            pr.w1.push_back(cols[j].kind == 1 ? wt : 0.0);
        };
        if (x == 0) push(0.0, w);
        else {
            push(x, w / 2);
            push(-x, w / 2);
        }
    }
    // Renormalise away accumulated rounding in the simplex constraints.
    double s0 = 0, s1 = 0;
    for (std::size_t i = 0; i < pr.support.size(); ++i) s0 += pr.w0[i], s1 += pr.w1[i];
    for (std::size_t i = 0; i < pr.support.size(); ++i) {
        if (s0 > 0) pr.w0[i] /= s0;
        if (s1 > 0) pr.w1[i] /= s1;
    }
    out.pair = pr;
    return out;
}

}  // namespace mm_detail

inline int default_grid_size(int L) { return std::max(512, 16 * L); }

// sup E_{pi1}|v|^p - E_{pi0}|v|^p over pairs on [-1,1] matching moments 1..L.
inline MomentProblemResult solve_Mp(double p, int L, int grid_size = 0, bool refine = true) {
    require(p >= 1 && L >= 1, "solve_Mp: need p >= 1 and L >= 1");
    if (grid_size <= 0) grid_size = default_grid_size(L);
    return mm_detail::solve(p, L, grid_size, false, 0.0, refine);
}

// sup E_{pi1}|v|^p subject to E_{pi0}|v|^p <= eps^p and matched moments 1..L.
inline MomentProblemResult solve_Mp_constrained(double p, double eps, int L, int grid_size = 0, bool refine = true) {
    require(eps >= 0 && eps < 1, "solve_Mp_constrained: eps must lie in [0,1)");
    require(p >= 1 && L >= 1, "solve_Mp_constrained: need p >= 1 and L >= 1");
    if (eps == 0) {
        // pi0 = delta_0; for L >= 2 the second moment forces pi1 = delta_0, for L = 1 pi1 sits at +-1.
        MomentProblemResult out;
        out.pair.L = L;
        out.pair.delta = 1;
        out.pair.p = p;
        if (L >= 2) {
            out.pair.support = {0.0};
            out.pair.w0 = out.pair.w1 = {1.0};
        } else {
            out.pair.support = {-1.0, 0.0, 1.0};
            out.pair.w0 = {0.0, 1.0, 0.0};
            out.pair.w1 = {0.5, 0.0, 0.5};
            out.value = 1;
        }
        return out;
    }
    if (grid_size <= 0) grid_size = default_grid_size(L);
    return mm_detail::solve(p, L, grid_size, true, eps, refine);
}

// g(p,L) = 2^{-(p-1)} sum_{j=floor((p+L)/2)}^{p} C(p,j) for integer p.
inline double g_even(int p, int L) {
    double s = 0;
    for (int j = (p + L) / 2; j <= p; ++j) s += falling_binomial(p, j);
    return s * std::ldexp(1.0, -(p - 1));
}

inline constexpr double kBernsteinBeta1 = 0.2801694990238691;

// ---------------------------------------------------------------- chi-squared bounds

struct Chi2SeriesInfo {
    double value = 0;
    int terms = 0;
    double tail = 0;
};

// e^{delta0^2/(2 sigma^2)} sum_{j>=1} Delta_j^2 / (j! sigma^{2j}) with an analytic tail bound;
// delta0 is the support radius of pi0, which must be centred.
inline Chi2SeriesInfo chi2_series(const MixingPair& pr, double sigma) {
    validate_pair(pr);
    require(sigma > 0, "chi2_one_dim_bound: sigma must be > 0");
    double rad = 0, rad0 = 0;
    for (std::size_t i = 0; i < pr.support.size(); ++i) {
        rad = std::max(rad, std::abs(pr.support[i]));
        if (pr.w0[i] > 0) rad0 = std::max(rad0, std::abs(pr.support[i]));
    }
    const double x = rad * rad / (sigma * sigma);
    if (x > 50) throw ValidationError("chi2_one_dim_bound: delta^2/sigma^2 > 50, series bound refused");
    Chi2SeriesInfo info;
    if (rad == 0 || pr.w0 == pr.w1) return info;
    const std::size_t n = pr.support.size();
    std::vector<long double> a(n, 1.0L);  // (s_i/sigma)^j / sqrt(j!)
    long double sum = 0, c = 0;
    long double tailterm = 4.0L;           // 4 x^j / j!
    for (int j = 1; j < 2000; ++j) {
        long double dj = 0;
        for (std::size_t i = 0; i < n; ++i) {
            a[i] *= static_cast<long double>(pr.support[i]) / sigma / std::sqrt(static_cast<long double>(j));
            dj += (static_cast<long double>(pr.w1[i]) - static_cast<long double>(pr.w0[i])) * a[i];
        }
        long double y = dj * dj - c, t = sum + y;
        c = (t - sum) - y;
        sum = t;
        tailterm *= static_cast<long double>(x) / j;
        // Remaining terms are <= 4 x^k/k! for k > j, bounded geometrically once j + 2 > x.
        long double next = tailterm * static_cast<long double>(x) / (j + 1);
        if (j + 2 > x) {
            long double ratio = static_cast<long double>(x) / (j + 2);
            long double tail = next / (1 - ratio);
            if (tail < std::max(1e-16L * sum, 1e-300L)) {
                info.terms = j;
                info.tail = static_cast<double>(tail);
                sum += tail;
                break;
            }
        }
    }
    info.value = static_cast<double>(std::exp(static_cast<long double>(rad0 * rad0 / (2 * sigma * sigma))) * sum);
    return info;
}

inline double chi2_one_dim_bound(const MixingPair& pr, double sigma) { return chi2_series(pr, sigma).value; }

// (1 + chi2_one)^d - 1; +inf on overflow.
inline double chi2_tensorize(double chi2_one, long long d) {
    require(chi2_one >= 0, "chi2_tensorize: chi2 must be >= 0");
    require(d >= 1, "chi2_tensorize: d must be >= 1");
    double lg = static_cast<double>(d) * std::log1p(chi2_one);
    if (lg > 709) return std::numeric_limits<double>::infinity();
    return std::expm1(lg);
}

// Worst-case bound over pairs on [-delta,delta] matching L moments, tensorised over d coordinates.
inline double worst_case_chi2(int L, long long d, double r /* delta / sigma */) {
    const double x = r * r;
    long double term = 1, sum = 0;  // x^j / j!
    for (int j = 1; j <= L; ++j) term *= static_cast<long double>(x) / j;
    for (int j = L + 1; j < 4000; ++j) {
        term *= static_cast<long double>(x) / j;
        sum += 4 * term;
        if (j + 1 > 2 * x && 4 * term < 1e-18L * sum) break;
    }
    double one = static_cast<double>(std::exp(static_cast<long double>(x / 2)) * sum);
    return chi2_tensorize(one, d);
}

// Largest delta (bisection) whose worst-case chi2 bound stays below target.
inline double feasible_delta(int L, long long d, double sigma, double target_chi2) {
    require(L >= 0 && d >= 1 && sigma > 0 && target_chi2 > 0, "feasible_delta: inputs must be positive");
    double lo = 1e-12, hi = std::sqrt(50.0);
    if (worst_case_chi2(L, d, lo) > target_chi2) throw ConvergenceError("feasible_delta: no feasible delta");
    if (worst_case_chi2(L, d, hi) <= target_chi2) return hi * sigma;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        double mid = (lo + hi) / 2;
        (worst_case_chi2(L, d, mid) <= target_chi2 ? lo : hi) = mid;
    }
    return lo * sigma;
}

// ---------------------------------------------------------------- certificates

struct LowerBoundCertificate {
    MixingPair pair;  // scaled to [-delta, delta]
    long long d = 1;
    double sigma = 1;
    double chi2_upper = 0;
    double mass0 = 0, mass1 = 0;
    double eps0 = 0, eps1 = 0;
    double alpha = 0.05, beta = 0.1;
    double target_risk_floor = 0.1;
    std::string route;  // "exact_support" or "fuzzy"
};

struct CertificateNumbers {
    double E0 = 0, V0 = 0, E1 = 0, V1 = 0;
    double eps0 = 0, eps1 = 0, mass0 = 1, mass1 = 1, chi2 = 0;
    bool exact = false;
};

inline double abs_moment(const MixingPair& pr, const std::vector<double>& w, double q) {
    long double s = 0;
    for (std::size_t i = 0; i < pr.support.size(); ++i)
        s += static_cast<long double>(w[i]) * std::pow(static_cast<long double>(std::abs(pr.support[i])), static_cast<long double>(q));
    return static_cast<double>(s);
}

inline CertificateNumbers certificate_numbers(const MixingPair& pr, long long d, double sigma, double alpha, double beta,
                                              double p) {
    const double Ca = 1 - (alpha + beta);
    const double C0 = Ca / 4;
    CertificateNumbers c;
    const double dd = static_cast<double>(d);
    const double m0 = abs_moment(pr, pr.w0, p);
    c.E0 = dd * m0;
    c.V0 = std::max(0.0, dd * (abs_moment(pr, pr.w0, 2 * p) - m0 * m0));
    const double m1 = abs_moment(pr, pr.w1, p);
    c.E1 = dd * m1;
    c.V1 = std::max(0.0, dd * (abs_moment(pr, pr.w1, 2 * p) - m1 * m1));
    if (c.E0 == 0) {
        c.eps0 = 0;
        c.mass0 = 1;
    } else {
        // Markov: P(||v||^p > E0/C0) <= C0.  Chebyshev: P(||v||^p > E0 + sqrt(V0/C0)) <= C0.  Keep the smaller radius.
        const double markov = c.E0 / C0;
        const double cheb = c.E0 + std::sqrt(c.V0 / C0) * (1 + 1e-9);
        if (cheb < markov) {
            c.eps0 = std::pow(cheb, 1 / p);
            const double gap = std::pow(c.eps0, p) - c.E0;
            c.mass0 = c.V0 == 0 ? 1.0 : 1 - c.V0 / (gap * gap);
        } else {
            c.eps0 = std::pow(markov, 1 / p);
            c.mass0 = 1 - c.E0 / std::pow(c.eps0, p);
        }
    }
    double C1 = 1;
    if (c.V1 <= 1e-15 * c.E1 * c.E1) {
        c.mass1 = 1;
    } else {
        C1 = 1 - std::sqrt(c.V1 / C0) / c.E1 * (1 + 1e-9);
        c.mass1 = C1 > 0 ? 1 - c.V1 / (((1 - C1) * c.E1) * ((1 - C1) * c.E1)) : 0;
    }
    c.eps1 = C1 > 0 ? std::pow(C1 * c.E1, 1 / p) : 0;
    c.chi2 = chi2_tensorize(chi2_one_dim_bound(pr, sigma), d);
    c.exact = c.mass0 == 1 && c.mass1 == 1;
    return c;
}

// Checks the inequalities a certificate must satisfy; returns "" or the failed condition.
inline std::string certificate_violation(const CertificateNumbers& c, double alpha, double beta) {
    const double Ca = 1 - (alpha + beta);
    if (!(Ca > 0)) return "alpha + beta must be < 1";
    if (c.exact) {
        if (!(c.chi2 <= Ca * Ca)) return "chi2 condition failed: chi2 > C_alpha^2";
    } else {
        if (!(c.mass0 >= 1 - Ca / 4 - 1e-12) || !(c.mass1 >= 1 - Ca / 4 - 1e-12))
            return "mass condition failed: escaping mass exceeds C_alpha/4";
        if (!(c.chi2 < (Ca / 2) * (Ca / 2))) return "chi2 condition failed: chi2 >= (C_alpha/2)^2";
    }
    if (!(c.eps1 > c.eps0)) return "mean-gap condition failed: eps1 <= eps0";
    return "";
}

inline LowerBoundCertificate assemble_certificate(MixingPair pair, long long d, double sigma, double alpha, double beta,
                                                  double p, double delta = 0) {
    require(d >= 1 && sigma > 0, "assemble_certificate: d >= 1 and sigma > 0 required");
    require(alpha > 0 && beta > 0 && alpha + beta < 1, "assemble_certificate: need alpha, beta > 0 with alpha + beta < 1");
    if (delta > 0) pair = scale_pair(pair, delta);
    pair.p = p;
    validate_pair(pair);
    auto c = certificate_numbers(pair, d, sigma, alpha, beta, p);
    auto why = certificate_violation(c, alpha, beta);
    if (!why.empty()) throw CertificateError("assemble_certificate refused: " + why);
    LowerBoundCertificate cert;
    cert.pair = pair;
    cert.d = d;
    cert.sigma = sigma;
    cert.chi2_upper = c.chi2;
    cert.mass0 = c.mass0;
    cert.mass1 = c.mass1;
    cert.eps0 = c.eps0;
    cert.eps1 = c.eps1;
    cert.alpha = alpha;
    cert.beta = beta;
    cert.target_risk_floor = beta;
    cert.route = c.exact ? "exact_support" : "fuzzy";
    return cert;
}

// Independent recomputation of the one-dimensional chi2 bound with 128-bit sums and a fixed term count.
inline double chi2_recheck(const MixingPair& pr, double sigma) {
    double rad = 0, rad0 = 0;
    for (std::size_t i = 0; i < pr.support.size(); ++i) {
        rad = std::max(rad, std::abs(pr.support[i]));
        if (pr.w0[i] > 0) rad0 = std::max(rad0, std::abs(pr.support[i]));
    }
    const double x = rad * rad / (sigma * sigma);
    if (x > 50) return std::numeric_limits<double>::infinity();
    const int J = 400;
    std::vector<__float128> a(pr.support.size(), static_cast<__float128>(1));
    __float128 sum = 0;
    for (int j = 1; j <= J; ++j) {
        __float128 dj = 0;
        for (std::size_t i = 0; i < pr.support.size(); ++i) {
            a[i] = a[i] * static_cast<__float128>(pr.support[i] / sigma);
            dj += (static_cast<__float128>(pr.w1[i]) - static_cast<__float128>(pr.w0[i])) * a[i];
        }
        __float128 fact = 1;
        for (int k = 2; k <= j; ++k) fact *= k;
        sum += dj * dj / fact;
    }
    // Tail beyond J: sum_{j>J} 4 x^j / j! < 4 x^{J+1}/(J+1)! * 2 for x <= 50.
    double tail = 8 * std::exp((J + 1) * std::log(std::max(x, 1e-300)) - std::lgamma(J + 2.0));
    return std::exp(rad0 * rad0 / (2 * sigma * sigma)) * (static_cast<double>(sum) + tail);
}

// Independent recheck of every stored inequality; returns "" when sound.
inline std::string recheck_certificate(const LowerBoundCertificate& cert) {
    try {
        validate_pair(cert.pair);
    } catch (const ValidationError& e) {
        return e.what();
    }
    if (cert.d < 1 || !(cert.sigma > 0)) return "invalid d or sigma";
    if (!(cert.alpha > 0 && cert.beta > 0 && cert.alpha + cert.beta < 1)) return "invalid alpha/beta";
    const double p = cert.pair.p;
    auto c = certificate_numbers(cert.pair, cert.d, cert.sigma, cert.alpha, cert.beta, p);
    // Independent chi2 value must not exceed the stored bound.
    const double indep = chi2_tensorize(chi2_recheck(cert.pair, cert.sigma), cert.d);
    auto rel = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); };
    if (!(indep <= cert.chi2_upper * (1 + 1e-9) + 1e-15)) return "stored chi2 bound is below the recomputed value";
    if (!rel(c.chi2, cert.chi2_upper)) return "stored chi2 bound differs from recomputation";
    if (!rel(c.mass0, cert.mass0) || !rel(c.mass1, cert.mass1)) return "stored masses differ from recomputation";
    if (!rel(c.eps0, cert.eps0) || !rel(c.eps1, cert.eps1)) return "stored radii differ from recomputation";
    if (!rel(cert.target_risk_floor, cert.beta)) return "target risk floor differs from beta";
    if (cert.route != (c.exact ? "exact_support" : "fuzzy")) return "route label inconsistent";
    CertificateNumbers stored = c;
    stored.chi2 = cert.chi2_upper;
    stored.mass0 = cert.mass0;
    stored.mass1 = cert.mass1;
    stored.eps0 = cert.eps0;
    stored.eps1 = cert.eps1;
    return certificate_violation(stored, cert.alpha, cert.beta);
}

// Pair pi0 = point mass at 0, pi1 = symmetric two-point at +-1 (scale via delta).
inline MixingPair two_point_pair(double delta, double p) {
    MixingPair pr;
    pr.support = {-delta, 0.0, delta};
    pr.w0 = {0.0, 1.0, 0.0};
    pr.w1 = {0.5, 0.0, 0.5};
    pr.L = 1;
    pr.delta = delta;
    pr.p = p;
    return pr;
}

// Free-tolerance construction: eps = [2 log(1 + C_a^2)]^{1/4} sigma d^{3/4}, pi1 at +-eps/d.
inline MixingPair free_tolerance_pair(long long d, double sigma, double alpha, double beta) {
    const double Ca = 1 - (alpha + beta);
    const double C = std::pow(2 * std::log1p(Ca * Ca), 0.25);
    const double eps = C * sigma * std::pow(static_cast<double>(d), 0.75);
    return two_point_pair(eps / static_cast<double>(d), 1.0);
}

// Random centred pair on [-delta,delta] matching L moments: symmetric random pi0, pi1 an LP vertex.
inline MixingPair random_mixing_pair(const RandomStream& rng, int L, double delta) {
    auto eng = rng.engine();
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const int K = L / 2;
    const int k0 = 2 + static_cast<int>(U(eng) * 4);
    std::vector<double> xs0, ws0;
    double tot = 0;
    for (int i = 0; i < k0; ++i) {
        xs0.push_back(0.05 + 0.95 * U(eng));
        ws0.push_back(0.1 + U(eng));
        tot += ws0.back();
    }
    for (auto& w : ws0) w /= tot;
    // pi1: maximise a random objective over symmetric measures matching pi0's even moments.
    auto grid = mm_detail::grid01(64 + 8 * L);
    for (double x : xs0) grid.push_back(x);
    LinearProgram lp;
    lp.m = 1 + K;
    lp.b.assign(static_cast<size_t>(lp.m), 0.0);
    lp.b[0] = 1;
    for (int i = 0; i < k0; ++i) {
        auto t = even_cheb_values(K, xs0[static_cast<size_t>(i)]);
        for (int l = 1; l <= K; ++l) lp.b[static_cast<size_t>(l)] += ws0[static_cast<size_t>(i)] * t[static_cast<size_t>(l)];
    }
    for (double x : grid) {
        auto t = even_cheb_values(K, x);
        std::vector<double> a(static_cast<size_t>(lp.m));
        a[0] = 1;
        for (int l = 1; l <= K; ++l) a[static_cast<size_t>(l)] = t[static_cast<size_t>(l)];
        lp.add_column(a, 2 * U(eng) - 1);
    }
    auto res = solve_lp(lp);
    MixingPair pr;
    pr.L = L;
    pr.delta = delta;
    pr.p = 1;
    auto push = [&](double x, double w0, double w1) {
        pr.support.push_back(x * delta);
        pr.w0.push_back(w0);
        pr.w1.push_back(w1);
        if (x > 0) {
            pr.support.push_back(-x * delta);
            pr.w0.push_back(w0);
            pr.w1.push_back(w1);
        }
    };
    for (int i = 0; i < k0; ++i) push(xs0[static_cast<size_t>(i)], ws0[static_cast<size_t>(i)] / 2, 0.0);
    double s1 = 0;
    for (double w : res.x) s1 += w;
    for (std::size_t j = 0; j < grid.size(); ++j)
        if (res.x[j] > 0) push(grid[j], 0.0, grid[j] > 0 ? res.x[j] / s1 / 2 : res.x[j] / s1);
    return pr;
}

// chi2(P_{pi1}, P_{pi0}) in one dimension by adaptive quadrature of the mixture densities.
inline double chi2_quadrature(const MixingPair& pr, double sigma) {
    double rad = 0;
    for (double s : pr.support) rad = std::max(rad, std::abs(s));
    auto dens = [&](const std::vector<double>& w, double x) {
        long double s = 0;
        for (std::size_t i = 0; i < pr.support.size(); ++i)
            if (w[i] > 0) s += w[i] * std::exp(-0.5L * std::pow((x - pr.support[i]) / sigma, 2));
        return s / (sigma * std::sqrt(2 * std::numbers::pi_v<long double>));
    };
    auto f = [&](double x) {
        long double p0 = dens(pr.w0, x), p1 = dens(pr.w1, x);
        if (p0 <= 0) return 0.0;
        return static_cast<double>((p1 - p0) * (p1 - p0) / p0);
    };
    const double R = rad + 25 * sigma;
    std::vector<double> br;
    for (int k = -8; k <= 8; ++k) br.push_back(k * R / 9);
    return integrate_pieces(f, -R, R, br, 1e-13);
}

}  // namespace tolerant
