#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "errors.hpp"

namespace tolerant {

// Even Chebyshev series sum_l c_l T_{2l}(x) = sum_l c_l T_l(2x^2 - 1), by Clenshaw.
inline double even_cheb_eval(const std::vector<double>& c, double x) {
    const double s = 2 * x * x - 1;
    double b1 = 0, b2 = 0;
    for (int l = static_cast<int>(c.size()) - 1; l >= 1; --l) {
        double b0 = 2 * s * b1 - b2 + c[static_cast<size_t>(l)];
        b2 = b1;
        b1 = b0;
    }
    return (c.empty() ? 0.0 : c[0]) + s * b1 - b2;
}

// T_{2l}(x) for l = 0..K.
inline std::vector<double> even_cheb_values(int K, double x) {
    std::vector<double> t(static_cast<size_t>(K + 1));
    const double s = 2 * x * x - 1;
    double tm = 1, tc = s;
    t[0] = 1;
    if (K >= 1) t[1] = s;
    for (int l = 2; l <= K; ++l) {
        double tn = 2 * s * tc - tm;
        tm = tc;
        tc = tn;
        t[static_cast<size_t>(l)] = tn;
    }
    return t;
}

struct PolyApproxResult {
    int degree = 0;                    // L
    double error = 0;                  // verified sup_{|x|<=1} | |x|^p - P(x) |
    double claimed_error = 0;          // levelled error of the final Remez system
    std::vector<double> coefficients;  // P(x) = sum_l c_l T_{2l}(x)
    std::vector<double> reference;     // final alternation points in [0,1]
    int alternations = 0;
    int iterations = 0;
};

namespace remez_detail {

inline bool solve_dense(std::vector<std::vector<long double>> A, std::vector<long double> b, std::vector<long double>& x) {
    const int n = static_cast<int>(b.size());
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(A[static_cast<size_t>(r)][static_cast<size_t>(c)]) > std::abs(A[static_cast<size_t>(piv)][static_cast<size_t>(c)])) piv = r;
        if (std::abs(A[static_cast<size_t>(piv)][static_cast<size_t>(c)]) < 1e-300L) return false;
        std::swap(A[static_cast<size_t>(piv)], A[static_cast<size_t>(c)]);
        std::swap(b[static_cast<size_t>(piv)], b[static_cast<size_t>(c)]);
        for (int r = c + 1; r < n; ++r) {
            long double f = A[static_cast<size_t>(r)][static_cast<size_t>(c)] / A[static_cast<size_t>(c)][static_cast<size_t>(c)];
            if (f == 0) continue;
            for (int k = c; k < n; ++k) A[static_cast<size_t>(r)][static_cast<size_t>(k)] -= f * A[static_cast<size_t>(c)][static_cast<size_t>(k)];
            b[static_cast<size_t>(r)] -= f * b[static_cast<size_t>(c)];
        }
    }
    x.assign(static_cast<size_t>(n), 0);
    for (int r = n - 1; r >= 0; --r) {
        long double s = b[static_cast<size_t>(r)];
        for (int k = r + 1; k < n; ++k) s -= A[static_cast<size_t>(r)][static_cast<size_t>(k)] * x[static_cast<size_t>(k)];
        x[static_cast<size_t>(r)] = s / A[static_cast<size_t>(r)][static_cast<size_t>(r)];
    }
    return true;
}

// Golden-section maximisation of g on [a,b].
template <class G>
double golden_max(const G& g, double a, double b, int iters = 80) {
    const double r = (std::sqrt(5.0) - 1) / 2;
    double c = b - r * (b - a), d = a + r * (b - a);
    double gc = g(c), gd = g(d);
    for (int i = 0; i < iters && b - a > 1e-17; ++i) {
        if (gc > gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    double best = (gc > gd) ? c : d;
    double gb = std::max(gc, gd);
    if (g(a) > gb) best = a, gb = g(a);
    if (g(b) > gb) best = b;
    return best;
}

// Dense grid on [0,1]: x = sin(pi k / 2N), clustered at 1.
inline std::vector<double> dense_grid(int N) {
    std::vector<double> g(static_cast<size_t>(N + 1));
    for (int k = 0; k <= N; ++k) g[static_cast<size_t>(k)] = std::sin(std::numbers::pi * k / (2.0 * N));
    g[0] = 0;
    g[static_cast<size_t>(N)] = 1;
    return g;
}

// Local extrema of |e| with alternating sign, refined between neighbouring grid points.
template <class E>
std::vector<double> alternating_extrema(const E& err, const std::vector<double>& grid) {
    struct Ext {
        double x, v;
    };
    std::vector<Ext> ext;
    const std::size_t n = grid.size();
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = err(grid[i]);
    for (std::size_t i = 0; i < n; ++i) {
        double a = std::abs(e[i]);
        bool left = (i == 0) || a >= std::abs(e[i - 1]);
        bool right = (i + 1 == n) || a >= std::abs(e[i + 1]);
        if (!(left && right) || a == 0) continue;
        double x = grid[i];
        if (i > 0 && i + 1 < n) {
            double s = e[i] > 0 ? 1.0 : -1.0;
            x = golden_max([&](double t) { return s * err(t); }, grid[i - 1], grid[i + 1]);
        }
        ext.push_back({x, err(x)});
    }
    // Merge runs of equal sign, keeping the largest magnitude.
    std::vector<Ext> alt;
    for (const auto& q : ext) {
        if (!alt.empty() && (alt.back().v > 0) == (q.v > 0)) {
            if (std::abs(q.v) > std::abs(alt.back().v)) alt.back() = q;
        } else {
            alt.push_back(q);
        }
    }
    std::vector<double> xs;
    for (const auto& q : alt) xs.push_back(q.x);
    return xs;
}

}  // namespace remez_detail

// Best uniform approximation of |x|^p on [-1,1] by polynomials of degree <= L (Remez exchange on even functions).
inline PolyApproxResult best_poly_approx(double p, int L, double tol = 1e-11, int max_iter = 200) {
    using namespace remez_detail;
    require(L >= 0, "best_poly_approx: L must be >= 0");
    require(p > 0 && std::isfinite(p), "best_poly_approx: p must be positive");
    const int K = L / 2;
    const int R = K + 2;
    auto f = [p](double x) { return std::pow(std::abs(x), p); };
    PolyApproxResult res;
    res.degree = L;

    // Exact case: |x|^p is itself an even polynomial of degree <= 2K.
    if (p == std::floor(p) && static_cast<long>(p) % 2 == 0 && p <= 2 * K) {
        const int q = static_cast<int>(p) / 2;
        // x^{2q} in the T_{2l} basis: 2^{1-2q} sum_{j<q} C(2q,j) T_{2q-2j} + 2^{-2q} C(2q,q).
        res.coefficients.assign(static_cast<size_t>(K + 1), 0.0);
        double scale = std::ldexp(1.0, 1 - 2 * q);
        double binom = 1;
        for (int j = 0; j <= q; ++j) {
            if (j < q) res.coefficients[static_cast<size_t>(q - j)] += scale * binom;
            else res.coefficients[0] += scale * binom / 2;
            binom = binom * (2 * q - j) / (j + 1);
        }
        res.error = 0;
        res.claimed_error = 0;
        auto grid = dense_grid(2000);
        for (double x : grid) res.error = std::max(res.error, std::abs(f(x) - even_cheb_eval(res.coefficients, x)));
        return res;
    }

    std::vector<double> ref(static_cast<size_t>(R));
    for (int i = 0; i < R; ++i) ref[static_cast<size_t>(i)] = std::cos(std::numbers::pi * (R - 1 - i) / (2.0 * (R - 1)));
    ref[0] = 0;
    ref[static_cast<size_t>(R - 1)] = 1;
    if (R == 2) ref = {0.0, 1.0};

    const auto grid = dense_grid(std::max(4000, 400 * R));
    std::vector<double> coef(static_cast<size_t>(K + 1), 0.0);
    double E = 0;
    for (int it = 0; it < max_iter; ++it) {
        res.iterations = it + 1;
        std::vector<std::vector<long double>> A(static_cast<size_t>(R), std::vector<long double>(static_cast<size_t>(R)));
        std::vector<long double> rhs(static_cast<size_t>(R)), sol;
        for (int i = 0; i < R; ++i) {
            auto t = even_cheb_values(K, ref[static_cast<size_t>(i)]);
            for (int l = 0; l <= K; ++l) A[static_cast<size_t>(i)][static_cast<size_t>(l)] = t[static_cast<size_t>(l)];
            A[static_cast<size_t>(i)][static_cast<size_t>(K + 1)] = (i % 2 == 0) ? 1.0L : -1.0L;
            rhs[static_cast<size_t>(i)] = f(ref[static_cast<size_t>(i)]);
        }
        if (!solve_dense(A, rhs, sol)) throw ConvergenceError("best_poly_approx: singular Remez system");
        for (int l = 0; l <= K; ++l) coef[static_cast<size_t>(l)] = static_cast<double>(sol[static_cast<size_t>(l)]);
        E = std::abs(static_cast<double>(sol[static_cast<size_t>(K + 1)]));
        auto err = [&](double x) { return f(x) - even_cheb_eval(coef, x); };
        auto xs = alternating_extrema(err, grid);
        if (static_cast<int>(xs.size()) < R) throw ConvergenceError("best_poly_approx: lost alternation");
        double emax = 0;
        for (double x : xs) emax = std::max(emax, std::abs(err(x)));
        // Trim the smaller end until R alternation points remain; the global maximum survives.
        std::size_t lo = 0, hi = xs.size();
        while (hi - lo > static_cast<std::size_t>(R)) {
            if (std::abs(err(xs[lo])) < std::abs(err(xs[hi - 1]))) ++lo;
            else --hi;
        }
        std::vector<double> nref(xs.begin() + static_cast<long>(lo), xs.begin() + static_cast<long>(hi));
        double emin = 1e300;
        for (double x : nref) emin = std::min(emin, std::abs(err(x)));
        ref = nref;
        if (emax - emin <= tol * std::max(emax, 1e-300)) break;
        if (it + 1 == max_iter) throw ConvergenceError("best_poly_approx: Remez did not converge");
    }
    res.coefficients = coef;
    res.claimed_error = E;
    res.reference = ref;

    // Verification on a 10x finer grid with local refinement.
    auto err = [&](double x) { return f(x) - even_cheb_eval(coef, x); };
    const auto fine = dense_grid(10 * static_cast<int>(grid.size()));
    double vmax = 0;
    std::size_t ibest = 0;
    for (std::size_t i = 0; i < fine.size(); ++i) {
        double a = std::abs(err(fine[i]));
        if (a > vmax) vmax = a, ibest = i;
    }
    if (ibest > 0 && ibest + 1 < fine.size()) {
        double s = err(fine[ibest]) > 0 ? 1.0 : -1.0;
        double x = golden_max([&](double t) { return s * err(t); }, fine[ibest - 1], fine[ibest + 1]);
        vmax = std::max(vmax, std::abs(err(x)));
    }
    for (double x : alternating_extrema(err, fine)) vmax = std::max(vmax, std::abs(err(x)));
    res.error = vmax;
    if (std::abs(vmax - E) > 1e-9) throw ConvergenceError("best_poly_approx: verification mismatch");
    int alts = 0;
    double last = 0;
    for (double x : alternating_extrema(err, fine)) {
        double v = err(x);
        if (std::abs(v) >= (1 - 1e-6) * vmax && (alts == 0 || (v > 0) != (last > 0))) {
            ++alts;
            last = v;
        }
    }
    res.alternations = alts;
    if (alts < R) throw ConvergenceError("best_poly_approx: equioscillation check failed");
    return res;
}

}  // namespace tolerant
