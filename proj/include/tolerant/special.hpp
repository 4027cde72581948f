#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "errors.hpp"

namespace tolerant {

// Probabilist's Hermite polynomial He_j(x).
inline double hermite(int j, double x) {
    require(j >= 0, "hermite: j must be >= 0");
    if (j == 0) return 1.0;
    double hm = 1.0, h = x;
    for (int k = 1; k < j; ++k) {
        double hn = x * h - k * hm;
        hm = h;
        h = hn;
    }
    return h;
}

// E|Z|^p for Z ~ N(0,1).
inline double gaussian_abs_moment(double p) {
    require(p >= 0, "gaussian_abs_moment: p must be >= 0");
    return std::exp((p / 2) * std::log(2.0) + std::lgamma((p + 1) / 2)) / std::sqrt(std::numbers::pi);
}

// p (p-1) ... (p-k+1) / k!, defined for real p.
inline double falling_binomial(double p, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= (p - i) / (i + 1);
    return r;
}

struct QuadRule {
    std::vector<double> x, w;
};

// Gauss-Legendre on [-1,1] by Newton iteration on P_n.
inline QuadRule gauss_legendre(int n) {
    QuadRule q;
    q.x.resize(static_cast<size_t>(n));
    q.w.resize(static_cast<size_t>(n));
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5)), pp = 0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1, p2 = 0;
            for (int j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) * z * p2 - j * p3) / (j + 1);
            }
            pp = n * (z * p1 - p2) / (z * z - 1);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        q.x[static_cast<size_t>(i)] = -z;
        q.x[static_cast<size_t>(n - 1 - i)] = z;
        q.w[static_cast<size_t>(i)] = q.w[static_cast<size_t>(n - 1 - i)] = 2 / ((1 - z * z) * pp * pp);
    }
    return q;
}

// Eigenvalues of the symmetric tridiagonal matrix (diag d, off-diagonal e[1..n-1]) by implicit QL.
inline std::vector<double> tridiagonal_eigenvalues(std::vector<double> d, std::vector<double> e) {
    const int n = static_cast<int>(d.size());
    for (int i = 1; i < n; ++i) e[static_cast<size_t>(i - 1)] = e[static_cast<size_t>(i)];
    if (n > 0) e[static_cast<size_t>(n - 1)] = 0;
    auto D = [&](int i) -> double& { return d[static_cast<size_t>(i)]; };
    auto E = [&](int i) -> double& { return e[static_cast<size_t>(i)]; };
    for (int l = 0; l < n; ++l) {
        int iter = 0, m;
        do {
            for (m = l; m < n - 1; ++m) {
                double dd = std::abs(D(m)) + std::abs(D(m + 1));
                if (std::abs(E(m)) <= 1e-17 * dd) break;
            }
            if (m != l) {
                if (++iter > 200) throw ConvergenceError("tridiagonal_eigenvalues: no convergence");
                double g = (D(l + 1) - D(l)) / (2 * E(l));
                double r = std::hypot(g, 1.0);
                g = D(m) - D(l) + E(l) / (g + std::copysign(r, g));
                double s = 1, c = 1, p = 0;
                int i;
                for (i = m - 1; i >= l; --i) {
                    double f = s * E(i), b = c * E(i);
                    E(i + 1) = (r = std::hypot(f, g));
                    if (r == 0) {
                        D(i + 1) -= p;
                        E(m) = 0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = D(i + 1) - p;
                    r = (D(i) - g) * s + 2 * c * b;
                    D(i + 1) = g + (p = s * r);
                    g = c * r - b;
                }
                if (r == 0 && i >= l) continue;
                D(l) -= p;
                E(l) = g;
                E(m) = 0;
            }
        } while (m != l);
    }
    std::sort(d.begin(), d.end());
    return d;
}

// Gauss-Hermite for the standard normal weight: sum w_i f(x_i) ~ E f(Z).
// Nodes from the Jacobi matrix, polished by Newton; weights from the Christoffel function.
inline QuadRule gauss_hermite_normal(int n) {
    require(n >= 1, "gauss_hermite_normal: n must be >= 1");
    std::vector<double> diag(static_cast<size_t>(n), 0.0), off(static_cast<size_t>(n), 0.0);
    for (int k = 1; k < n; ++k) off[static_cast<size_t>(k)] = std::sqrt(static_cast<double>(k));
    QuadRule q;
    q.x = tridiagonal_eigenvalues(diag, off);
    q.w.assign(static_cast<size_t>(n), 0.0);
    // Orthonormal recursion p_{k+1} = (x p_k - sqrt(k) p_{k-1}) / sqrt(k+1); returns sum p_k^2 for k < n.
    auto eval = [n](double x, double& pn, double& pn1) {
        double pm = 0, pk = 1, ss = 1;
        for (int k = 0; k < n; ++k) {
            double next = (x * pk - std::sqrt(static_cast<double>(k)) * pm) / std::sqrt(k + 1.0);
            pm = pk;
            pk = next;
            if (k + 1 < n) ss += pk * pk;
        }
        pn = pk;
        pn1 = pm;
        return ss;
    };
    for (int i = 0; i < n; ++i) {
        double x = q.x[static_cast<size_t>(i)], pn = 0, pn1 = 0;
        for (int it = 0; it < 3; ++it) {
            eval(x, pn, pn1);
            if (pn1 == 0) break;
            x -= pn / (std::sqrt(static_cast<double>(n)) * pn1);
        }
        q.x[static_cast<size_t>(i)] = x;
        q.w[static_cast<size_t>(i)] = 1 / eval(x, pn, pn1);
    }
    // Enforce exact symmetry.
    for (int i = 0; i < n / 2; ++i) {
        auto a = static_cast<size_t>(i), b = static_cast<size_t>(n - 1 - i);
        double x = 0.5 * (q.x[b] - q.x[a]), w = 0.5 * (q.w[a] + q.w[b]);
        q.x[a] = -x, q.x[b] = x, q.w[a] = q.w[b] = w;
    }
    if (n % 2 == 1) q.x[static_cast<size_t>(n / 2)] = 0;
    return q;
}

inline const QuadRule& gh200() {
    static const QuadRule rule = gauss_hermite_normal(200);
    return rule;
}

namespace detail {
inline constexpr std::array<double, 8> kXgk = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                                0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                                0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                                0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                                0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                                0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                                0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                               0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline void gk15(const std::function<double(double)>& f, double a, double b, double& val, double& err) {
    double c = (a + b) / 2, h = (b - a) / 2;
    double fc = f(c);
    double rk = fc * kWgk[7], rg = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        double dx = h * kXgk[static_cast<size_t>(j)];
        double s = f(c - dx) + f(c + dx);
        rk += kWgk[static_cast<size_t>(j)] * s;
        if (j % 2 == 1) rg += kWg[static_cast<size_t>(j / 2)] * s;
    }
    val = rk * h;
    err = std::abs((rk - rg) * h);
}

inline double adapt(const std::function<double(double)>& f, double a, double b, double whole, double err, double tol,
                    int depth) {
    if (err <= tol || err <= 1e-15 * std::abs(whole) || depth > 40 || b - a < 1e-14 * std::max(1.0, std::abs(a)))
        return whole;
    double m = (a + b) / 2, v1, e1, v2, e2;
    gk15(f, a, m, v1, e1);
    gk15(f, m, b, v2, e2);
    return adapt(f, a, m, v1, e1, tol / 2, depth + 1) + adapt(f, m, b, v2, e2, tol / 2, depth + 1);
}
}  // namespace detail

// Adaptive Gauss-Kronrod (7/15) with absolute tolerance tol.
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
    if (a == b) return 0.0;
    double v, e;
    detail::gk15(f, a, b, v, e);
    return detail::adapt(f, a, b, v, e, tol, 0);
}

// Integrate over [a,b] split at the given interior breakpoints.
inline double integrate_pieces(const std::function<double(double)>& f, double a, double b, std::vector<double> breaks,
                               double tol = 1e-12) {
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    double total = 0;
    std::size_t pieces = 0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        if (breaks[i] >= a && breaks[i + 1] <= b && breaks[i + 1] > breaks[i]) ++pieces;
    pieces = std::max<std::size_t>(pieces, 1);
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        double lo = breaks[i], hi = breaks[i + 1];
        if (lo < a || hi > b || hi <= lo) continue;
        total += integrate(f, lo, hi, tol / static_cast<double>(pieces));
    }
    return total;
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi); }

// E f(Z), Z ~ N(0,1), with f possibly non-smooth at the listed points.
inline double normal_expectation(const std::function<double(double)>& f, const std::vector<double>& kinks = {},
                                 double tol = 1e-13) {
    const double R = 14.0;
    auto g = [&](double z) { return f(z) * normal_pdf(z); };
    std::vector<double> br;
    for (double k : kinks)
        if (k > -R && k < R) br.push_back(k);
    br.push_back(0.0);
    return integrate_pieces(g, -R, R, br, tol);
}

}  // namespace tolerant
