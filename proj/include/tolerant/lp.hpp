#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "errors.hpp"

namespace tolerant {

// Dense revised simplex for   max c^T x  s.t.  A x = b, x >= 0.
// Intended for few rows (< 100) and a few thousand columns.
struct LinearProgram {
    int m = 0;
    std::vector<std::vector<double>> cols;  // each column has m entries
    std::vector<double> c;
    std::vector<double> b;

    int add_column(std::vector<double> a, double cost) {
        require(static_cast<int>(a.size()) == m, "LinearProgram: column has wrong length");
        cols.push_back(std::move(a));
        c.push_back(cost);
        return static_cast<int>(cols.size()) - 1;
    }
};

struct LPResult {
    bool optimal = false;
    double objective = 0;
    std::vector<double> x;  // primal values per column
    std::vector<double> y;  // row duals: reduced cost of column j is c_j - y^T A_j
    int iterations = 0;
};

namespace lpdetail {

using LD = long double;

inline bool invert(std::vector<std::vector<LD>> M, std::vector<std::vector<LD>>& inv) {
    const int n = static_cast<int>(M.size());
    inv.assign(static_cast<size_t>(n), std::vector<LD>(static_cast<size_t>(n), 0));
    for (int i = 0; i < n; ++i) inv[static_cast<size_t>(i)][static_cast<size_t>(i)] = 1;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(M[static_cast<size_t>(r)][static_cast<size_t>(col)]) >
                std::abs(M[static_cast<size_t>(piv)][static_cast<size_t>(col)]))
                piv = r;
        if (std::abs(M[static_cast<size_t>(piv)][static_cast<size_t>(col)]) < 1e-300L) return false;
        std::swap(M[static_cast<size_t>(piv)], M[static_cast<size_t>(col)]);
        std::swap(inv[static_cast<size_t>(piv)], inv[static_cast<size_t>(col)]);
        LD d = M[static_cast<size_t>(col)][static_cast<size_t>(col)];
        for (int j = 0; j < n; ++j) {
            M[static_cast<size_t>(col)][static_cast<size_t>(j)] /= d;
            inv[static_cast<size_t>(col)][static_cast<size_t>(j)] /= d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            LD f = M[static_cast<size_t>(r)][static_cast<size_t>(col)];
            if (f == 0) continue;
            for (int j = 0; j < n; ++j) {
                M[static_cast<size_t>(r)][static_cast<size_t>(j)] -= f * M[static_cast<size_t>(col)][static_cast<size_t>(j)];
                inv[static_cast<size_t>(r)][static_cast<size_t>(j)] -= f * inv[static_cast<size_t>(col)][static_cast<size_t>(j)];
            }
        }
    }
    return true;
}

}  // namespace lpdetail

inline LPResult solve_lp(const LinearProgram& lp, int max_iter = 200000, double opt_tol = 1e-12) {
    using lpdetail::LD;
    const int m = lp.m;
    const int n = static_cast<int>(lp.cols.size());
    require(static_cast<int>(lp.b.size()) == m, "solve_lp: b has wrong length");
    // Row signs so that b >= 0; artificial j = n + i for row i.
    std::vector<LD> sign(static_cast<size_t>(m), 1);
    std::vector<LD> b(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        if (lp.b[static_cast<size_t>(i)] < 0) sign[static_cast<size_t>(i)] = -1;
        b[static_cast<size_t>(i)] = sign[static_cast<size_t>(i)] * lp.b[static_cast<size_t>(i)];
    }
    const int N = n + m;
    auto entry = [&](int j, int i) -> LD {
        if (j >= n) return (j - n == i) ? 1.0L : 0.0L;
        return sign[static_cast<size_t>(i)] * lp.cols[static_cast<size_t>(j)][static_cast<size_t>(i)];
    };
    std::vector<int> basis(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) basis[static_cast<size_t>(i)] = n + i;
    std::vector<std::vector<LD>> Binv;
    std::vector<LD> xB(b);
    std::vector<char> in_basis(static_cast<size_t>(N), 0);
    for (int i = 0; i < m; ++i) in_basis[static_cast<size_t>(n + i)] = 1;
    std::vector<char> blocked(static_cast<size_t>(N), 0);  // artificials after phase I

    auto refactor = [&]() {
        std::vector<std::vector<LD>> B(static_cast<size_t>(m), std::vector<LD>(static_cast<size_t>(m)));
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < m; ++k) B[static_cast<size_t>(i)][static_cast<size_t>(k)] = entry(basis[static_cast<size_t>(k)], i);
        if (!lpdetail::invert(B, Binv)) throw ConvergenceError("solve_lp: singular basis");
        for (int i = 0; i < m; ++i) {
            LD s = 0;
            for (int k = 0; k < m; ++k) s += Binv[static_cast<size_t>(i)][static_cast<size_t>(k)] * b[static_cast<size_t>(k)];
            xB[static_cast<size_t>(i)] = s;
        }
    };
    refactor();

    LPResult res;
    int iter = 0;
    std::vector<LD> y(static_cast<size_t>(m)), col(static_cast<size_t>(m));

    auto run_phase = [&](const std::vector<LD>& cost) {
        int since_refactor = 0, degenerate_run = 0;
        for (;;) {
            if (++iter > max_iter) throw ConvergenceError("solve_lp: iteration limit reached");
            if (since_refactor >= 40) {
                refactor();
                since_refactor = 0;
            }
            for (int k = 0; k < m; ++k) {
                LD s = 0;
                for (int i = 0; i < m; ++i)
                    s += cost[static_cast<size_t>(basis[static_cast<size_t>(i)])] * Binv[static_cast<size_t>(i)][static_cast<size_t>(k)];
                y[static_cast<size_t>(k)] = s;
            }
            // Pricing: Dantzig normally, Bland after a run of degenerate pivots.
            const bool bland = degenerate_run > 50;
            int enter = -1;
            LD best = opt_tol;
            for (int j = 0; j < N; ++j) {
                if (in_basis[static_cast<size_t>(j)] || blocked[static_cast<size_t>(j)]) continue;
                LD rc = cost[static_cast<size_t>(j)];
                if (j >= n) rc -= y[static_cast<size_t>(j - n)];
                else
                    for (int i = 0; i < m; ++i) rc -= y[static_cast<size_t>(i)] * entry(j, i);
                if (rc > best) {
                    best = rc;
                    enter = j;
                    if (bland) break;
                }
            }
            if (enter < 0) return;
            for (int i = 0; i < m; ++i) {
                LD s = 0;
                for (int k = 0; k < m; ++k) s += Binv[static_cast<size_t>(i)][static_cast<size_t>(k)] * entry(enter, k);
                col[static_cast<size_t>(i)] = s;
            }
            int leave = -1;
            LD ratio = std::numeric_limits<LD>::infinity();
            for (int i = 0; i < m; ++i) {
                if (col[static_cast<size_t>(i)] > 1e-11L) {
                    LD r = std::max<LD>(xB[static_cast<size_t>(i)], 0) / col[static_cast<size_t>(i)];
                    if (r < ratio - 1e-15L ||
                        (r <= ratio + 1e-15L && leave >= 0 &&
                         (bland ? basis[static_cast<size_t>(i)] < basis[static_cast<size_t>(leave)]
                                : col[static_cast<size_t>(i)] > col[static_cast<size_t>(leave)]))) {
                        ratio = r;
                        leave = i;
                    }
                }
            }
            if (leave < 0) throw ConvergenceError("solve_lp: unbounded problem");
            degenerate_run = ratio < 1e-14L ? degenerate_run + 1 : 0;
            LD pv = col[static_cast<size_t>(leave)];
            for (int k = 0; k < m; ++k) Binv[static_cast<size_t>(leave)][static_cast<size_t>(k)] /= pv;
            xB[static_cast<size_t>(leave)] /= pv;
            for (int i = 0; i < m; ++i) {
                if (i == leave) continue;
                LD f = col[static_cast<size_t>(i)];
                if (f == 0) continue;
                for (int k = 0; k < m; ++k)
                    Binv[static_cast<size_t>(i)][static_cast<size_t>(k)] -= f * Binv[static_cast<size_t>(leave)][static_cast<size_t>(k)];
                xB[static_cast<size_t>(i)] -= f * xB[static_cast<size_t>(leave)];
            }
            in_basis[static_cast<size_t>(basis[static_cast<size_t>(leave)])] = 0;
            basis[static_cast<size_t>(leave)] = enter;
            in_basis[static_cast<size_t>(enter)] = 1;
            ++since_refactor;
        }
    };

    // Phase I: maximise minus the sum of artificials.
    std::vector<LD> cost1(static_cast<size_t>(N), 0);
    for (int i = 0; i < m; ++i) cost1[static_cast<size_t>(n + i)] = -1;
    run_phase(cost1);
    refactor();
    LD infeas = 0;
    for (int i = 0; i < m; ++i)
        if (basis[static_cast<size_t>(i)] >= n) infeas += std::max<LD>(xB[static_cast<size_t>(i)], 0);
    if (infeas > 1e-9L) throw ConvergenceError("solve_lp: infeasible problem");
    // Drive zero-valued artificials out of the basis where possible.
    for (int i = 0; i < m; ++i) {
        if (basis[static_cast<size_t>(i)] < n) continue;
        int best_j = -1;
        LD best_v = 1e-9L;
        for (int j = 0; j < n; ++j) {
            if (in_basis[static_cast<size_t>(j)]) continue;
            LD s = 0;
            for (int k = 0; k < m; ++k) s += Binv[static_cast<size_t>(i)][static_cast<size_t>(k)] * entry(j, k);
            if (std::abs(s) > best_v) {
                best_v = std::abs(s);
                best_j = j;
            }
        }
        if (best_j >= 0) {
            in_basis[static_cast<size_t>(basis[static_cast<size_t>(i)])] = 0;
            basis[static_cast<size_t>(i)] = best_j;
            in_basis[static_cast<size_t>(best_j)] = 1;
            refactor();
        }
    }
    for (int i = 0; i < m; ++i) blocked[static_cast<size_t>(n + i)] = 1;
    std::vector<LD> cost2(static_cast<size_t>(N), 0);
    for (int j = 0; j < n; ++j) cost2[static_cast<size_t>(j)] = lp.c[static_cast<size_t>(j)];
    run_phase(cost2);
    refactor();
    // Final duals and solution.
    for (int k = 0; k < m; ++k) {
        LD s = 0;
        for (int i = 0; i < m; ++i)
            s += cost2[static_cast<size_t>(basis[static_cast<size_t>(i)])] * Binv[static_cast<size_t>(i)][static_cast<size_t>(k)];
        y[static_cast<size_t>(k)] = s;
    }
    res.x.assign(static_cast<size_t>(n), 0.0);
    LD obj = 0;
    for (int i = 0; i < m; ++i) {
        int j = basis[static_cast<size_t>(i)];
        if (j < n) {
            res.x[static_cast<size_t>(j)] = static_cast<double>(std::max<LD>(xB[static_cast<size_t>(i)], 0));
            obj += lp.c[static_cast<size_t>(j)] * xB[static_cast<size_t>(i)];
        }
    }
    res.y.resize(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) res.y[static_cast<size_t>(i)] = static_cast<double>(sign[static_cast<size_t>(i)] * y[static_cast<size_t>(i)]);
    res.objective = static_cast<double>(obj);
    res.optimal = true;
    res.iterations = iter;
    return res;
}

}  // namespace tolerant
