// Acceptance runner: `acceptance k` checks criterion k, `acceptance` checks all of them.
// Each criterion prints one line "criterion k: PASS|FAIL  <details>".

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tolerant/cli.hpp"
#include "tolerant/experiments.hpp"
#include "tolerant/lower_bounds.hpp"
#include "tolerant/multinomial.hpp"
#include "tolerant/poly_approx.hpp"
#include "tolerant/reductions.hpp"
#include "tolerant/special.hpp"
#include "tolerant/statistics.hpp"

using namespace tolerant;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

std::string g6(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
    std::vector<const char*> argv = {"ttl"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    return code;
}

std::filesystem::path scratch_dir() {
    auto dir = std::filesystem::temp_directory_path() / ("tolerant_acceptance_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir;
}

TestSpec family(double p, Calibration cal, int mc_reps = 2000) {
    TestSpec s;
    s.hypothesis = {p, 0, 0, Direction::tolerant};
    s.statistic_kind = default_kind_for(p);
    s.calibration = cal;
    s.mc_reps = mc_reps;
    return s;
}

void c1(Outcome& o) {
    double prev_gap = INFINITY;
    for (int L : {16, 32, 64}) {
        const double v = L * best_poly_approx(1, L).error;
        const double gap = std::abs(v - kBernsteinBeta1);
        o.detail << "L=" << L << " L*A=" << g6(v) << " ";
        o.check(v >= 0.25 && v <= 0.32, "L*A_1(L) outside [0.25,0.32]");
        o.check(gap < prev_gap, "distance to beta_1 does not shrink");
        prev_gap = gap;
    }
}

void c2(Outcome& o) {
    double worst = 0;
    for (double p : {1.0, 1.5, 3.0})
        for (int L : {4, 8, 16}) worst = std::max(worst, std::abs(solve_Mp(p, L).value - 2 * best_poly_approx(p, L).error));
    o.detail << "max |M_p - 2A_p| = " << g6(worst);
    o.check(worst <= 1e-5, "duality gap > 1e-5");
}

void c3(Outcome& o) {
    const double m44 = solve_Mp(4, 4).value, m43 = solve_Mp(4, 3).value, g = g_even(4, 3);
    o.detail << "M4(4)=" << g6(m44) << " M4(3)=" << g6(m43) << " g=" << g;
    o.check(m44 <= 1e-9, "M4(4) > 1e-9");
    o.check(m43 >= g / (2 * std::exp(1.0)) && m43 <= 2 * g, "M4(3) outside [g/2e, 2g]");
    o.check(g == 0.625, "g(4,3) != 0.625");
}

void c4(Outcome& o) {
    for (double eps : {1.0 / 256, 1.0 / 128, 1.0 / 64}) {
        const double v = solve_Mp_constrained(1, eps, 32).value, floor = 0.1 * std::sqrt(eps / 32);
        o.detail << "eps=" << g6(eps) << " M=" << g6(v) << " floor=" << g6(floor) << " ";
        o.check(v >= floor, "M_1(eps,32) below floor");
    }
}

void c5(Outcome& o) {
    const long long d = 4096;
    const double alpha = 0.05, beta = 0.1, Ca = 1 - alpha - beta;
    LowerBoundCertificate cert;
    try {
        cert = assemble_certificate(free_tolerance_pair(d, 1, alpha, beta), d, 1, alpha, beta, 1);
    } catch (const std::exception& e) {
        o.check(false, std::string("assembly refused: ") + e.what());
        return;
    }
    const double indep = chi2_tensorize(chi2_recheck(cert.pair, cert.sigma), d);
    o.detail << "chi2_upper=" << g6(cert.chi2_upper) << " recheck=" << g6(indep) << " C_a^2=" << g6(Ca * Ca) << " ";
    o.check(indep <= Ca * Ca, "rechecked chi2 > C_alpha^2");
    o.check(recheck_certificate(cert).empty(), "in-memory recheck failed");

    const auto dir = scratch_dir();
    const json good = to_json(cert);
    auto write = [&](const json& j, const std::string& name) {
        auto path = (dir / name).string();
        std::ofstream(path) << j.dump(2);
        return path;
    };
    o.check(run_cli({"verify", write(good, "good.json")}) == 0, "verify rejects the genuine certificate");

    // Every field, one at a time.
    int tampered = 0, caught = 0;
    auto bump = [](json& v) {
        if (v.is_number()) v = v.get<double>() == 0 ? 1e-3 : v.get<double>() * 1.001;
        else if (v.is_string()) v = v.get<std::string>() + "x";
        else if (v.is_array() && !v.empty()) v[0] = v[0].get<double>() + 1e-3;
    };
    for (const auto& [key, val] : good.items()) {
        if (key == "digest") continue;
        std::vector<std::string> subkeys = {""};
        if (val.is_object()) {
            subkeys.clear();
            for (const auto& [k2, v2] : val.items()) subkeys.push_back(k2);
        }
        for (const auto& sk : subkeys) {
            json bad = good;
            bump(sk.empty() ? bad[key] : bad[key][sk]);
            ++tampered;
            caught += run_cli({"verify", write(bad, "bad.json")}) == 2;
        }
    }
    // A lowered chi2 bound with a recomputed digest is caught by the recheck itself.
    LowerBoundCertificate low = cert;
    low.chi2_upper *= 0.5;
    ++tampered;
    caught += run_cli({"verify", write(to_json(low), "low.json")}) == 2;
    json bad_digest = good;
    bad_digest["digest"] = std::string(64, '0');
    ++tampered;
    caught += run_cli({"verify", write(bad_digest, "digest.json")}) == 2;
    o.detail << "tampered=" << tampered << " exit2=" << caught;
    o.check(caught == tampered, "some tampered certificate did not exit 2");
    std::filesystem::remove_all(dir);
}

void c6(Outcome& o) {
    double worst = INFINITY;
    for (int t = 0; t < 20; ++t) {
        const int L = 2 + 2 * (t % 5);
        const double delta = 0.1 + 0.9 * (t + 1) / 20.0;
        auto pr = random_mixing_pair({2024, static_cast<std::uint64_t>(t)}, L, delta);
        const double b = chi2_one_dim_bound(pr, 1), q = chi2_quadrature(pr, 1);
        worst = std::min(worst, b - q);
    }
    o.detail << "min(bound - quadrature) = " << g6(worst);
    o.check(worst >= -1e-8, "bound below the quadrature oracle");
}

void c7(Outcome& o) {
    const int R = 10000;
    const double alpha = 0.05, tol = alpha + 3 * std::sqrt(alpha / R);
    int cells = 0;
    double worst = 0;
    std::string worst_cell;
    for (Calibration cal : {Calibration::cantelli_envelope, Calibration::chebyshev_envelope, Calibration::mc_worst_case})
        for (double p : {1.0, 2.0, 4.0})
            for (int d : {16, 256})
                for (double eps0 : {0.0, std::sqrt(static_cast<double>(d))}) {
                    auto s = family(p, cal, 40000);
                    s.hypothesis.eps0 = s.hypothesis.eps1 = eps0;
                    const RandomStream rng{7000 + static_cast<std::uint64_t>(cells), 0};
                    auto decide = make_decider(s, d, 1, rng.child(1));
                    auto cands = extremal_null_candidates(p, eps0, d);
                    for (std::size_t c = 0; c < cands.size(); ++c) {
                        const double rate = rejection_rate(decide, cands[c], 1, R, rng.child(2 + c));
                        if (rate > worst) {
                            worst = rate;
                            worst_cell = to_string(cal) + " p=" + g6(p) + " d=" + std::to_string(d) + " eps0=" + g6(eps0);
                        }
                        if (rate > tol) o.check(false, "type-I " + g6(rate) + " at " + worst_cell);
                    }
                    ++cells;
                }
    o.detail << cells << " cells, worst type-I " << g6(worst) << " (" << worst_cell << "), bound " << g6(tol);
}

void c8(Outcome& o) {
    const Vec ds = {64, 256, 1024};
    for (double p : {1.0, 2.0}) {
        Vec seps;
        for (double d : ds) {
            auto cs = bisect_critical_separation(family(p, Calibration::mc_worst_case), 0, static_cast<int>(d), 1, 0.1,
                                                 2000, {800 + static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(p)});
            seps.push_back(cs.value);
            o.check(cs.monotone, "non-monotone power trace");
        }
        const double slope = loglog_fit(ds, seps).slope, target = p == 1 ? 0.75 : 0.25;
        o.detail << "p=" << p << " seps=" << g6(seps[0]) << "," << g6(seps[1]) << "," << g6(seps[2]) << " slope=" << g6(slope)
                 << " ";
        o.check(std::abs(slope - target) <= 0.10, "slope outside band for p=" + g6(p));
    }
}

void c9(Outcome& o) {
    const int d = 1024;
    // 8 sqrt(d) and d/4 coincide at d = 1024, so three distinct radii remain.
    const Vec eps0s = {64, 128, 256};
    Vec seps;
    for (std::size_t i = 0; i < eps0s.size(); ++i) {
        auto cs = bisect_critical_separation(family(1, Calibration::mc_worst_case), eps0s[i], d, 1, 0.1, 2000, {900, i});
        seps.push_back(cs.value);
        o.check(cs.monotone, "non-monotone power trace");
    }
    const double slope = loglog_fit(eps0s, seps).slope;
    o.detail << "seps=" << g6(seps[0]) << "," << g6(seps[1]) << "," << g6(seps[2]) << " slope=" << g6(slope);
    o.check(std::abs(slope - 0.5) <= 0.15, "slope outside 0.5 +- 0.15");
}

void c10(Outcome& o) {
    auto rep = chi2_suboptimality_demo(4096, 1, 0.05, 0.1, 1000, {1010, 0}, {4, 8, 16}, 4, 2000);
    bool witnessed = false;
    for (const auto& r : rep.rows) {
        o.detail << "c=" << r.c << " chi2_mc=" << g6(r.chi2_power_mc) << " chi2_env=" << g6(r.chi2_power_envelope)
                 << " plug=" << g6(r.plugin_power) << " ";
        if (r.c > 0 && r.plugin_power >= 0.9 && r.chi2_power_mc <= 0.2 && r.chi2_power_envelope <= 0.2) witnessed = true;
    }
    o.check(witnessed, "no swept c separates chi2 from the plug-in test");
}

void c11(Outcome& o) {
    const int d = 8, R = 2000;
    const std::int64_t n = 2000;
    const Vec G(static_cast<size_t>(d), 1.0 / d);
    Vec F = G;
    F[0] += 0.05;
    F[1] -= 0.05;
    MultinomialTest base(G, 1, 0, 0.05, MultinomialCalibration::mc_simple_null, 1000, {1100, 0});
    PoissonTest ptest{base};
    auto se2 = [&](double a, double b) { return std::sqrt(a * (1 - a) / R + b * (1 - b) / R); };

    // Poissonisation: Poisson test (intensity n/2) on genuine Poisson data vs the wrapper on multinomial data.
    for (int alt = 0; alt < 2; ++alt) {
        const Vec& truth = alt ? F : G;
        int rej_p = 0, rej_w = 0;
        for (int r = 0; r < R; ++r) {
            auto e1 = RandomStream{1101, static_cast<std::uint64_t>(alt)}.child(r).engine();
            rej_p += ptest.rejects(sample_poisson_counts(n / 2.0, truth, e1));
            auto e2 = RandomStream{1102, static_cast<std::uint64_t>(alt)}.child(r).engine();
            Counts c = sample_multinomial_counts(n, truth, e2);
            rej_w += poissonize_multinomial_test([&](const Counts& x) { return ptest.decide(x); }, c,
                                                 RandomStream{1103, static_cast<std::uint64_t>(alt)}.child(r))
                         .decision.reject;
        }
        const double a = static_cast<double>(rej_p) / R, b = static_cast<double>(rej_w) / R, se = se2(a, b);
        if (alt == 0) {
            o.detail << "poissonize type-I inner=" << g6(a) << " wrapper=" << g6(b) << " ";
            o.check(std::abs(a - b) <= 3 * se, "poissonized type-I differs");
        } else {
            o.detail << "type-II inner=" << g6(1 - a) << " wrapper=" << g6(1 - b) << " ";
            o.check((1 - b) - (1 - a) <= std::exp(-n / 8.0) + 3 * se, "poissonized type-II inflated");
        }
    }
    // De-Poissonisation: multinomial family psi_K on Poisson(n) data vs psi_{n/2} on multinomial data
    // (the least powerful member inside the window n/2 <= K <= 3n/2).
    for (int alt = 0; alt < 2; ++alt) {
        const Vec& truth = alt ? F : G;
        int rej_m = 0, rej_w = 0;
        for (int r = 0; r < R; ++r) {
            auto e1 = RandomStream{1111, static_cast<std::uint64_t>(alt)}.child(r).engine();
            rej_m += base.rejects(sample_multinomial_counts(alt ? n / 2 : n, truth, e1));
            auto e2 = RandomStream{1112, static_cast<std::uint64_t>(alt)}.child(r).engine();
            rej_w += depoissonize_poisson_test([&](const Counts& x) { return base.decide(x); },
                                               sample_poisson_counts(static_cast<double>(n), truth, e2), static_cast<double>(n))
                         .decision.reject;
        }
        const double a = static_cast<double>(rej_m) / R, b = static_cast<double>(rej_w) / R, se = se2(a, b);
        if (alt == 0) {
            o.detail << "depoissonize type-I inner=" << g6(a) << " wrapper=" << g6(b) << " ";
            o.check(std::abs(a - b) <= 3 * se, "de-poissonized type-I differs");
        } else {
            o.detail << "type-II inner(n/2)=" << g6(1 - a) << " wrapper=" << g6(1 - b);
            o.check((1 - b) - (1 - a) <= 2 * std::exp(-n / 12.0) + 3 * se, "de-poissonized type-II inflated");
        }
    }
}

void c12(Outcome& o) {
    const int d = 16, R = 1000;
    const std::int64_t n = 2000;
    const Vec ref(static_cast<size_t>(d), 1.0 / d);
    Vec F = ref;
    for (int i = 0; i < d / 2; ++i) F[static_cast<size_t>(i)] += 0.1 / (d / 2), F[static_cast<size_t>(i + d / 2)] -= 0.1 / (d / 2);
    double D = 0;
    for (int i = 0; i < d; ++i) D += std::abs(F[static_cast<size_t>(i)] - ref[static_cast<size_t>(i)]) / 2;
    int over = 0;
    for (int r = 0; r < R; ++r) {
        auto eng = RandomStream{1200, 0}.child(r).engine();
        over += physics_demo(sample_multinomial_counts(n, F, eng), ref, 0.02, 0.05).tolerance.value > D;
    }
    const double rate = static_cast<double>(over) / R, se = std::sqrt(0.05 * 0.95 / R);
    o.detail << "V(F,B)=" << g6(D) << " P(eps_* > V)=" << g6(rate) << " bound=" << g6(0.05 + 3 * se);
    o.check(rate <= 0.05 + 3 * se, "coverage violated");
}

void c13(Outcome& o) {
    // Hermite orthogonality under 200-node Gauss-Hermite quadrature.
    const auto& q = gh200();
    double worst = 0, fact[11] = {1};
    for (int j = 1; j <= 10; ++j) fact[j] = fact[j - 1] * j;
    for (int j = 0; j <= 10; ++j)
        for (int k = 0; k <= 10; ++k) {
            double s = 0;
            for (std::size_t i = 0; i < q.x.size(); ++i) s += q.w[i] * hermite(j, q.x[i]) * hermite(k, q.x[i]);
            worst = std::max(worst, std::abs(s - (j == k ? fact[j] : 0.0)));
        }
    o.detail << "orth=" << g6(worst) << " ";
    o.check(worst <= 1e-8, "Hermite orthogonality");

    double unb = 0;
    for (double p : {2.0, 4.0, 6.0})
        for (double v : {0.0, 0.3, 1.7}) {
            double s = 0;
            for (std::size_t i = 0; i < q.x.size(); ++i) s += q.w[i] * debiased_statistic({v + q.x[i]}, p, 1);
            unb = std::max(unb, std::abs(s - std::pow(v, p)));
        }
    o.detail << "unbiased=" << g6(unb) << " ";
    o.check(unb <= 1e-8, "even-p unbiasedness");

    // Tensorisation: two-point pair has chi2 = cosh(delta^2) - 1 per coordinate and (cosh delta^2)^d - 1 jointly.
    double tens = 0;
    for (double delta : {0.05, 0.2, 0.5})
        for (long long d : {1LL, 16LL, 1024LL}) {
            const long double c1 = 2 * std::pow(std::sinh(static_cast<long double>(delta * delta) / 2), 2);
            const double exact = static_cast<double>(std::expm1(static_cast<long double>(d) * std::log1p(c1)));
            const double got = chi2_tensorize(chi2_one_dim_bound(two_point_pair(delta, 1), 1), d);
            tens = std::max(tens, std::abs(got - exact) / std::max(exact, 1e-300));
        }
    o.detail << "tensorize_rel=" << g6(tens) << " ";
    o.check(tens <= 1e-10, "tensorisation identity");

    // Norm bookkeeping for piecewise-constant f.
    const int d = 8;
    const Vec c = {0.5, -1.0, 2.0, 0.0, 3.0, -0.25, 1.0, 0.75};
    auto path = simulate_white_noise([&](double t) { return c[static_cast<size_t>(std::min(d - 1, static_cast<int>(t * d)))]; },
                                     0.0, 64 * d, {});
    auto v = bin_white_noise(path, d).x;
    double book = 0;
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
        double fp = 0;
        for (double ci : c) fp += std::pow(std::abs(ci), p) / d;
        book = std::max(book, std::abs(norm_lp(v, p) * std::pow(static_cast<double>(d), 0.5 - 1 / p) - std::pow(fp, 1 / p)));
    }
    o.detail << "bookkeeping=" << g6(book) << " ";
    o.check(book <= 1e-12, "norm bookkeeping");

    // Byte-identical CSV for identical invocations.
    std::string a, b;
    const std::vector<std::string> args = {"--seed", "13", "regime-map", "--p", "2", "--d", "16", "--eps0-grid", "0", "2",
                                           "--n-reps", "200"};
    run_cli(args, &a);
    run_cli(args, &b);
    o.detail << "csv_bytes=" << a.size();
    o.check(!a.empty() && a == b, "CSV output differs between identical runs");
}

const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> kCriteria = {
    {"Bernstein constant", c1},      {"duality", c2},           {"even-p moment matching", c3},
    {"constrained problem", c4},     {"certificate pipeline", c5}, {"chi2 bound vs oracle", c6},
    {"validity suite", c7},          {"free-tolerance slopes", c8}, {"interpolation slope", c9},
    {"chi2 suboptimality", c10},     {"Poissonization", c11},   {"tolerance-factor coverage", c12},
    {"unit/property anchors", c13},
};

bool run_one(int k) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        kCriteria[static_cast<size_t>(k - 1)].second(o);
    } catch (const std::exception& e) {
        o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << k << ": " << (o.pass ? "PASS" : "FAIL") << "  " << kCriteria[static_cast<size_t>(k - 1)].first
              << " (" << g6(secs) << " s)  " << o.detail.str() << std::endl;
    return o.pass;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
    if (which.empty())
        for (int k = 1; k <= static_cast<int>(kCriteria.size()); ++k) which.push_back(k);
    bool all = true;
    for (int k : which) {
        if (k < 1 || k > static_cast<int>(kCriteria.size())) {
            std::cerr << "unknown criterion " << k << "\n";
            return 2;
        }
        all = run_one(k) && all;
    }
    return all ? 0 : 1;
}
