#include <gtest/gtest.h>

#include <cmath>

#include "tolerant/lower_bounds.hpp"
#include "tolerant/poly_approx.hpp"

using namespace tolerant;

TEST(SolveMp, EvenPVanishesForLAtLeastP) {
    for (int p : {2, 4, 6})
        for (int L : {p, p + 2}) EXPECT_LE(solve_Mp(p, L).value, 1e-9) << p << " " << L;
}

TEST(SolveMp, P4L3InBracket) {
    const double g = g_even(4, 3);
    EXPECT_DOUBLE_EQ(g, 0.625);
    const double v = solve_Mp(4, 3).value;
    EXPECT_GE(v, g / (2 * std::exp(1.0)));
    EXPECT_LE(v, 2 * g);
}

TEST(SolveMp, PairIsFeasibleAndAttainsValue) {
    auto r = solve_Mp(1.5, 8);
    EXPECT_NO_THROW(validate_pair(r.pair));
    EXPECT_LE(moment_gap(r.pair, 8), 1e-9);
    const double attained = abs_moment(r.pair, r.pair.w1, 1.5) - abs_moment(r.pair, r.pair.w0, 1.5);
    EXPECT_NEAR(attained, r.value, 1e-9);
}

TEST(SolveMp, Duality) {
    for (double p : {1.0, 1.5, 3.0})
        for (int L : {4, 8, 16}) {
            const double m = solve_Mp(p, L).value, a = best_poly_approx(p, L).error;
            EXPECT_NEAR(m, 2 * a, 1e-5) << p << " " << L;
        }
}

TEST(SolveMp, OddDecay) {
    double prev = 0;
    for (int L : {8, 16, 32}) {
        const double s = L * solve_Mp(1, L).value;
        if (prev > 0) {
            EXPECT_GE(s / prev, 0.7);
            EXPECT_LE(s / prev, 1.3);
        }
        prev = s;
    }
}

TEST(SolveMpConstrained, Examples) {
    const double m = solve_Mp(1, 8).value;
    EXPECT_GE(solve_Mp_constrained(1, 0.999999, 8).value, m - 1e-9);
    auto r0 = solve_Mp_constrained(1, 0.0, 32);
    EXPECT_GE(r0.value, 0);
    EXPECT_LE(abs_moment(r0.pair, r0.pair.w0, 1), 1e-9);
    EXPECT_EQ(r0.value, 0);
    auto r1 = solve_Mp_constrained(1, 0.0, 1);
    EXPECT_EQ(r1.value, 1);
    EXPECT_NO_THROW(validate_pair(r1.pair));
    const double eps = 1.0 / 128;
    EXPECT_GE(solve_Mp_constrained(1, eps, 32).value, 0.1 * std::sqrt(eps / 32));
    EXPECT_THROW(solve_Mp_constrained(1, 1.5, 8), ValidationError);
}

TEST(BestPolyApprox, Examples) {
    EXPECT_LE(best_poly_approx(2, 2).error, 1e-12);
    EXPECT_NEAR(best_poly_approx(1, 1).error, 0.5, 1e-9);  // best degree-1 fit to |x| is the constant 1/2
    auto r = best_poly_approx(1, 64);
    EXPECT_GE(64 * r.error, 0.25);
    EXPECT_LE(64 * r.error, 0.32);
    EXPECT_NEAR(r.error, r.claimed_error, 1e-9);
}

TEST(BestPolyApprox, VerifiedErrorOnFineGrid) {
    auto r = best_poly_approx(1.5, 10);
    double worst = 0;
    for (int i = 0; i <= 100000; ++i) {
        double x = i / 100000.0;
        worst = std::max(worst, std::abs(std::pow(x, 1.5) - even_cheb_eval(r.coefficients, x)));
    }
    EXPECT_LE(worst, r.error * (1 + 1e-9) + 1e-15);
    EXPECT_GE(r.alternations, 10 / 2 + 2);
}

TEST(Chi2, IdenticalPairAndZeroDelta) {
    MixingPair pr = two_point_pair(0.5, 1);
    pr.w0 = pr.w1;
    EXPECT_EQ(chi2_one_dim_bound(pr, 1), 0);
    EXPECT_EQ(chi2_one_dim_bound(two_point_pair(1, 1), 1) > 0, true);
    MixingPair z;
    z.support = {0.0};
    z.w0 = z.w1 = {1.0};
    z.delta = 1;
    EXPECT_EQ(chi2_one_dim_bound(z, 1), 0);
}

TEST(Chi2, TwoPointCoshBound) {
    for (double delta : {0.1, 0.5, 1.0, 2.0}) {
        const double b = chi2_one_dim_bound(two_point_pair(delta, 1), 1);
        const double exact = std::cosh(delta * delta) - 1;
        EXPECT_NEAR(b, exact, 1e-10 * std::max(1.0, exact));
        EXPECT_LE(exact, std::exp(std::pow(delta, 4) / 2) - 1);
    }
}

TEST(Chi2, RefusesLargeDelta) { EXPECT_THROW(chi2_one_dim_bound(two_point_pair(8, 1), 1), ValidationError); }

TEST(Chi2, Tensorize) {
    EXPECT_EQ(chi2_tensorize(0, 1000), 0);
    EXPECT_DOUBLE_EQ(chi2_tensorize(0.37, 1), 0.37);
    EXPECT_NEAR(chi2_tensorize(1e-6, 1000000), std::exp(1.0) - 1, 1e-4 * (std::exp(1.0) - 1));
    EXPECT_TRUE(std::isinf(chi2_tensorize(1, 5000)));
}

TEST(Chi2, BoundsQuadratureOracle) {
    for (int t = 0; t < 20; ++t) {
        RandomStream rng{77, static_cast<std::uint64_t>(t)};
        const int L = 2 + 2 * (t % 4);
        const double delta = 0.2 + 0.04 * t;  // delta / sigma <= 1
        auto pr = random_mixing_pair(rng, L, delta);
        ASSERT_NO_THROW(validate_pair(pr));
        const double one = chi2_one_dim_bound(pr, 1), q = chi2_quadrature(pr, 1);
        EXPECT_GE(one, q - 1e-8) << t;
        // Tensorised bound dominates the product-measure identity in d = 1..3.
        for (int d = 1; d <= 3; ++d) EXPECT_GE(chi2_tensorize(one, d), std::pow(1 + q, d) - 1 - 1e-8);
    }
}

TEST(Chi2, RecheckAgrees) {
    auto pr = random_mixing_pair({5, 1}, 6, 0.8);
    EXPECT_NEAR(chi2_recheck(pr, 1), chi2_one_dim_bound(pr, 1), 1e-10);
}

TEST(FeasibleDelta, MonotoneAndScaleEquivariant) {
    double prev = 0;
    for (double t : {0.01, 0.04, 0.1, 0.3}) {
        double d = feasible_delta(8, 4096, 1, t);
        EXPECT_GE(d, prev);
        prev = d;
    }
    const double a = feasible_delta(8, 4096, 1, 0.04), b = feasible_delta(8, 4096, 3, 0.04);
    EXPECT_NEAR(b, 3 * a, 1e-10 * b);
}

TEST(FeasibleDelta, CertifiedAndOrderOfPrediction) {
    const int L = 12;
    const long long d = 4096;
    const double delta = feasible_delta(L, d, 1, 0.04);
    EXPECT_LE(worst_case_chi2(L, d, delta), 0.04);
    EXPECT_GE(delta * delta, 0.5 * L / std::pow(static_cast<double>(d), 1.0 / (L + 1)) * 0.1);
}

TEST(Certificate, RefusesIdenticalPair) {
    MixingPair pr = two_point_pair(0.1, 1);
    pr.w1 = pr.w0;
    try {
        assemble_certificate(pr, 100, 1, 0.05, 0.1, 1);
        FAIL() << "expected refusal";
    } catch (const CertificateError& e) {
        EXPECT_NE(std::string(e.what()).find("mean-gap"), std::string::npos);
    }
}

TEST(Certificate, RefusesLargeChi2) {
    EXPECT_THROW(assemble_certificate(two_point_pair(1.0, 1), 1000, 1, 0.05, 0.1, 1), CertificateError);
}

TEST(Certificate, FreeTolerancePairAccepted) {
    for (long long d : {64LL, 1024LL, 65536LL}) {
        auto cert = assemble_certificate(free_tolerance_pair(d, 1, 0.05, 0.1), d, 1, 0.05, 0.1, 1);
        EXPECT_EQ(cert.route, "exact_support");
        EXPECT_LE(cert.chi2_upper, 0.85 * 0.85);
        EXPECT_EQ(cert.eps0, 0);
        EXPECT_NEAR(cert.eps1, std::pow(2 * std::log1p(0.85 * 0.85), 0.25) * std::pow(static_cast<double>(d), 0.75),
                    1e-9 * cert.eps1);
        EXPECT_EQ(recheck_certificate(cert), "");
    }
}

TEST(Certificate, MomentPipelineP1) {
    const long long d = 4096;
    const int L = 12;
    const double Ca = 0.85;
    auto r = solve_Mp(1, L);
    const double delta = feasible_delta(L, d, 1, 0.99 * (Ca / 2) * (Ca / 2));
    auto cert = assemble_certificate(r.pair, d, 1, 0.05, 0.1, 1, delta);
    EXPECT_EQ(cert.route, "fuzzy");
    EXPECT_GE(cert.eps1 / cert.eps0, 1.05);
    EXPECT_EQ(recheck_certificate(cert), "");
}

TEST(Certificate, RecheckCatchesTampering) {
    auto cert = assemble_certificate(free_tolerance_pair(1024, 1, 0.05, 0.1), 1024, 1, 0.05, 0.1, 1);
    auto bad = cert;
    bad.chi2_upper *= 0.5;
    EXPECT_NE(recheck_certificate(bad), "");
    bad = cert;
    bad.eps1 *= 1.1;
    EXPECT_NE(recheck_certificate(bad), "");
    bad = cert;
    bad.pair.w1[0] += 0.01;
    EXPECT_NE(recheck_certificate(bad), "");
}

TEST(MixingPair, Validation) {
    auto pr = two_point_pair(1, 1);
    pr.w0[1] = 0.9;
    EXPECT_THROW(validate_pair(pr), ValidationError);
    pr = two_point_pair(1, 1);
    pr.support[0] = -2;
    EXPECT_THROW(validate_pair(pr), ValidationError);
    pr = two_point_pair(1, 1);
    pr.w1 = {0.2, 0.0, 0.8};
    EXPECT_THROW(validate_pair(pr), ValidationError);  // not centred
    pr = two_point_pair(1, 1);
    pr.L = 2;
    EXPECT_THROW(validate_pair(pr), ValidationError);  // second moments differ
}
