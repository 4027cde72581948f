#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "tolerant/calibration.hpp"
#include "tolerant/experiments.hpp"

using namespace tolerant;

static TestSpec spec_for(double p, double eps0, double eps1, Calibration cal, double alpha = 0.05) {
    TestSpec s;
    s.hypothesis = {p, eps0, eps1, Direction::tolerant};
    s.statistic_kind = default_kind_for(p);
    s.alpha = alpha;
    s.beta = 0.1;
    s.calibration = cal;
    s.mc_reps = 2000;
    return s;
}

TEST(Cantelli, Examples) {
    EXPECT_NEAR(cantelli_quantile_bound(0, 1, 0.05), std::sqrt(19.0), 1e-12);
    EXPECT_NEAR(cantelli_quantile_bound(0, 1, 0.05), 4.3589, 1e-4);
    EXPECT_EQ(cantelli_quantile_bound(5, 0, 0.3), 5);
    EXPECT_NEAR(cantelli_quantile_bound(0, 4, 0.5), 2, 1e-14);
    EXPECT_THROW(cantelli_quantile_bound(0, 1, 1.0), ValidationError);
    EXPECT_THROW(cantelli_quantile_bound(0, -1, 0.5), ValidationError);
}

TEST(Chebyshev, Examples) {
    EXPECT_NEAR(chebyshev_threshold({2, 0, 0}, 2, 1, 10, 0.05), 20, 1e-12);
    EXPECT_NEAR(chebyshev_threshold({1, 0, 0}, 1, 1, 100, 0.04), 50, 1e-12);
    const double near1 = chebyshev_threshold({2, 3, 3}, 2, 1, 10, 1 - 1e-12);
    EXPECT_NEAR(near1, envelope(2, 1, 10, 3).mean_upper + std::sqrt(envelope(2, 1, 10, 3).var_upper), 1e-6);
}

TEST(Chebyshev, MonotoneInEps0) {
    for (double p : {1.0, 1.5, 2.0, 3.0, 4.0}) {
        double prev = -INFINITY;
        for (int i = 0; i < 16; ++i) {
            double t = chebyshev_threshold({p, 0.5 * i, 0.5 * i}, p, 1, 32, 0.05);
            EXPECT_GE(t, prev);
            prev = t;
        }
    }
}

TEST(MCWorstCase, SimpleNullSingleCandidate) {
    auto s = spec_for(1, 0, 0, Calibration::mc_worst_case);
    EXPECT_EQ(resolve_null_candidates(s, 16).size(), 1u);
    const double t = mc_worst_case_threshold(s, 16, 1, {9, 0});
    GaussianStatistic stat(StatisticKind::plugin_lp, 1, 1);
    auto vals = simulate_statistic(stat, Vec(16, 0.0), 1, 2000, RandomStream{9, 0}.child(0x1000));
    EXPECT_DOUBLE_EQ(t, upper_quantile(vals, 0.05));
}

TEST(MCWorstCase, MaxOverCandidates) {
    auto s = spec_for(1, 8, 8, Calibration::mc_worst_case);
    s.null_candidates = {Vec(64, 8.0 / 64), [] {
                             Vec v(64, 0.0);
                             v[0] = 8;
                             return v;
                         }()};
    const double t = mc_worst_case_threshold(s, 64, 1, {4, 0});
    GaussianStatistic stat(StatisticKind::plugin_lp, 1, 1);
    for (std::size_t c = 0; c < 2; ++c) {
        auto vals = simulate_statistic(stat, s.null_candidates[c], 1, 2000, RandomStream{4, 0}.child(0x1000 + c));
        EXPECT_GE(t, upper_quantile(vals, 0.05));
    }
    EXPECT_EQ(t, mc_worst_case_threshold(s, 64, 1, {4, 0}));
}

TEST(MCWorstCase, RejectsCandidatesOutsideNull) {
    auto s = spec_for(1, 1, 1, Calibration::mc_worst_case);
    s.null_candidates = {Vec(4, 1.0)};
    EXPECT_THROW(mc_worst_case_threshold(s, 4, 1, {}), ValidationError);
    s.null_candidates.clear();
    s.null_candidates.push_back({});
    EXPECT_THROW(mc_worst_case_threshold(s, 4, 1, {}), ValidationError);
}

TEST(EstimationBased, Examples) {
    auto a = estimation_based_test(0, 0, 1, 0.05);
    EXPECT_FALSE(a.reject);
    EXPECT_NEAR(a.threshold, std::sqrt(20.0), 1e-12);
    EXPECT_TRUE(estimation_based_test(10, 0, 1, 0.05).reject);
    EXPECT_TRUE(estimation_based_test(1.0001, 1, 0, 0.05).reject);
    EXPECT_FALSE(estimation_based_test(1.0, 1, 0, 0.05).reject);
}

TEST(EstimationBased, Phi) {
    EXPECT_NEAR(phi_for_l1_plugin(1, 1), 1 + 2 / std::numbers::pi, 1e-14);
    EXPECT_NEAR(phi_for_l1_plugin(1, 1), 1.6366, 1e-4);
    EXPECT_NEAR(phi_for_l1_plugin(2, 1), 4 * (1 + 2 / std::numbers::pi), 1e-13);
    EXPECT_NEAR(phi_for_l1_plugin(1, 10), 100 * (1 + 2 / std::numbers::pi), 1e-11);
}

TEST(RunTest, ChebyshevRejectsExample) {
    auto s = spec_for(2, 0, 0, Calibration::chebyshev_envelope);
    // ||x||^2 - 10 = 25 > 20
    Vec x(10, 0.0);
    x[0] = std::sqrt(35.0);
    auto d = run_test(s, x, 1, {});
    EXPECT_TRUE(d.reject);
    EXPECT_NEAR(d.statistic_value, 25, 1e-12);
    EXPECT_NEAR(d.threshold, 20, 1e-12);
}

// For even p > 2 the debiased statistic at x = 0 is d He_p(0) > 0, so only p <= 2 is checked.
TEST(RunTest, ZeroDataAccepts) {
    for (auto cal : {Calibration::cantelli_envelope, Calibration::chebyshev_envelope, Calibration::mc_worst_case})
        for (double p : {1.0, 1.5, 2.0})
            for (double eps0 : {0.0, 1.0, 5.0}) {
                auto d = run_test(spec_for(p, eps0, eps0, cal), Vec(16, 0.0), 1, {1, 0});
                EXPECT_FALSE(d.reject) << to_string(cal) << " " << p << " " << eps0;
            }
}

TEST(RunTest, TieAccepts) {
    auto d = make_decision(3.0, 3.0);
    EXPECT_FALSE(d.reject);
}

TEST(RunTest, PValueConsistency) {
    auto s = spec_for(2, 0, 0, Calibration::chebyshev_envelope);
    Vec x(10, 0.0);
    x[0] = std::sqrt(35.0);
    auto d = run_test(s, x, 1, {});
    EXPECT_NEAR(d.p_value_upper, 20.0 / (25.0 * 25.0), 1e-12);
}

TEST(Flip, ThresholdExample) {
    auto s = spec_for(2, 0, 10, Calibration::chebyshev_envelope);
    auto f = flip_to_equivalence(s);
    EXPECT_EQ(f.hypothesis.direction, Direction::equivalence);
    f.alpha = 0.05;
    EXPECT_NEAR(equivalence_threshold(f, 10, 1, {}), 100 - std::sqrt((20.0 + 400.0) / 0.05), 1e-9);
}

TEST(Flip, DoubleFlipSameDecisions) {
    auto s = spec_for(1, 2, 8, Calibration::cantelli_envelope);
    auto ff = flip_to_equivalence(flip_to_equivalence(s));
    std::mt19937_64 eng(1);
    std::normal_distribution<double> N;
    for (int t = 0; t < 50; ++t) {
        Vec x(16);
        for (auto& v : x) v = 3 * N(eng);
        auto a = run_test(s, x, 1, {}), b = run_test(ff, x, 1, {});
        EXPECT_EQ(a.reject, b.reject);
        EXPECT_EQ(a.threshold, b.threshold);
    }
}

TEST(Flip, CrossedThresholdsRejectNothing) {
    auto s = flip_to_equivalence(spec_for(2, 3, 3, Calibration::cantelli_envelope));
    for (double scale : {0.0, 0.5, 1.0, 3.0}) {
        Vec x(10, scale);
        EXPECT_FALSE(run_test(s, x, 1, {}).reject);
    }
}

TEST(Flip, EquivalencePowerAtZero) {
    // Far-separated equivalence test accepts "close" when v = 0.
    TestSpec s = spec_for(2, 0, 40, Calibration::cantelli_envelope);
    s.hypothesis.direction = Direction::equivalence;
    int rej = 0;
    for (int r = 0; r < 200; ++r)
        rej += run_test(s, sample_gaussian_sequence(GaussianSequenceSpec::zero(16, 1), RandomStream{3, 0}.child(r)), 1, {})
                   .reject;
    EXPECT_GT(rej, 180);
}

// Envelope-calibrated validity on every extremal null candidate (reduced grid; the full grid is an acceptance criterion).
TEST(Validity, EnvelopeCalibration) {
    const int R = 4000;
    for (double p : {1.0, 2.0, 4.0}) {
        const int d = 16;
        for (double eps0 : {0.0, std::pow(static_cast<double>(d), 1 / (2 * p))}) {
            auto s = spec_for(p, eps0, eps0, Calibration::cantelli_envelope);
            auto decide = make_decider(s, d, 1, {});
            for (const auto& v : extremal_null_candidates(p, eps0, d)) {
                double rate = rejection_rate(decide, v, 1, R, {17, 0});
                EXPECT_LE(rate, 0.05 + 3 * std::sqrt(0.05 * 0.95 / R)) << p << " " << eps0;
            }
        }
    }
}

TEST(Power, ChebyshevConditionImpliesPower) {
    // p = 2, d = 64: t_sup at eps0 = 0 is sqrt(128/0.05); choose eps1 with t_inf >= t_sup.
    const int d = 64;
    auto s = spec_for(2, 0, 0, Calibration::chebyshev_envelope);
    const double tsup = chebyshev_threshold(s.hypothesis, 2, 1, d, 0.05);
    double eps1 = 1;
    while (true) {
        auto e = envelope(2, 1, d, eps1);
        if (e.mean_lower - std::sqrt(e.var_upper / 0.1) >= tsup) break;
        eps1 *= 1.05;
    }
    auto decide = make_decider(s, d, 1, {});
    for (const auto& v : extremal_alternatives(2, eps1, d)) {
        double power = rejection_rate(decide, v, 1, 2000, {5, 0});
        EXPECT_GE(power, 0.9 - 3 * std::sqrt(0.09 / 2000));
    }
}

TEST(EstimationBased, ValidAndPowerful) {
    const int d = 64;
    const double alpha = 0.05, beta = 0.1, phi = phi_for_l1_plugin(1, d);
    auto s = spec_for(1, 4, 4, Calibration::estimation_based);
    const double eps0 = 4, eps1 = eps0 + (1 / std::sqrt(alpha) + 1 / std::sqrt(beta)) * std::sqrt(phi);
    s.hypothesis.eps1 = eps1;
    auto decide = make_decider(s, d, 1, {});
    for (const auto& v : extremal_null_candidates(1, eps0, d))
        EXPECT_LE(rejection_rate(decide, v, 1, 2000, {6, 0}), alpha + 3 * std::sqrt(alpha * (1 - alpha) / 2000));
    for (const auto& v : extremal_alternatives(1, eps1, d))
        EXPECT_GE(rejection_rate(decide, v, 1, 2000, {6, 1}), 1 - beta - 3 * std::sqrt(beta * (1 - beta) / 2000));
}

TEST(TestSpecValidation, Invariants) {
    auto s = spec_for(1, 0, 0, Calibration::mc_worst_case);
    s.mc_reps = 50;
    EXPECT_THROW(s.validate(), ValidationError);
    s = spec_for(1, 0, 0, Calibration::cantelli_envelope);
    s.beta = 0.96;
    EXPECT_THROW(s.validate(), ValidationError);
    EXPECT_THROW(calibration_from_string("bogus"), ValidationError);
}
