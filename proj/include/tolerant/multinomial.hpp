#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <vector>

#include "calibration.hpp"
#include "models.hpp"
#include "parallel.hpp"
#include "statistics.hpp"

namespace tolerant {

enum class MultinomialCalibration { mcdiarmid_envelope, mc_simple_null };

inline std::string to_string(MultinomialCalibration c) {
    return c == MultinomialCalibration::mcdiarmid_envelope ? "mcdiarmid_envelope" : "mc_simple_null";
}

inline MultinomialCalibration multinomial_calibration_from_string(const std::string& s) {
    if (s == "mcdiarmid_envelope" || s == "envelope") return MultinomialCalibration::mcdiarmid_envelope;
    if (s == "mc_simple_null" || s == "mc") return MultinomialCalibration::mc_simple_null;
    throw ValidationError("unknown multinomial calibration: " + s);
}

// Tolerant test of H0: D(F, G) <= eps0 from counts. p = 1 uses total variation, p > 1 the l_p distance.
struct MultinomialTest {
    Vec G;
    double p = 1;
    double eps0 = 0;
    double alpha = 0.05;
    MultinomialCalibration calibration = MultinomialCalibration::mcdiarmid_envelope;
    int mc_reps = 2000;
    RandomStream rng{};

    MultinomialTest() = default;
    MultinomialTest(Vec g, double p_, double eps0_, double alpha_,
                    MultinomialCalibration cal = MultinomialCalibration::mcdiarmid_envelope, int reps = 2000,
                    RandomStream r = {})
        : G(std::move(g)), p(p_), eps0(eps0_), alpha(alpha_), calibration(cal), mc_reps(reps), rng(r) {
        validate();
    }

    void validate() const {
        require(!G.empty(), "MultinomialTest: reference G must be non-empty");
        validate_simplex(G, "MultinomialTest.G");
        require(std::isfinite(p) && p >= 1, "MultinomialTest: p must be a finite real >= 1");
        require(std::isfinite(eps0) && eps0 >= 0, "MultinomialTest: eps0 must be >= 0");
        require(alpha > 0 && alpha < 1, "MultinomialTest: alpha must lie in (0,1)");
        if (calibration == MultinomialCalibration::mc_simple_null) {
            require(eps0 == 0, "MultinomialTest: Monte Carlo calibration needs the simple null eps0 = 0");
            require(mc_reps >= 100, "MultinomialTest: mc_reps must be >= 100");
        }
    }

    int d() const { return static_cast<int>(G.size()); }

    double statistic(const Counts& counts, std::int64_t n) const {
        if (p == 1) return tv_plugin_statistic(counts, n, G);
        require(counts.size() == G.size(), "MultinomialTest: counts and G must have equal length");
        return lp_freq_distance(counts, n, G, p);
    }

    // Bound on E D(F_hat, F) and the McDiarmid bounded-difference constant, both for sample size n.
    double mean_bound(std::int64_t n) const {
        const double dd = static_cast<double>(d());
        if (p == 1) return 0.5 * std::sqrt((dd - 1) / static_cast<double>(n));
        return std::pow(dd, std::max(0.0, 1 / p - 0.5)) * std::sqrt((1 - 1 / dd) / static_cast<double>(n));
    }
    double difference_constant() const { return p == 1 ? 1.0 : std::pow(2.0, 1 / p); }

    double threshold(std::int64_t n) const {
        require(n >= 1, "MultinomialTest: n must be >= 1");
        if (calibration == MultinomialCalibration::mcdiarmid_envelope)
            return eps0 + mean_bound(n) +
                   difference_constant() * std::sqrt(std::log(1 / alpha) / (2.0 * static_cast<double>(n)));
        return mc_threshold(n);
    }

    double p_value_upper(double value, std::int64_t n) const {
        if (calibration != MultinomialCalibration::mcdiarmid_envelope) return 1.0;
        double t = value - eps0 - mean_bound(n);
        if (t <= 0) return 1.0;
        const double c = difference_constant();
        return std::min(1.0, std::exp(-2.0 * static_cast<double>(n) * t * t / (c * c)));
    }

    TestDecision decide(const Counts& counts) const {
        const std::int64_t n = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
        require(n >= 1, "MultinomialTest: counts must sum to at least 1");
        double v = statistic(counts, n);
        return make_decision(v, threshold(n), p_value_upper(v, n));
    }

    bool rejects(const Counts& counts) const { return decide(counts).reject; }

   private:
    struct Cache {
        std::mutex mu;
        std::map<std::int64_t, double> thresholds;
    };
    std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();

    double mc_threshold(std::int64_t n) const {
        require(eps0 == 0, "MultinomialTest: Monte Carlo calibration needs the simple null eps0 = 0");
        {
            std::lock_guard<std::mutex> lock(cache_->mu);
            auto it = cache_->thresholds.find(n);
            if (it != cache_->thresholds.end()) return it->second;
        }
        const RandomStream base = rng.child(static_cast<std::uint64_t>(n));
        Vec vals(static_cast<size_t>(mc_reps));
        parallel_for(vals.size(), [&](std::size_t r) {
            auto eng = base.child(r).engine();
            vals[r] = statistic(sample_multinomial_counts(n, G, eng), n);
        });
        double t = upper_quantile(std::move(vals), alpha);
        std::lock_guard<std::mutex> lock(cache_->mu);
        cache_->thresholds.emplace(n, t);
        return t;
    }
};

// Test for Poisson counts X_i ~ Poi(m lambda_i): conditionally on K = sum X, X is Multinomial(K, lambda).
struct PoissonTest {
    MultinomialTest inner;

    TestDecision decide(const Counts& x) const {
        std::int64_t K = std::accumulate(x.begin(), x.end(), std::int64_t{0});
        if (K == 0) return make_decision(0.0, 0.0, 1.0);
        return inner.decide(x);
    }
    bool rejects(const Counts& x) const { return decide(x).reject; }
};

// Uniformly random sub-sample of size k from the n observations summarised by counts.
inline Counts subsample_counts(const Counts& counts, std::int64_t k, std::mt19937_64& eng) {
    std::vector<std::int32_t> labels;
    for (std::size_t i = 0; i < counts.size(); ++i) labels.insert(labels.end(), static_cast<size_t>(counts[i]), static_cast<std::int32_t>(i));
    require(k >= 0 && k <= static_cast<std::int64_t>(labels.size()), "subsample_counts: k exceeds the sample size");
    Counts out(counts.size(), 0);
    for (std::int64_t j = 0; j < k; ++j) {
        std::uniform_int_distribution<std::int64_t> U(j, static_cast<std::int64_t>(labels.size()) - 1);
        std::swap(labels[static_cast<size_t>(j)], labels[static_cast<size_t>(U(eng))]);
        ++out[static_cast<size_t>(labels[static_cast<size_t>(j)])];
    }
    return out;
}

using CountsTest = std::function<TestDecision(const Counts&)>;

struct WrappedDecision {
    TestDecision decision;
    std::int64_t size = 0;  // n_tilde (Poissonisation) or K (de-Poissonisation)
    bool forced_accept = false;
};

// Runs a Poisson-model test (intensity n/2) on a multinomial sample of size n:
// draw n_tilde ~ Poi(n/2); accept if n_tilde > n, else test the first n_tilde observations.
inline WrappedDecision poissonize_multinomial_test(const CountsTest& poisson_test, const Counts& counts,
                                                   const RandomStream& rng) {
    const std::int64_t n = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    require(n >= 1, "poissonize_multinomial_test: empty sample");
    auto eng = rng.engine();
    std::poisson_distribution<std::int64_t> P(static_cast<double>(n) / 2);
    WrappedDecision out;
    out.size = P(eng);
    if (out.size > n) {
        out.forced_accept = true;
        out.decision = make_decision(0.0, 0.0, 1.0);
        return out;
    }
    out.decision = poisson_test(subsample_counts(counts, out.size, eng));
    return out;
}

// Runs a multinomial test family psi_K on Poisson counts of intensity n: accept unless n/2 <= K <= 3n/2.
inline WrappedDecision depoissonize_poisson_test(const CountsTest& multinomial_family, const Counts& x, double n) {
    require(n > 0, "depoissonize_poisson_test: n must be > 0");
    WrappedDecision out;
    out.size = std::accumulate(x.begin(), x.end(), std::int64_t{0});
    const double K = static_cast<double>(out.size);
    if (K < n / 2 || K > 1.5 * n || out.size == 0) {
        out.forced_accept = true;
        out.decision = make_decision(0.0, 0.0, 1.0);
        return out;
    }
    out.decision = multinomial_family(x);
    return out;
}

struct ToleranceFactor {
    double value = 0;
    bool censored = false;
    int evaluations = 0;
};

// sup{eps in [0, hi] : test at tolerance eps rejects}, by bisection to relative tolerance rel_tol.
// Returns the largest tolerance verified to reject.
inline ToleranceFactor tolerance_factor(const std::function<bool(double)>& rejects_at, double bracket_hi,
                                        double rel_tol = 1e-4) {
    require(bracket_hi > 0 && std::isfinite(bracket_hi), "tolerance_factor: bracket_hi must be positive");
    ToleranceFactor tf;
    ++tf.evaluations;
    if (!rejects_at(0.0)) return tf;
    ++tf.evaluations;
    if (rejects_at(bracket_hi)) {
        tf.value = bracket_hi;
        tf.censored = true;
        return tf;
    }
    double lo = 0, hi = bracket_hi;
    while (hi - lo > rel_tol * hi && tf.evaluations < 400) {
        double mid = 0.5 * (lo + hi);
        ++tf.evaluations;
        (rejects_at(mid) ? lo : hi) = mid;
    }
    tf.value = lo;
    return tf;
}

inline ToleranceFactor tolerance_factor(const MultinomialTest& test, const Counts& counts, double bracket_hi = 1.0,
                                        double rel_tol = 1e-4) {
    require(test.calibration == MultinomialCalibration::mcdiarmid_envelope,
            "tolerance_factor: needs a calibration valid for every tolerance");
    return tolerance_factor(
        [&](double eps) {
            MultinomialTest t = test;
            t.eps0 = eps;
            return t.rejects(counts);
        },
        bracket_hi, rel_tol);
}

struct PhysicsReport {
    TestDecision decision;
    ToleranceFactor tolerance;
    double r = 0;
    std::int64_t n = 0;
    int d = 0;
    double predicted_floor = 0;     // max(d^{1/4}/sqrt(n), d^{1/4} n^{-1/4} sqrt(r))
    double predicted_floor_r0 = 0;  // d^{1/4}/sqrt(n)
    bool no_loss_regime = false;    // r <= 1/sqrt(n)
};

// TV test of H0: V(F, B) <= r for some B with V(B, reference) <= r, i.e. V(F, reference) <= r.
inline PhysicsReport physics_demo(const Counts& counts, const Vec& reference, double r, double alpha) {
    require(r >= 0 && r <= 1, "physics_demo: r must lie in [0,1]");
    MultinomialTest test(reference, 1.0, r, alpha);
    PhysicsReport rep;
    rep.r = r;
    rep.n = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    rep.d = static_cast<int>(reference.size());
    rep.decision = test.decide(counts);
    rep.tolerance = tolerance_factor(test, counts, 1.0);
    const double q = std::pow(static_cast<double>(rep.d), 0.25);
    const double nn = static_cast<double>(rep.n);
    rep.predicted_floor_r0 = q / std::sqrt(nn);
    rep.predicted_floor = std::max(rep.predicted_floor_r0, q / std::pow(nn, 0.25) * std::sqrt(r));
    rep.no_loss_regime = r <= 1 / std::sqrt(nn);
    return rep;
}

}  // namespace tolerant
